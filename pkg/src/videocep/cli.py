"""Command-line interface.

    engine run --config engine.ini
    engine run --input Camera=stream.jsonl --query q1=q1.veql --output -
    engine check --query q1.veql
    engine dump-graph --input stream.jsonl --frame 3
    engine bench --spec bench.json --seed 7 --out results/

The ENGINE_LOG environment variable (debug/info/warning/error) controls
log verbosity. Exit codes: 0 success, 1 configuration or query error,
2 runtime failure.
"""

from __future__ import annotations

import logging
import os
import sys

import click

from .bench import load_bench_spec, run_benchmark, sweep_throughput
from .engine import Engine, EngineConfig, load_config
from .errors import EngineError, StartupError, VeqlError
from .graph import GraphBuilder, TrackingParams, format_graph
from .ingest import SequenceValidator, iter_file_lines, parse_detection_line
from .veql import compile_query, describe_plan, parse_veql, render_veql

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _setup_logging() -> None:
    level = os.environ.get("ENGINE_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@click.group()
def main() -> None:
    """Complex event processing over video detection streams."""
    _setup_logging()


def _parse_kv(values: tuple[str, ...], what: str) -> dict[str, str]:
    out = {}
    for value in values:
        name, sep, rest = value.partition("=")
        if not sep or not name or not rest:
            raise StartupError(f"{what} must look like name=value, got {value!r}")
        out[name] = rest
    return out


@main.command("run")
@click.option("--config", "config_path", type=click.Path(), help="INI configuration file.")
@click.option("--input", "inputs", multiple=True, help="producer=path (or producer=tcp://host:port).")
@click.option("--query", "queries", multiple=True, help="id=veql-file.")
@click.option("--query-inline", "inline_queries", multiple=True, help="id=veql-text.")
@click.option("--output", "output", default=None, help="Notification sink path, '-' for stdout.")
@click.option("--metrics", "metrics_path", default=None, help="Write the metrics summary JSON here.")
@click.option("--latency-csv", "latency_csv", default=None, help="Write per-window latency samples CSV.")
@click.option("--state-dump", "state_dump", default=None, help="Append sealed window records here (debug).")
@click.option("--iou-threshold", type=float, default=None, help="Tracking IOU threshold (default 0.3).")
@click.option("--cosine-threshold", type=float, default=None, help="Tracking cosine similarity threshold (default 0.7).")
@click.option("--queue-capacity", type=int, default=None, help="Matcher queue capacity (default 16).")
@click.option("--combination-cap", type=int, default=None, help="SEQ combination cap per window (default 10000).")
def run_command(
    config_path,
    inputs,
    queries,
    inline_queries,
    output,
    metrics_path,
    latency_csv,
    state_dump,
    iou_threshold,
    cosine_threshold,
    queue_capacity,
    combination_cap,
) -> None:
    """Run the pipeline until all sources are exhausted."""
    try:
        config = load_config(config_path) if config_path else EngineConfig()
        for producer_id, source in _parse_kv(inputs, "--input").items():
            config.producers[producer_id] = source
        for query_id, path in _parse_kv(queries, "--query").items():
            with open(path, "r", encoding="utf-8") as handle:
                config.queries[query_id] = handle.read()
        for query_id, text in _parse_kv(inline_queries, "--query-inline").items():
            config.queries[query_id] = text
        if output is not None:
            config.sink_path = output
        if metrics_path is not None:
            config.metrics_path = metrics_path
        if latency_csv is not None:
            config.latency_csv_path = latency_csv
        if state_dump is not None:
            config.state_dump_path = state_dump
        if iou_threshold is not None or cosine_threshold is not None:
            config.tracking = TrackingParams(
                iou_threshold=(
                    iou_threshold if iou_threshold is not None else config.tracking.iou_threshold
                ),
                cosine_sim_threshold=(
                    cosine_threshold
                    if cosine_threshold is not None
                    else config.tracking.cosine_sim_threshold
                ),
            )
        if queue_capacity is not None:
            config.matcher_queue_capacity = queue_capacity
        if combination_cap is not None:
            config.combination_cap = combination_cap
        engine = Engine(config)
    except (StartupError, VeqlError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    try:
        metrics = engine.run()
    except StartupError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (EngineError, OSError) as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    summary = metrics.to_summary()
    click.echo(
        f"processed {summary['frames_total']} frames in {summary['wall_s']:.2f}s "
        f"({summary['throughput_fps']:.1f} fps)",
        err=True,
    )
    sys.exit(EXIT_OK)


@main.command("check")
@click.option("--query", "query_path", required=True, type=click.Path(exists=True))
def check_command(query_path) -> None:
    """Parse and compile a query, printing the plan."""
    with open(query_path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        ast = parse_veql(text)
        plan = compile_query(ast, os.path.splitext(os.path.basename(query_path))[0])
    except VeqlError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(describe_plan(plan))
    click.echo(f"canonical: {render_veql(ast)}")
    sys.exit(EXIT_OK)


@main.command("dump-graph")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--frame", "frame_number", required=True, type=int)
@click.option("--iou-threshold", type=float, default=0.3)
@click.option("--cosine-threshold", type=float, default=0.7)
def dump_graph_command(input_path, frame_number, iou_threshold, cosine_threshold) -> None:
    """Build graphs from a stream file and dump the requested frame."""
    builder = None
    validator = SequenceValidator()
    try:
        for line in iter_file_lines(input_path):
            frame = parse_detection_line(line)
            if validator.accept(frame) is None:
                continue
            if builder is None:
                builder = GraphBuilder(
                    frame.producer_id,
                    TrackingParams(iou_threshold, cosine_threshold),
                )
            graph = builder.build(frame)
            if frame.frame_index == frame_number:
                click.echo(format_graph(graph))
                sys.exit(EXIT_OK)
    except EngineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"error: frame {frame_number} not found in {input_path}", err=True)
    sys.exit(EXIT_CONFIG)


@main.command("bench")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--sweep", "sweep_counts", default=None, help="Comma-separated producer counts.")
def bench_command(spec_path, seed, out_dir, sweep_counts) -> None:
    """Generate a synthetic stream, run the engine and write CSV reports."""
    try:
        bench, spec_sweep = load_bench_spec(spec_path)
    except (OSError, KeyError, ValueError) as exc:
        click.echo(f"error: bad bench spec: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        if bench.queries:
            summary = run_benchmark(bench, out_dir, seed)
            for query_id, scores in summary["queries"].items():
                click.echo(
                    f"{query_id}: P={scores['precision']:.3f} R={scores['recall']:.3f} "
                    f"F={scores['f_pooled']:.3f} "
                    f"latency={scores['matcher_latency']['mean_ms']:.2f}ms"
                )
        counts = None
        if sweep_counts:
            counts = [int(c) for c in sweep_counts.split(",")]
        elif spec_sweep:
            counts = [int(c) for c in spec_sweep]
        if counts:
            for row in sweep_throughput(bench.stream, counts, out_dir, seed):
                click.echo(
                    f"{row['producers']} producers: {row['throughput_fps']:.1f} fps "
                    f"({row['frames']} frames in {row['wall_s']:.2f}s)"
                )
    except EngineError as exc:
        click.echo(f"runtime failure: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()

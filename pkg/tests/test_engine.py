from __future__ import annotations

import json
import socket
import threading
import time

import pytest
from click.testing import CliRunner

from videocep.cli import main as cli_main
from videocep.engine import Engine, EngineConfig, load_config
from videocep.errors import RegistrationError, StartupError
from videocep.ingest import serialize_frame

from conftest import make_detection, make_frame

Q1 = (
    "SELECT Object FROM Camera WHERE Object.label='Car' "
    "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5"
)
Q4 = (
    "SELECT SEQ(Object1, Object2) FROM Camera WHERE Object1.label='Car' AND "
    "Object2.label='Person' WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5"
)


def car_frame(index, ts, label="Car", p=0.9, producer="Camera"):
    return make_frame(
        producer=producer,
        index=index,
        ts=ts,
        detections=[make_detection(label=label, confidence=p, bbox=(10 + index, 10, 40, 40))],
    )


def empty_frame(index, ts, producer="Camera"):
    return make_frame(producer=producer, index=index, ts=ts)


def write_frames(tmp_path, frames, name="stream.jsonl"):
    path = tmp_path / name
    path.write_text("\n".join(serialize_frame(f) for f in frames) + "\n", encoding="utf-8")
    return str(path)


def run_engine(tmp_path, frames, queries, **config_kwargs):
    stream = write_frames(tmp_path, frames)
    sink = tmp_path / "notifications.jsonl"
    config = EngineConfig(
        producers={"Camera": stream},
        queries=queries,
        sink_path=str(sink),
        **config_kwargs,
    )
    engine = Engine(config)
    metrics = engine.run()
    lines = [l for l in sink.read_text(encoding="utf-8").splitlines() if l.strip()]
    return metrics, [json.loads(l) for l in lines]


def test_single_pattern_single_notification(tmp_path):
    # one Car in an otherwise empty stream: exactly one OBJECT notification
    frames = [empty_frame(i, i * 100) for i in range(5)]
    frames.append(car_frame(5, 500))
    frames += [empty_frame(i, i * 100) for i in range(6, 20)]
    metrics, notifications = run_engine(tmp_path, frames, {"q1": Q1})
    assert len(notifications) == 1
    n = notifications[0]
    assert n["query_id"] == "q1"
    assert n["pattern_kind"] == "OBJECT"
    assert n["events"][0]["frame_index"] == 5
    assert metrics.producers["Camera"].frames_ingested == 20


def test_duplicate_query_id_rejected(tmp_path):
    config = EngineConfig(producers={"Camera": "unused"}, queries={"q1": Q1})
    engine = Engine(config)
    with pytest.raises(RegistrationError, match="duplicate"):
        engine.register_query("q1", Q1)


def test_unknown_producer_named_in_error():
    config = EngineConfig(producers={"Other": "x"})
    with pytest.raises(StartupError, match="q1"):
        Engine(config).register_query("q1", Q1)


def test_missing_source_is_startup_error(tmp_path):
    config = EngineConfig(
        producers={"Camera": str(tmp_path / "missing.jsonl")}, queries={"q1": Q1}
    )
    with pytest.raises(StartupError, match="unreadable"):
        Engine(config).run()


def test_two_queries_fan_out_equally(tmp_path):
    frames = [car_frame(i, i * 100) for i in range(10)]
    frames.append(make_frame(index=10, ts=1000, detections=[
        make_detection(label="Person", bbox=(300, 10, 40, 40)),
    ]))
    metrics, notifications = run_engine(tmp_path, frames, {"q1": Q1, "q4": Q4})
    q1 = metrics.queries["q1"]
    q4 = metrics.queries["q4"]
    assert q1.states_dispatched == q4.states_dispatched == 1
    kinds = {n["query_id"] for n in notifications}
    assert kinds == {"q1", "q4"}


def test_replay_determinism(tmp_path):
    frames = []
    for i in range(120):
        ts = i * 100
        if i % 7 == 0:
            frames.append(car_frame(i, ts))
        elif i % 11 == 0:
            frames.append(
                make_frame(index=i, ts=ts, detections=[
                    make_detection(label="Person", confidence=0.8, bbox=(200, 10, 40, 40)),
                ])
            )
        else:
            frames.append(empty_frame(i, ts))
    first_metrics, first = run_engine(tmp_path, frames, {"q1": Q1, "q4": Q4})
    second_metrics, second = run_engine(tmp_path, frames, {"q1": Q1, "q4": Q4})

    def per_query(notes):
        out = {}
        for n in notes:
            out.setdefault(n["query_id"], []).append(json.dumps(n, sort_keys=True))
        return out

    assert per_query(first) == per_query(second)
    assert first_metrics.frames_total == second_metrics.frames_total


def test_no_frame_loss_for_tumbling(tmp_path):
    frames = [car_frame(i, i * 50) for i in range(101)]
    stream = write_frames(tmp_path, frames)
    dump = tmp_path / "states.jsonl"
    config = EngineConfig(
        producers={"Camera": stream},
        queries={"q1": Q1},
        sink_path=str(tmp_path / "out.jsonl"),
        state_dump_path=str(dump),
    )
    metrics = Engine(config).run()
    records = [json.loads(l) for l in dump.read_text().splitlines() if l.strip()]
    assert sum(r["graphs"] for r in records) == metrics.producers["Camera"].frames_ingested
    starts = [r["window"][0] for r in records]
    assert len(starts) == len(set(starts))


def test_out_of_order_frames_dropped_and_counted(tmp_path):
    frames = [car_frame(0, 0), car_frame(5, 500), car_frame(3, 300), car_frame(6, 600)]
    metrics, _ = run_engine(tmp_path, frames, {"q1": Q1})
    assert metrics.producers["Camera"].frames_ingested == 3
    assert metrics.producers["Camera"].frames_dropped == 1


def test_malformed_lines_counted(tmp_path):
    stream = tmp_path / "bad.jsonl"
    stream.write_text(
        serialize_frame(car_frame(0, 0)) + "\n{not json}\n" + serialize_frame(car_frame(1, 100)) + "\n"
    )
    config = EngineConfig(
        producers={"Camera": str(stream)}, queries={"q1": Q1},
        sink_path=str(tmp_path / "out.jsonl"),
    )
    metrics = Engine(config).run()
    assert metrics.producers["Camera"].parse_errors == 1
    assert metrics.producers["Camera"].frames_ingested == 2


def test_concurrent_sinks_lines_all_parse(tmp_path):
    frames = [car_frame(i, i * 20) for i in range(300)]
    queries = {f"q{k}": Q1 for k in range(4)}
    _metrics, notifications = run_engine(tmp_path, frames, queries)
    assert len(notifications) == 4 * 300
    for n in notifications:
        assert n["events"][0]["label"] == "Car"


def test_metrics_and_latency_reports_written(tmp_path):
    frames = [car_frame(i, i * 100) for i in range(30)]
    stream = write_frames(tmp_path, frames)
    metrics_path = tmp_path / "metrics.json"
    latency_path = tmp_path / "latency.csv"
    config = EngineConfig(
        producers={"Camera": stream},
        queries={"q1": Q1},
        sink_path=str(tmp_path / "out.jsonl"),
        metrics_path=str(metrics_path),
        latency_csv_path=str(latency_path),
    )
    Engine(config).run()
    summary = json.loads(metrics_path.read_text())
    assert summary["frames_total"] == 30
    assert summary["queries"]["q1"]["notifications_emitted"] > 0
    header, *rows = latency_path.read_text().splitlines()
    assert header == "query_id,window_start_ms,window_end_ms,latency_ms"
    assert rows


def test_socket_source(tmp_path):
    frames = [car_frame(i, i * 100) for i in range(12)]
    payload = "".join(serialize_frame(f) + "\n" for f in frames).encode()
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(("127.0.0.1", 0))
    server.listen(1)
    port = server.getsockname()[1]

    def serve():
        conn, _addr = server.accept()
        conn.sendall(payload)
        conn.close()

    thread = threading.Thread(target=serve)
    thread.start()
    config = EngineConfig(
        producers={"Camera": f"tcp://127.0.0.1:{port}"},
        queries={"q1": Q1},
        sink_path=str(tmp_path / "out.jsonl"),
    )
    metrics = Engine(config).run()
    thread.join()
    server.close()
    assert metrics.producers["Camera"].frames_ingested == 12


def test_graceful_shutdown_flushes_reports(tmp_path):
    frames = [car_frame(i, i * 100) for i in range(50_000)]
    stream = write_frames(tmp_path, frames)
    metrics_path = tmp_path / "metrics.json"
    config = EngineConfig(
        producers={"Camera": stream},
        queries={"q1": Q1},
        sink_path=str(tmp_path / "out.jsonl"),
        metrics_path=str(metrics_path),
    )
    engine = Engine(config)
    stopper = threading.Timer(0.15, engine.shutdown)
    stopper.start()
    metrics = engine.run()
    stopper.cancel()
    assert metrics.interrupted
    assert metrics_path.exists()
    summary = json.loads(metrics_path.read_text())
    assert summary["interrupted"] is True


def test_ini_config_loading(tmp_path):
    stream = write_frames(tmp_path, [car_frame(0, 0)])
    query_file = tmp_path / "q1.veql"
    query_file.write_text(Q1, encoding="utf-8")
    config_file = tmp_path / "engine.ini"
    config_file.write_text(
        f"""
[producers]
Camera = {stream}

[queries]
q1 = q1.veql

[engine]
output = out.jsonl
iou_threshold = 0.4
queue_capacity = 8
combination_cap = 500
""",
        encoding="utf-8",
    )
    config = load_config(str(config_file))
    assert config.producers["Camera"] == stream
    assert "SELECT" in config.queries["q1"]
    assert config.tracking.iou_threshold == 0.4
    assert config.matcher_queue_capacity == 8
    assert config.combination_cap == 500
    metrics = Engine(config).run()
    assert metrics.frames_total == 1
    assert (tmp_path / "out.jsonl").exists()


def test_backpressure_small_queue_still_completes(tmp_path):
    frames = [car_frame(i, i * 100) for i in range(500)]
    metrics, notifications = run_engine(
        tmp_path, frames, {"q1": Q1}, matcher_queue_capacity=1, producer_queue_capacity=1
    )
    assert metrics.frames_total == 500
    assert len(notifications) == 500


# -- CLI ----------------------------------------------------------------------


def test_cli_run_and_check(tmp_path):
    runner = CliRunner()
    stream = write_frames(tmp_path, [car_frame(i, i * 100) for i in range(5)])
    query_file = tmp_path / "q1.veql"
    query_file.write_text(Q1, encoding="utf-8")
    out = tmp_path / "out.jsonl"

    result = runner.invoke(
        cli_main,
        ["run", "--input", f"Camera={stream}", "--query", f"q1={query_file}", "--output", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert out.exists()

    result = runner.invoke(cli_main, ["check", "--query", str(query_file)])
    assert result.exit_code == 0
    assert "OBJECT pattern" in result.output

    bad = tmp_path / "bad.veql"
    bad.write_text("SELECT FROM", encoding="utf-8")
    result = runner.invoke(cli_main, ["check", "--query", str(bad)])
    assert result.exit_code == 1

    result = runner.invoke(
        cli_main, ["run", "--input", f"Nope={stream}", "--query", f"q1={query_file}"]
    )
    assert result.exit_code == 1  # query FROM Camera, producer not configured


def test_cli_dump_graph(tmp_path):
    runner = CliRunner()
    stream = write_frames(tmp_path, [car_frame(i, i * 100) for i in range(3)])
    result = runner.invoke(cli_main, ["dump-graph", "--input", stream, "--frame", "2"])
    assert result.exit_code == 0
    assert "frame 2" in result.output and "Car" in result.output
    result = runner.invoke(cli_main, ["dump-graph", "--input", stream, "--frame", "9"])
    assert result.exit_code == 1


def test_cli_bench(tmp_path):
    runner = CliRunner()
    spec = tmp_path / "bench.json"
    spec.write_text(
        json.dumps(
            {
                "stream": {
                    "fps": 10,
                    "duration_s": 12,
                    "script": [
                        {"kind": "burst", "label": "Car", "start_s": 0, "end_s": 3},
                    ],
                },
                "queries": [
                    {
                        "id": "q1",
                        "veql": Q1,
                        "gt": {"kind": "OBJECT", "keys": [{"label": "Car"}]},
                    }
                ],
            }
        ),
        encoding="utf-8",
    )
    out_dir = tmp_path / "bench_out"
    result = runner.invoke(
        cli_main, ["bench", "--spec", str(spec), "--seed", "3", "--out", str(out_dir)]
    )
    assert result.exit_code == 0, result.output
    assert (out_dir / "metrics.csv").exists()
    assert (out_dir / "ground_truth.csv").exists()
    assert "P=1.000" in result.output

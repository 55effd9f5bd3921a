from __future__ import annotations

import math
import time

from videocep.bench import (
    BenchQuery,
    BenchSpec,
    GroundTruthEvent,
    GroundTruthRule,
    KeySpec,
    NoiseSpec,
    ScriptEntry,
    StreamSpec,
    apply_noise,
    f_score,
    generate_stream,
    ground_truth,
    measure_system_latency,
    measure_throughput,
    percentile,
    run_benchmark,
    sweep_throughput,
    write_stream,
)
from videocep.graph import GraphBuilder
from videocep.ingest import parse_detection_line, serialize_frame

from archetypes import attribute_archetype, count_archetype, object_archetype, seq_archetype, spatial_archetype


def test_generation_deterministic():
    spec, _ = object_archetype()
    first = [serialize_frame(f) for f in generate_stream(spec, 42)]
    second = [serialize_frame(f) for f in generate_stream(spec, 42)]
    assert first == second
    third = [serialize_frame(f) for f in generate_stream(spec, 43)]
    assert first != third


def test_zero_objects_yield_empty_frames():
    spec = StreamSpec(fps=5, duration_s=2, background_count=(0, 0), script=[])
    frames = generate_stream(spec, 1)
    assert len(frames) == 10
    assert all(f.detections == () for f in frames)


def test_generated_lines_parse_through_ingest():
    spec, _ = spatial_archetype()
    for frame in generate_stream(spec, 5):
        assert parse_detection_line(serialize_frame(frame)) == frame


def test_seq_script_marks_expected_windows():
    spec = StreamSpec(
        fps=10,
        duration_s=10,
        background_count=(0, 0),
        script=[
            ScriptEntry(kind="burst", label="Car", start_s=0, end_s=2),
            ScriptEntry(kind="burst", label="Person", start_s=3, end_s=5),
        ],
    )
    frames = generate_stream(spec, 0)
    truth = ground_truth(
        frames, "q", GroundTruthRule(kind="SEQ", keys=[KeySpec("Car"), KeySpec("Person")]), 10_000
    )
    assert truth == [GroundTruthEvent("q", 0, 10_000, True)]


def test_f_score_fixed_points():
    truth = [GroundTruthEvent("q", i * 10, i * 10 + 10, True) for i in range(5)]
    perfect = [{"query_id": "q", "window": [i * 10, i * 10 + 10]} for i in range(5)]
    assert f_score(perfect, truth) == (1.0, 1.0, 1.0)

    # P = 3/4 = 0.75, R = 3/5 = 0.6 -> F = 2*0.45/1.35
    truth = [GroundTruthEvent("q", i * 10, i * 10 + 10, True) for i in range(5)]
    truth.append(GroundTruthEvent("q", 50, 60, False))
    predicted = [{"query_id": "q", "window": [i * 10, i * 10 + 10]} for i in range(3)]
    predicted.append({"query_id": "q", "window": [50, 60]})
    precision, recall, f = f_score(predicted, truth)
    assert math.isclose(precision, 0.75)
    assert math.isclose(recall, 0.6)
    assert math.isclose(f, 2 * 0.75 * 0.6 / 1.35)
    assert f_score([], truth) == (0.0, 0.0, 0.0)


def test_noise_free_object_run_is_exact(tmp_path):
    stream, queries = object_archetype()
    summary = run_benchmark(BenchSpec(stream, queries), str(tmp_path / "out"), seed=11)
    scores = summary["queries"]["q1"]
    assert scores["precision"] == 1.0
    assert scores["recall"] == 1.0
    assert scores["f_pooled"] == 1.0
    assert scores["f_window_mean"] == 1.0
    assert (tmp_path / "out" / "metrics.csv").read_text().startswith("query_id,")


def test_dropout_recall_monotone():
    stream, queries = seq_archetype(fps=5, duration_s=60)
    clean = generate_stream(stream, 3)
    truth = ground_truth(clean, "q", queries[0].gt, 10_000)

    def recall_at(rate):
        noisy = apply_noise(clean, NoiseSpec(label_dropout=rate), seed=3)
        # direct evaluation of the ground-truth rule on the noisy stream is a
        # monotone proxy for engine recall (fewer detections, fewer windows)
        from videocep.bench import window_expected, _window_frames

        hits = 0
        for event in truth:
            if not event.expected:
                continue
            frames = _window_frames(noisy, event.window_start_ms, event.window_end_ms)
            if window_expected(frames, queries[0].gt):
                hits += 1
        expected = sum(1 for e in truth if e.expected)
        return hits / expected if expected else 1.0

    rates = [0.0, 0.2, 0.6, 0.995]
    recalls = [recall_at(r) for r in rates]
    assert recalls[0] == 1.0
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))
    assert recalls[-1] < 1.0


def test_dropout_is_nested():
    stream, _ = seq_archetype(fps=5, duration_s=30)
    clean = generate_stream(stream, 7)
    counts = [sum(len(f.detections) for f in apply_noise(clean, NoiseSpec(label_dropout=r), 7))
              for r in (0.0, 0.2, 0.5, 0.9)]
    assert counts[0] == sum(len(f.detections) for f in clean)
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_confidence_jitter_stays_in_range():
    stream, _ = object_archetype(fps=5, duration_s=10)
    clean = generate_stream(stream, 1)
    noisy = apply_noise(clean, NoiseSpec(confidence_jitter=0.3, bbox_jitter_px=4), seed=2)
    for frame in noisy:
        for det in frame.detections:
            assert 0.0 < det.confidence <= 1.0
            assert det.bbox.x_min >= 0 and det.bbox.y_min >= 0
    # jitter preserves detection count
    assert sum(len(f.detections) for f in noisy) == sum(len(f.detections) for f in clean)


def test_measurements_do_not_alter_notifications(tmp_path):
    stream, queries = attribute_archetype(fps=5, duration_s=20)
    first = run_benchmark(BenchSpec(stream, queries), str(tmp_path / "a"), seed=5)
    second = run_benchmark(BenchSpec(stream, queries), str(tmp_path / "b"), seed=5)
    strip = lambda notes: [
        {k: v for k, v in n.items()} for n in notes
    ]
    assert strip(first["notifications"]) == strip(second["notifications"])


def test_throughput_definition():
    from videocep.engine import EngineMetrics

    metrics = EngineMetrics()
    metrics.producer("P1").frames_ingested = 3000
    metrics.wall_s = 10.0
    assert measure_throughput(metrics) == 300.0


def test_percentile_edges():
    assert percentile([], 50) == 0.0
    assert percentile([5.0], 99) == 5.0
    assert percentile([1.0, 2.0, 3.0, 4.0], 50) == 2.0


def test_sweep_writes_csv(tmp_path):
    stream, _ = object_archetype(fps=10, duration_s=3)
    rows = sweep_throughput(stream, [1, 2], str(tmp_path), seed=1)
    assert [r["producers"] for r in rows] == [1, 2]
    lines = (tmp_path / "throughput.csv").read_text().splitlines()
    assert lines[0] == "producers,frames,wall_s,throughput_fps"
    assert len(lines) == 3


def test_system_latency_combines_rep_and_matcher(tmp_path):
    stream, queries = object_archetype(fps=10, duration_s=10)
    summary = run_benchmark(BenchSpec(stream, queries), str(tmp_path / "out"), seed=2)
    metrics = summary["metrics"]
    rep = metrics.producers["Camera"].rep_samples_ms
    mean_rep = sum(rep) / len(rep)
    matcher = summary["queries"]["q1"]["matcher_latency"]["mean_ms"]
    assert math.isclose(
        measure_system_latency(metrics, "Camera", "q1"), mean_rep + matcher, rel_tol=1e-9
    )
    # the detector-time stand-in is zero for replays and additive when given
    assert math.isclose(
        measure_system_latency(metrics, "Camera", "q1", dnn_ms=2.5),
        mean_rep + matcher + 2.5,
        rel_tol=1e-9,
    )


def test_rep_time_matches_external_timers(tmp_path):
    # cross-check the engine's per-frame representation timers against an
    # independent measurement of the same work
    stream, queries = object_archetype(fps=30, duration_s=10)
    frames = generate_stream(stream, 9)
    lines = [serialize_frame(f) for f in frames]

    t0 = time.perf_counter()
    builder = GraphBuilder("Camera")
    for line in lines:
        builder.build(parse_detection_line(line))
    external_total_ms = (time.perf_counter() - t0) * 1000.0

    path = tmp_path / "s.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    from videocep.engine import Engine, EngineConfig

    config = EngineConfig(
        producers={"Camera": str(path)},
        queries={"q1": queries[0].veql},
        sink_path=str(tmp_path / "n.jsonl"),
    )
    metrics = Engine(config).run()
    pm = metrics.producers["Camera"]
    assert len(pm.rep_samples_ms) == len(frames)
    # rep sample is parse + build by definition; totals across placements
    # agree within a generous scheduling budget
    for rep, parse, build in zip(pm.rep_samples_ms, pm.parse_samples_ms, pm.build_samples_ms):
        assert math.isclose(rep, parse + build, rel_tol=1e-9)
    engine_total = sum(pm.rep_samples_ms)
    assert engine_total < external_total_ms * 5 + 50
    assert external_total_ms < engine_total * 5 + 50

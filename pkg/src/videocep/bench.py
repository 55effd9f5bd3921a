"""Synthetic stream generation and engine measurement.

The harness stands in for real camera producers: it scripts detection
streams with known pattern content, derives per-window boolean ground
truth from the clean stream, optionally injects detector-style noise
(label dropout, confidence jitter, box jitter), runs the engine on the
result and reports accuracy (precision/recall/F), matcher latency, system
latency and throughput as CSV.

Ground truth is computed by an evaluator of its own over the raw frame
detections (no graphs, no windows machinery), so accuracy numbers check
the engine against an independent reading of the same content. Noise is
applied after ground truth is derived: a noise-free run must therefore
score F = 1 exactly, and every accuracy loss under noise is attributable
to the injected noise.

Dropout uses one uniform draw per detection compared against the dropout
rate, so runs at increasing rates drop nested supersets of detections and
recall is monotone in the rate by construction.
"""

from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass, field

from .engine import Engine, EngineConfig, EngineMetrics
from .graph import TrackingParams
from .ingest import BoundingBox, DetectionRecord, FrameDetections, serialize_frame
from .windows import covering_starts


# ---------------------------------------------------------------------------
# Stream specification


@dataclass
class KeySpec:
    """What a ground-truth key looks for: a label plus attribute equalities.
    An attribute value of "!value" means 'anything but value'."""

    label: str
    attributes: dict[str, str] = field(default_factory=dict)

    def matches(self, det: DetectionRecord) -> bool:
        if det.label != self.label:
            return False
        for name, wanted in self.attributes.items():
            actual = det.attributes.get(name)
            if actual is None:
                return False
            if wanted.startswith("!"):
                if actual == wanted[1:]:
                    return False
            elif actual != wanted:
                return False
        return True


@dataclass
class ScriptEntry:
    """A scripted pattern injected into the stream for part of its duration.

    kind 'burst': one object with the given label/attributes present in
    every frame of [start_s, end_s). kind 'pair': a subject and a reference
    object, subject kept strictly left of the reference. kind 'count':
    `count` identical objects per frame.
    """

    kind: str
    start_s: float
    end_s: float
    label: str = "Car"
    attributes: dict[str, str] = field(default_factory=dict)
    confidence: float = 0.9
    reference_label: str = "Car"
    reference_attributes: dict[str, str] = field(default_factory=dict)
    count: int = 6


@dataclass
class StreamSpec:
    producer_id: str = "Camera"
    fps: float = 30.0
    duration_s: float = 20.0
    background_count: tuple[int, int] = (0, 0)
    background_labels: dict[str, float] = field(default_factory=lambda: {"Tree": 1.0})
    motion_px_per_frame: float = 2.0
    frame_size: tuple[int, int] = (1280, 720)
    script: list[ScriptEntry] = field(default_factory=list)


@dataclass
class NoiseSpec:
    label_dropout: float = 0.0
    confidence_jitter: float = 0.0
    bbox_jitter_px: float = 0.0

    @property
    def enabled(self) -> bool:
        return self.label_dropout > 0 or self.confidence_jitter > 0 or self.bbox_jitter_px > 0


@dataclass
class GroundTruthRule:
    """Per-window boolean expectation, evaluated on the clean stream.

    kind: OBJECT | SPATIAL | SEQ | EQ | CONJ | DISJ | COUNT. keys holds one
    KeySpec per query object node (subject first for SPATIAL). With
    seq_onset_rule the SEQ expectation follows first-appearance order (the
    manual-annotation reading) instead of any-occurrence order.
    """

    kind: str
    keys: list[KeySpec]
    relation: str = "LEFT"
    cmp: str = ">"
    value: float = 5.0
    per_frame: bool = True
    seq_onset_rule: bool = False


@dataclass
class BenchQuery:
    query_id: str
    veql: str
    gt: GroundTruthRule


@dataclass
class GroundTruthEvent:
    query_id: str
    window_start_ms: int
    window_end_ms: int
    expected: bool


# ---------------------------------------------------------------------------
# Generation

_BOX_SIZE = 60.0


def _bounce(value: float, low: float, high: float) -> float:
    """Reflect a linear trajectory into [low, high]."""
    span = high - low
    if span <= 0:
        return low
    phase = (value - low) % (2.0 * span)
    return low + (phase if phase <= span else 2.0 * span - phase)


def _feature(tag: int) -> tuple[float, float]:
    angle = 0.7 * tag
    return (round(math.cos(angle), 6), round(math.sin(angle), 6))


def generate_stream(spec: StreamSpec, seed: int) -> list[FrameDetections]:
    """Deterministic clean stream: same spec and seed give identical frames."""
    rng = random.Random(f"{seed}/background")
    width, height = spec.frame_size
    x_max = max(1.0, width - _BOX_SIZE)
    y_max = max(1.0, height - _BOX_SIZE)

    background = []
    count = rng.randint(*spec.background_count) if spec.background_count[1] > 0 else 0
    labels = list(spec.background_labels)
    weights = [spec.background_labels[lbl] for lbl in labels]
    for index in range(count):
        background.append(
            {
                "label": rng.choices(labels, weights=weights)[0],
                "x0": rng.uniform(0, x_max),
                "y0": rng.uniform(0, y_max),
                "vx": rng.choice([-1, 1]) * spec.motion_px_per_frame,
                "vy": rng.choice([-1, 1]) * spec.motion_px_per_frame * 0.5,
                "confidence": round(rng.uniform(0.55, 0.95), 3),
                "feature": _feature(1000 + index),
            }
        )

    n_frames = round(spec.fps * spec.duration_s)
    frames = []
    for i in range(n_frames):
        t_s = i / spec.fps
        t_ms = round(i * 1000.0 / spec.fps)
        detections: list[DetectionRecord] = []

        for entry_index, entry in enumerate(spec.script):
            if not entry.start_s <= t_s < entry.end_s:
                continue
            band_y = _bounce(40.0 + 90.0 * entry_index, 0, y_max)
            drift = spec.motion_px_per_frame * i
            if entry.kind == "burst":
                detections.append(
                    DetectionRecord(
                        label=entry.label,
                        confidence=entry.confidence,
                        bbox=BoundingBox(_bounce(40.0 + drift, 0, x_max), band_y, _BOX_SIZE, _BOX_SIZE),
                        attributes=dict(entry.attributes),
                        feature=_feature(entry_index),
                    )
                )
            elif entry.kind == "pair":
                subject_x = _bounce(100.0 + drift, 0, x_max / 2)
                detections.append(
                    DetectionRecord(
                        label=entry.label,
                        confidence=entry.confidence,
                        bbox=BoundingBox(subject_x, band_y, _BOX_SIZE, _BOX_SIZE),
                        attributes=dict(entry.attributes),
                        feature=_feature(entry_index),
                    )
                )
                detections.append(
                    DetectionRecord(
                        label=entry.reference_label,
                        confidence=entry.confidence,
                        bbox=BoundingBox(subject_x + x_max / 2, band_y, _BOX_SIZE, _BOX_SIZE),
                        attributes=dict(entry.reference_attributes),
                        feature=_feature(entry_index + 500),
                    )
                )
            elif entry.kind == "count":
                for j in range(entry.count):
                    detections.append(
                        DetectionRecord(
                            label=entry.label,
                            confidence=entry.confidence,
                            bbox=BoundingBox(
                                40.0 + j * (_BOX_SIZE + 12.0), band_y, _BOX_SIZE, _BOX_SIZE
                            ),
                            attributes=dict(entry.attributes),
                            feature=_feature(entry_index * 100 + j),
                        )
                    )
            else:
                raise ValueError(f"unknown script entry kind {entry.kind!r}")

        for obj in background:
            detections.append(
                DetectionRecord(
                    label=obj["label"],
                    confidence=obj["confidence"],
                    bbox=BoundingBox(
                        _bounce(obj["x0"] + obj["vx"] * i, 0, x_max),
                        _bounce(obj["y0"] + obj["vy"] * i, 0, y_max),
                        _BOX_SIZE,
                        _BOX_SIZE,
                    ),
                    feature=obj["feature"],
                )
            )

        frames.append(
            FrameDetections(
                producer_id=spec.producer_id,
                frame_index=i,
                timestamp_ms=t_ms,
                detections=tuple(detections),
            )
        )
    return frames


def apply_noise(
    frames: list[FrameDetections], noise: NoiseSpec, seed: int
) -> list[FrameDetections]:
    """Detector-style degradation of a clean stream. Dropout decisions come
    from their own RNG stream so increasing the rate drops a superset."""
    drop_rng = random.Random(f"{seed}/dropout")
    jitter_rng = random.Random(f"{seed}/jitter")
    noisy = []
    for frame in frames:
        detections = []
        for det in frame.detections:
            dropped = drop_rng.random() < noise.label_dropout
            if dropped:
                continue
            confidence = det.confidence
            if noise.confidence_jitter > 0:
                confidence += jitter_rng.uniform(-noise.confidence_jitter, noise.confidence_jitter)
                confidence = min(max(confidence, 0.01), 1.0)
            bbox = det.bbox
            if noise.bbox_jitter_px > 0:
                bbox = BoundingBox(
                    max(0.0, bbox.x_min + jitter_rng.uniform(-noise.bbox_jitter_px, noise.bbox_jitter_px)),
                    max(0.0, bbox.y_min + jitter_rng.uniform(-noise.bbox_jitter_px, noise.bbox_jitter_px)),
                    bbox.width,
                    bbox.height,
                )
            detections.append(
                DetectionRecord(det.label, confidence, bbox, det.attributes, det.feature)
            )
        noisy.append(
            FrameDetections(frame.producer_id, frame.frame_index, frame.timestamp_ms, tuple(detections))
        )
    return noisy


def write_stream(frames: list[FrameDetections], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for frame in frames:
            handle.write(serialize_frame(frame) + "\n")


# ---------------------------------------------------------------------------
# Ground truth


def enumerate_windows(
    frames: list[FrameDetections], length_ms: int, slide_ms: int
) -> list[tuple[int, int]]:
    """All aligned windows that contain at least one frame, ascending."""
    starts: set[int] = set()
    for frame in frames:
        starts.update(covering_starts(frame.timestamp_ms, length_ms, slide_ms))
    return [(start, start + length_ms) for start in sorted(starts)]


def _window_frames(frames, start: int, end: int):
    return [f for f in frames if start <= f.timestamp_ms < end]


def _occurrence_times(frames, key: KeySpec) -> list[int]:
    return [f.timestamp_ms for f in frames for det in f.detections if key.matches(det)]


def _direction_of(subject: DetectionRecord, reference: DetectionRecord) -> str | None:
    sx = subject.bbox.x_min + subject.bbox.width / 2
    sy = subject.bbox.y_min + subject.bbox.height / 2
    rx = reference.bbox.x_min + reference.bbox.width / 2
    ry = reference.bbox.y_min + reference.bbox.height / 2
    dx, dy = sx - rx, sy - ry
    if dx == 0 and dy == 0:
        return None
    if abs(dx) >= abs(dy):
        return "LEFT" if dx < 0 else "RIGHT"
    return "FRONT" if dy < 0 else "BACK"


def _compare_count(cmp: str, count: int, value: float) -> bool:
    return {
        "=": count == value,
        "!=": count != value,
        "<": count < value,
        ">": count > value,
        "<=": count <= value,
        ">=": count >= value,
    }[cmp]


def window_expected(window_frames, rule: GroundTruthRule) -> bool:
    """Evaluate one window's expectation directly on raw detections."""
    if rule.kind == "OBJECT":
        return bool(_occurrence_times(window_frames, rule.keys[0]))
    if rule.kind == "SPATIAL":
        subject_key, reference_key = rule.keys
        for frame in window_frames:
            for subject in frame.detections:
                if not subject_key.matches(subject):
                    continue
                for reference in frame.detections:
                    if reference is subject or not reference_key.matches(reference):
                        continue
                    if _direction_of(subject, reference) == rule.relation:
                        return True
        return False
    if rule.kind in ("SEQ", "EQ", "CONJ", "DISJ"):
        times = [_occurrence_times(window_frames, key) for key in rule.keys]
        if rule.kind == "DISJ":
            return any(times_k for times_k in times)
        if any(not times_k for times_k in times):
            return False
        if rule.kind == "CONJ":
            return True
        if rule.kind == "EQ":
            common = set(times[0])
            for times_k in times[1:]:
                common &= set(times_k)
            return bool(common)
        if rule.seq_onset_rule:
            onsets = [min(times_k) for times_k in times]
            return all(onsets[i] < onsets[i + 1] for i in range(len(onsets) - 1))
        last = -1
        for times_k in times:
            nxt = min((t for t in times_k if t > last), default=None)
            if nxt is None:
                return False
            last = nxt
        return True
    if rule.kind == "COUNT":
        key = rule.keys[0]
        counts = [
            sum(1 for det in frame.detections if key.matches(det)) for frame in window_frames
        ]
        if not counts:
            return False
        if rule.per_frame:
            return all(_compare_count(rule.cmp, c, rule.value) for c in counts)
        return any(_compare_count(rule.cmp, c, rule.value) for c in counts)
    raise ValueError(f"unknown ground truth kind {rule.kind!r}")


def ground_truth(
    frames: list[FrameDetections],
    query_id: str,
    rule: GroundTruthRule,
    length_ms: int,
    slide_ms: int | None = None,
) -> list[GroundTruthEvent]:
    slide = slide_ms if slide_ms is not None else length_ms
    events = []
    for start, end in enumerate_windows(frames, length_ms, slide):
        expected = window_expected(_window_frames(frames, start, end), rule)
        events.append(GroundTruthEvent(query_id, start, end, expected))
    return events


# ---------------------------------------------------------------------------
# Accuracy


def f_score(notifications, truth: list[GroundTruthEvent]) -> tuple[float, float, float]:
    """Pooled precision, recall and F over (query, window) cells.

    `notifications` may be MatchNotification objects or parsed wire dicts.
    F is the harmonic mean 2PR/(P+R), defined as 0 when P + R = 0.
    """
    predicted: set[tuple[str, int, int]] = set()
    for n in notifications:
        if isinstance(n, dict):
            predicted.add((n["query_id"], int(n["window"][0]), int(n["window"][1])))
        else:
            predicted.add((n.query_id, n.window_start_ms, n.window_end_ms))

    known = {(e.query_id, e.window_start_ms, e.window_end_ms) for e in truth}
    tp = fp = fn = 0
    for event in truth:
        key = (event.query_id, event.window_start_ms, event.window_end_ms)
        hit = key in predicted
        if event.expected and hit:
            tp += 1
        elif event.expected:
            fn += 1
        elif hit:
            fp += 1
    fp += sum(1 for key in predicted if key not in known)

    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def f_score_window_mean(notifications, truth: list[GroundTruthEvent]) -> float:
    """Mean of per-window F over windows that are expected or predicted
    (true negatives carry no F value of their own)."""
    predicted: set[tuple[str, int, int]] = set()
    for n in notifications:
        if isinstance(n, dict):
            predicted.add((n["query_id"], int(n["window"][0]), int(n["window"][1])))
        else:
            predicted.add((n.query_id, n.window_start_ms, n.window_end_ms))
    scores = []
    for event in truth:
        key = (event.query_id, event.window_start_ms, event.window_end_ms)
        hit = key in predicted
        if event.expected or hit:
            scores.append(1.0 if (event.expected and hit) else 0.0)
    return sum(scores) / len(scores) if scores else 0.0


# ---------------------------------------------------------------------------
# Measurement


def percentile(samples: list[float], q: float) -> float:
    if not samples:
        return 0.0
    ordered = sorted(samples)
    index = min(len(ordered) - 1, max(0, math.ceil(q / 100.0 * len(ordered)) - 1))
    return ordered[index]


def measure_matcher_latency(metrics: EngineMetrics, query_id: str) -> dict[str, float]:
    """Eq-style matcher latency summary: dispatch-to-notify per window."""
    samples = metrics.matcher_latency_ms(query_id)
    return {
        "mean_ms": sum(samples) / len(samples) if samples else 0.0,
        "p50_ms": percentile(samples, 50),
        "p99_ms": percentile(samples, 99),
        "windows": float(len(samples)),
    }


def measure_system_latency(
    metrics: EngineMetrics, producer_id: str, query_id: str, dnn_ms: float = 0.0
) -> float:
    """Mean per-frame representation time plus mean matcher latency. The
    detector inference term is zero for file replays; pass the adapter's
    measured per-frame milliseconds to include it."""
    pm = metrics.producers.get(producer_id)
    rep = sum(pm.rep_samples_ms) / len(pm.rep_samples_ms) if pm and pm.rep_samples_ms else 0.0
    return rep + dnn_ms + measure_matcher_latency(metrics, query_id)["mean_ms"]


def measure_throughput(metrics: EngineMetrics) -> float:
    """Frames processed per wall-clock second across all producers."""
    return metrics.throughput_fps


def measure_operator_latency(
    frames,
    operators: list[str],
    window_lengths_s: list[float],
    labels: tuple[str, ...] = ("Car", "Person", "Bike"),
    out_path: str | None = None,
) -> dict[str, dict[float, float]]:
    """Per-operator matcher latency on identical window states.

    The same stream is windowed once per length; every operator's matcher
    then consumes the identical sealed states on a single thread, timing
    each state from hand-off to notification (evaluation, scoring and sink
    serialization included). This isolates the operators' matching cost
    from pipeline scheduling jitter. Returns mean milliseconds keyed by
    operator then window length; optionally writes a CSV.
    """
    import io
    import time as _time

    from .graph import GraphBuilder
    from .matcher import evaluate_window, serialize_notification
    from .veql import compile_query, parse_veql
    from .windows import WindowAssigner, WindowConfig

    results: dict[str, dict[float, float]] = {op: {} for op in operators}
    for length_s in window_lengths_s:
        length_ms = round(length_s * 1000)
        builder = GraphBuilder(frames[0].producer_id)
        assigner = WindowAssigner(
            WindowConfig("bench", frames[0].producer_id, length_ms, length_ms)
        )
        states = []
        for frame in frames:
            states.extend(assigner.accept_graph(builder.build(frame)))
        states.extend(assigner.flush_open_windows())

        for op in operators:
            variables = [f"Object{i + 1}" for i in range(len(labels))]
            preds = " AND ".join(
                f"{var}.label='{label}'" for var, label in zip(variables, labels)
            )
            plan = compile_query(
                parse_veql(
                    f"SELECT {op}({', '.join(variables)}) FROM {frames[0].producer_id} "
                    f"WHERE {preds} WITHIN TIMEFRAME_WINDOW({length_s}) WITH_CONFIDENCE > 0.5"
                ),
                f"bench_{op}",
            )
            sink = io.StringIO()
            samples = []
            for state in states:
                handed_at = _time.perf_counter()
                notifications, _suppressed = evaluate_window(state, plan)
                for notification in notifications:
                    sink.write(serialize_notification(notification) + "\n")
                samples.append((_time.perf_counter() - handed_at) * 1000.0)
            results[op][length_s] = sum(samples) / len(samples) if samples else 0.0
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write("operator,window_s,mean_matcher_latency_ms\n")
            for op, per_length in results.items():
                for length_s, mean_ms in per_length.items():
                    handle.write(f"{op},{length_s:g},{mean_ms:.4f}\n")
    return results


# ---------------------------------------------------------------------------
# Benchmark runs


@dataclass
class BenchSpec:
    stream: StreamSpec
    queries: list[BenchQuery]
    noise: NoiseSpec = field(default_factory=NoiseSpec)


def _window_config_of(veql_text: str) -> tuple[int, int]:
    from .veql import parse_veql

    spec = parse_veql(veql_text).window
    return spec.length_ms, spec.slide_ms


def run_benchmark(bench: BenchSpec, out_dir: str, seed: int) -> dict:
    """Generate, run and score one benchmark; writes the artifact files and
    returns the per-query summary."""
    os.makedirs(out_dir, exist_ok=True)
    clean = generate_stream(bench.stream, seed)
    streamed = apply_noise(clean, bench.noise, seed) if bench.noise.enabled else clean

    stream_path = os.path.join(out_dir, "stream.jsonl")
    write_stream(streamed, stream_path)

    truth: list[GroundTruthEvent] = []
    for query in bench.queries:
        length_ms, slide_ms = _window_config_of(query.veql)
        truth.extend(ground_truth(clean, query.query_id, query.gt, length_ms, slide_ms))
    truth_path = os.path.join(out_dir, "ground_truth.csv")
    with open(truth_path, "w", encoding="utf-8") as handle:
        handle.write("query_id,window_start_ms,window_end_ms,expected\n")
        for event in truth:
            handle.write(
                f"{event.query_id},{event.window_start_ms},{event.window_end_ms},"
                f"{int(event.expected)}\n"
            )

    notifications_path = os.path.join(out_dir, "notifications.jsonl")
    config = EngineConfig(
        producers={bench.stream.producer_id: stream_path},
        queries={q.query_id: q.veql for q in bench.queries},
        sink_path=notifications_path,
        tracking=TrackingParams(),
        metrics_path=os.path.join(out_dir, "engine_metrics.json"),
        latency_csv_path=os.path.join(out_dir, "latency_samples.csv"),
    )
    engine = Engine(config)
    metrics = engine.run()

    with open(notifications_path, "r", encoding="utf-8") as handle:
        notifications = [json.loads(line) for line in handle if line.strip()]

    summary: dict = {"queries": {}, "throughput_fps": measure_throughput(metrics)}
    rows = []
    for query in bench.queries:
        q_notes = [n for n in notifications if n["query_id"] == query.query_id]
        q_truth = [e for e in truth if e.query_id == query.query_id]
        precision, recall, f_pooled = f_score(q_notes, q_truth)
        f_mean = f_score_window_mean(q_notes, q_truth)
        latency = measure_matcher_latency(metrics, query.query_id)
        system_ms = measure_system_latency(metrics, bench.stream.producer_id, query.query_id)
        summary["queries"][query.query_id] = {
            "precision": precision,
            "recall": recall,
            "f_pooled": f_pooled,
            "f_window_mean": f_mean,
            "matcher_latency": latency,
            "system_latency_ms": system_ms,
        }
        rows.append(
            [
                query.query_id,
                len(q_truth),
                sum(e.expected for e in q_truth),
                f"{precision:.6f}",
                f"{recall:.6f}",
                f"{f_pooled:.6f}",
                f"{f_mean:.6f}",
                f"{latency['mean_ms']:.4f}",
                f"{latency['p50_ms']:.4f}",
                f"{latency['p99_ms']:.4f}",
                f"{system_ms:.4f}",
                f"{metrics.throughput_fps:.2f}",
            ]
        )
    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8") as handle:
        handle.write(
            "query_id,windows,expected_true,precision,recall,f_pooled,f_window_mean,"
            "matcher_latency_mean_ms,matcher_latency_p50_ms,matcher_latency_p99_ms,"
            "system_latency_ms,throughput_fps\n"
        )
        for row in rows:
            handle.write(",".join(str(cell) for cell in row) + "\n")
    summary["notifications"] = notifications
    summary["truth"] = truth
    summary["metrics"] = metrics
    return summary


def sweep_throughput(
    stream: StreamSpec, producer_counts: list[int], out_dir: str, seed: int
) -> list[dict]:
    """Run the engine over N parallel synthetic producers for each N and
    report aggregate throughput; writes throughput.csv."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for n in producer_counts:
        producers = {}
        queries = {}
        for i in range(n):
            pid = f"P{i + 1}"
            per = StreamSpec(
                producer_id=pid,
                fps=stream.fps,
                duration_s=stream.duration_s,
                background_count=stream.background_count,
                background_labels=dict(stream.background_labels),
                motion_px_per_frame=stream.motion_px_per_frame,
                frame_size=stream.frame_size,
                script=list(stream.script),
            )
            path = os.path.join(out_dir, f"sweep_{n}_{pid}.jsonl")
            write_stream(generate_stream(per, seed + i), path)
            producers[pid] = path
            queries[f"q_{pid}"] = (
                f"SELECT Object FROM {pid} WHERE Object.label='Car' "
                "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5"
            )
        config = EngineConfig(
            producers=producers,
            queries=queries,
            sink_path=os.path.join(out_dir, f"sweep_{n}_notifications.jsonl"),
        )
        metrics = Engine(config).run()
        rows.append(
            {
                "producers": n,
                "frames": metrics.frames_total,
                "wall_s": metrics.wall_s,
                "throughput_fps": metrics.throughput_fps,
            }
        )
    with open(os.path.join(out_dir, "throughput.csv"), "w", encoding="utf-8") as handle:
        handle.write("producers,frames,wall_s,throughput_fps\n")
        for row in rows:
            handle.write(
                f"{row['producers']},{row['frames']},{row['wall_s']:.4f},"
                f"{row['throughput_fps']:.2f}\n"
            )
    return rows


# ---------------------------------------------------------------------------
# Spec files (CLI)


def load_bench_spec(path: str) -> tuple[BenchSpec, list[int] | None]:
    """Load a JSON benchmark spec; returns (spec, sweep counts or None)."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    stream_raw = raw.get("stream", {})
    script = [
        ScriptEntry(
            kind=e["kind"],
            start_s=e["start_s"],
            end_s=e["end_s"],
            label=e.get("label", "Car"),
            attributes=e.get("attributes", {}),
            confidence=e.get("confidence", 0.9),
            reference_label=e.get("reference_label", "Car"),
            reference_attributes=e.get("reference_attributes", {}),
            count=e.get("count", 6),
        )
        for e in stream_raw.get("script", [])
    ]
    stream = StreamSpec(
        producer_id=stream_raw.get("producer_id", "Camera"),
        fps=stream_raw.get("fps", 30.0),
        duration_s=stream_raw.get("duration_s", 20.0),
        background_count=tuple(stream_raw.get("background_count", (0, 0))),
        background_labels=stream_raw.get("background_labels", {"Tree": 1.0}),
        motion_px_per_frame=stream_raw.get("motion_px_per_frame", 2.0),
        frame_size=tuple(stream_raw.get("frame_size", (1280, 720))),
        script=script,
    )
    queries = [
        BenchQuery(
            query_id=q["id"],
            veql=q["veql"],
            gt=GroundTruthRule(
                kind=q["gt"]["kind"],
                keys=[
                    KeySpec(k["label"], k.get("attributes", {})) for k in q["gt"].get("keys", [])
                ],
                relation=q["gt"].get("relation", "LEFT"),
                cmp=q["gt"].get("cmp", ">"),
                value=q["gt"].get("value", 5.0),
                per_frame=q["gt"].get("per_frame", True),
                seq_onset_rule=q["gt"].get("seq_onset_rule", False),
            ),
        )
        for q in raw.get("queries", [])
    ]
    noise_raw = raw.get("noise", {})
    noise = NoiseSpec(
        label_dropout=noise_raw.get("label_dropout", 0.0),
        confidence_jitter=noise_raw.get("confidence_jitter", 0.0),
        bbox_jitter_px=noise_raw.get("bbox_jitter_px", 0.0),
    )
    sweep = raw.get("sweep_producers")
    return BenchSpec(stream=stream, queries=queries, noise=noise), sweep

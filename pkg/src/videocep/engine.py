"""Pipeline orchestration: readers, graph builders, window assigners,
matchers and the notification sink.

Stage layout (one arrow = one bounded queue):

    reader (per producer) -> builder (per producer) -> matcher (per query)

The reader parses and order-validates wire lines; the builder constructs
graphs sequentially (tracking needs the previous frame) and feeds every
window assigner registered for its producer; sealed window states cross to
the per-query single-threaded matchers over bounded queues, so a slow
matcher backpressures its producer instead of growing memory. Matchers
share one serialized sink writer. All cross-thread transfer is by
ownership; the only shared mutable state is the metrics object, which
locks internally.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import os
import queue
import sys
import threading
import time
from dataclasses import dataclass, field

from .errors import EngineError, RegistrationError, SinkError, StartupError, WireParseError, WireSchemaError
from .graph import GraphBuilder, TrackingParams
from .ingest import (
    FrameDetections,
    SequenceValidator,
    iter_file_lines,
    iter_socket_lines,
    parse_detection_line,
)
from .matcher import evaluate_window, serialize_notification
from .temporal import DEFAULT_COMBINATION_CAP
from .veql import QueryPlan, compile_query, parse_veql
from .windows import WindowAssigner, WindowConfig, WindowState

log = logging.getLogger("videocep.engine")

_SENTINEL = object()


@dataclass
class EngineConfig:
    producers: dict[str, str] = field(default_factory=dict)  # id -> path or tcp://host:port
    queries: dict[str, str] = field(default_factory=dict)  # id -> VEQL text
    sink_path: str | None = None  # None or '-' writes to stdout
    tracking: TrackingParams = field(default_factory=TrackingParams)
    matcher_queue_capacity: int = 16
    producer_queue_capacity: int = 64
    combination_cap: int = DEFAULT_COMBINATION_CAP
    metrics_path: str | None = None
    latency_csv_path: str | None = None
    state_dump_path: str | None = None


@dataclass
class ProducerMetrics:
    frames_ingested: int = 0
    frames_dropped: int = 0
    parse_errors: int = 0
    parse_samples_ms: list[float] = field(default_factory=list)
    build_samples_ms: list[float] = field(default_factory=list)
    rep_samples_ms: list[float] = field(default_factory=list)


@dataclass
class QueryMetrics:
    notifications_emitted: int = 0
    notifications_suppressed: int = 0
    states_dispatched: int = 0
    states_dropped: int = 0
    truncated_windows: int = 0
    latency_samples: list[tuple[int, int, float]] = field(default_factory=list)


class EngineMetrics:
    """Monotonic counters and samples for one run; thread-safe."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.producers: dict[str, ProducerMetrics] = {}
        self.queries: dict[str, QueryMetrics] = {}
        self.wall_s: float = 0.0
        self.interrupted: bool = False

    def producer(self, producer_id: str) -> ProducerMetrics:
        with self._lock:
            return self.producers.setdefault(producer_id, ProducerMetrics())

    def query(self, query_id: str) -> QueryMetrics:
        with self._lock:
            return self.queries.setdefault(query_id, QueryMetrics())

    @property
    def frames_total(self) -> int:
        return sum(p.frames_ingested for p in self.producers.values())

    @property
    def throughput_fps(self) -> float:
        return self.frames_total / self.wall_s if self.wall_s > 0 else 0.0

    def matcher_latency_ms(self, query_id: str) -> list[float]:
        return [ms for _s, _e, ms in self.queries[query_id].latency_samples]

    def to_summary(self) -> dict:
        return {
            "wall_s": self.wall_s,
            "frames_total": self.frames_total,
            "throughput_fps": self.throughput_fps,
            "interrupted": self.interrupted,
            "producers": {
                pid: {
                    "frames_ingested": p.frames_ingested,
                    "frames_dropped": p.frames_dropped,
                    "parse_errors": p.parse_errors,
                    "mean_rep_ms": (
                        sum(p.rep_samples_ms) / len(p.rep_samples_ms)
                        if p.rep_samples_ms
                        else 0.0
                    ),
                }
                for pid, p in self.producers.items()
            },
            "queries": {
                qid: {
                    "notifications_emitted": q.notifications_emitted,
                    "notifications_suppressed": q.notifications_suppressed,
                    "states_dispatched": q.states_dispatched,
                    "states_dropped": q.states_dropped,
                    "truncated_windows": q.truncated_windows,
                    "mean_matcher_latency_ms": (
                        sum(ms for _s, _e, ms in q.latency_samples) / len(q.latency_samples)
                        if q.latency_samples
                        else 0.0
                    ),
                }
                for qid, q in self.queries.items()
            },
        }


class NotificationSink:
    """Line sink shared by all matchers. Writes are serialized so lines
    from concurrent matchers never interleave; output is buffered and
    flushed once per processed window (and on close) to keep per-line
    syscall cost out of pattern-heavy windows."""

    def __init__(self, path: str | None):
        self._lock = threading.Lock()
        if path is None or path == "-":
            self._handle = sys.stdout
            self._owned = False
        else:
            self._handle = open(path, "w", encoding="utf-8")
            self._owned = True

    def emit(self, line: str) -> None:
        with self._lock:
            try:
                self._handle.write(line + "\n")
            except OSError as exc:
                raise SinkError(f"sink write failed: {exc}") from exc

    def flush(self) -> None:
        with self._lock:
            try:
                self._handle.flush()
            except OSError as exc:
                raise SinkError(f"sink flush failed: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            self._handle.flush()
            if self._owned:
                self._handle.close()


class _QueryRuntime:
    def __init__(self, query_id: str, plan: QueryPlan, queue_capacity: int):
        self.query_id = query_id
        self.plan = plan
        self.assigner = WindowAssigner(
            WindowConfig(
                query_id=query_id,
                producer_id=plan.producer,
                length_ms=plan.window.length_ms,
                slide_ms=plan.window.slide_ms,
            )
        )
        self.state_queue: queue.Queue = queue.Queue(maxsize=queue_capacity)
        self.thread: threading.Thread | None = None


class Engine:
    """Owns the query registry and drives one run of the pipeline."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.metrics = EngineMetrics()
        self._queries: dict[str, _QueryRuntime] = {}
        self._shutdown = threading.Event()
        self._abort_error: EngineError | None = None
        self._sink: NotificationSink | None = None
        self._state_dump_lock = threading.Lock()
        for query_id, text in config.queries.items():
            self.register_query(query_id, text)

    # -- registry -----------------------------------------------------------

    def register_query(self, query_id: str, veql_text: str) -> QueryPlan:
        """Parse, compile and install a query; one assigner and one matcher
        instance are created for it."""
        if query_id in self._queries:
            raise RegistrationError(f"duplicate query id {query_id!r}")
        ast = parse_veql(veql_text)
        plan = compile_query(ast, query_id)
        if plan.producer not in self.config.producers:
            raise StartupError(
                f"query {query_id!r} reads FROM {plan.producer!r}, "
                "which is not a configured producer"
            )
        for warning in plan.warnings:
            log.warning("query %s: %s", query_id, warning)
        self._queries[query_id] = _QueryRuntime(
            query_id, plan, self.config.matcher_queue_capacity
        )
        return plan

    @property
    def plans(self) -> dict[str, QueryPlan]:
        return {qid: runtime.plan for qid, runtime in self._queries.items()}

    # -- pipeline stages ----------------------------------------------------

    def _source_lines(self, source: str):
        if source.startswith("tcp://"):
            host, _, port = source[len("tcp://") :].partition(":")
            return iter_socket_lines(host, int(port))
        return iter_file_lines(source)

    def _reader(self, producer_id: str, source: str, frame_queue: queue.Queue) -> None:
        pm = self.metrics.producer(producer_id)
        validator = SequenceValidator()
        try:
            for line in self._source_lines(source):
                if self._shutdown.is_set():
                    break
                t0 = time.perf_counter()
                try:
                    frame = parse_detection_line(line)
                except (WireParseError, WireSchemaError) as exc:
                    pm.parse_errors += 1
                    log.warning("producer %s: dropped line: %s", producer_id, exc)
                    continue
                parse_ms = (time.perf_counter() - t0) * 1000.0
                if frame.producer_id != producer_id:
                    pm.parse_errors += 1
                    log.warning(
                        "producer %s: line claims producer_id %r, dropped",
                        producer_id,
                        frame.producer_id,
                    )
                    continue
                if validator.accept(frame) is None:
                    pm.frames_dropped += 1
                    continue
                pm.frames_ingested += 1
                pm.parse_samples_ms.append(parse_ms)
                self._put(frame_queue, (frame, parse_ms))
        except OSError as exc:
            self._abort(SinkError(f"producer {producer_id} source failed: {exc}"))
        finally:
            frame_queue.put(_SENTINEL)

    def _builder(
        self, producer_id: str, frame_queue: queue.Queue, runtimes: list[_QueryRuntime]
    ) -> None:
        pm = self.metrics.producer(producer_id)
        builder = GraphBuilder(producer_id, self.config.tracking)
        while True:
            item = frame_queue.get()
            if item is _SENTINEL:
                break
            frame, parse_ms = item
            if self._shutdown.is_set():
                continue
            t0 = time.perf_counter()
            graph = builder.build(frame)
            build_ms = (time.perf_counter() - t0) * 1000.0
            pm.build_samples_ms.append(build_ms)
            pm.rep_samples_ms.append(parse_ms + build_ms)
            for runtime in runtimes:
                fanned = graph.detached_copy() if len(runtimes) > 1 else graph
                for state in runtime.assigner.accept_graph(fanned):
                    self._dispatch(state, runtime)
        if not self._shutdown.is_set():
            for runtime in runtimes:
                for state in runtime.assigner.flush_open_windows():
                    self._dispatch(state, runtime)
        for runtime in runtimes:
            runtime.state_queue.put(_SENTINEL)

    def _dispatch(self, state: WindowState, runtime: _QueryRuntime) -> None:
        """Enqueue a sealed state; blocks when the matcher queue is full
        (backpressure), aborting if the engine shuts down meanwhile."""
        qm = self.metrics.query(runtime.query_id)
        while not self._shutdown.is_set():
            try:
                runtime.state_queue.put(state, timeout=0.05)
            except queue.Full:
                continue
            qm.states_dispatched += 1
            if self.config.state_dump_path:
                self._dump_state(state)
            return
        qm.states_dropped += 1

    def _dump_state(self, state: WindowState) -> None:
        record = json.dumps(
            {
                "query_id": state.query_id,
                "window": [state.window_start_ms, state.window_end_ms],
                "graphs": len(state.graphs),
            }
        )
        with self._state_dump_lock:
            with open(self.config.state_dump_path, "a", encoding="utf-8") as handle:
                handle.write(record + "\n")

    def _matcher(self, runtime: _QueryRuntime) -> None:
        # A state held in the queue is the state manager buffering while this
        # matcher is busy; it counts as "sent" once the matcher takes it, so
        # the latency span runs from dequeue to notification.
        qm = self.metrics.query(runtime.query_id)
        while True:
            item = runtime.state_queue.get()
            if item is _SENTINEL:
                break
            state = item
            sent_at = time.perf_counter()
            if self._shutdown.is_set():
                continue
            notifications, suppressed = evaluate_window(
                state, runtime.plan, self.config.combination_cap
            )
            try:
                assert self._sink is not None
                for notification in notifications:
                    self._sink.emit(serialize_notification(notification))
                self._sink.flush()
            except SinkError as exc:
                self._abort(exc)
                continue
            notified_at = time.perf_counter()
            qm.latency_samples.append(
                (
                    state.window_start_ms,
                    state.window_end_ms,
                    (notified_at - sent_at) * 1000.0,
                )
            )
            qm.notifications_emitted += len(notifications)
            qm.notifications_suppressed += suppressed
            if any(n.truncated for n in notifications):
                qm.truncated_windows += 1

    def _abort(self, error: EngineError) -> None:
        if self._abort_error is None:
            self._abort_error = error
        self._shutdown.set()

    def shutdown(self) -> None:
        """Request a graceful stop; the current run still flushes metrics
        and closes the sink."""
        self.metrics.interrupted = True
        self._shutdown.set()

    # -- run ----------------------------------------------------------------

    def _validate_sources(self) -> None:
        if not self.config.producers:
            raise StartupError("no producers configured")
        if not self._queries:
            raise StartupError("no queries registered")
        for producer_id, source in self.config.producers.items():
            if not source.startswith("tcp://") and not os.path.exists(source):
                raise StartupError(f"producer {producer_id!r}: unreadable source {source!r}")

    def run(self) -> EngineMetrics:
        """Consume all sources to EOF (or until shutdown), drain all queued
        states, then write metrics. Raises the abort error, if any, after
        metrics are flushed."""
        self._validate_sources()
        self._sink = NotificationSink(self.config.sink_path)
        started = time.perf_counter()

        by_producer: dict[str, list[_QueryRuntime]] = {p: [] for p in self.config.producers}
        for runtime in self._queries.values():
            by_producer[runtime.plan.producer].append(runtime)
            self.metrics.query(runtime.query_id)

        threads: list[threading.Thread] = []
        for runtime in self._queries.values():
            thread = threading.Thread(
                target=self._matcher, args=(runtime,), name=f"matcher-{runtime.query_id}"
            )
            runtime.thread = thread
            threads.append(thread)
        for producer_id, source in self.config.producers.items():
            frame_queue: queue.Queue = queue.Queue(maxsize=self.config.producer_queue_capacity)
            threads.append(
                threading.Thread(
                    target=self._builder,
                    args=(producer_id, frame_queue, by_producer[producer_id]),
                    name=f"builder-{producer_id}",
                )
            )
            threads.append(
                threading.Thread(
                    target=self._reader,
                    args=(producer_id, source, frame_queue),
                    name=f"reader-{producer_id}",
                )
            )

        for thread in threads:
            thread.start()
        try:
            for thread in threads:
                thread.join()
        except KeyboardInterrupt:
            self.shutdown()
            for thread in threads:
                thread.join()

        self.metrics.wall_s = time.perf_counter() - started
        self._write_reports()
        self._sink.close()
        if self._abort_error is not None:
            raise self._abort_error
        return self.metrics

    def _write_reports(self) -> None:
        if self.config.metrics_path:
            with open(self.config.metrics_path, "w", encoding="utf-8") as handle:
                json.dump(self.metrics.to_summary(), handle, indent=2)
                handle.write("\n")
        if self.config.latency_csv_path:
            with open(self.config.latency_csv_path, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(["query_id", "window_start_ms", "window_end_ms", "latency_ms"])
                for query_id, qm in self.metrics.queries.items():
                    for start, end, ms in qm.latency_samples:
                        writer.writerow([query_id, start, end, f"{ms:.4f}"])

    def _put(self, target: queue.Queue, item) -> None:
        while not self._shutdown.is_set():
            try:
                target.put(item, timeout=0.05)
                return
            except queue.Full:
                continue


def load_config(path: str) -> EngineConfig:
    """Load the INI-style engine configuration.

    Sections: [producers] id = source, [queries] id = veql-file,
    [engine] tuning knobs. Relative paths resolve against the config file.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # producer and query ids are case-sensitive
    read = parser.read(path)
    if not read:
        raise StartupError(f"cannot read config file {path!r}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(value: str) -> str:
        if value.startswith("tcp://") or value == "-":
            return value
        return value if os.path.isabs(value) else os.path.join(base, value)

    config = EngineConfig()
    if parser.has_section("producers"):
        for producer_id, source in parser.items("producers"):
            config.producers[producer_id] = resolve(source)
    if parser.has_section("queries"):
        for query_id, query_path in parser.items("queries"):
            resolved = resolve(query_path)
            try:
                with open(resolved, "r", encoding="utf-8") as handle:
                    config.queries[query_id] = handle.read()
            except OSError as exc:
                raise StartupError(f"query {query_id!r}: cannot read {resolved!r}: {exc}")
    if parser.has_section("engine"):
        section = parser["engine"]
        if "output" in section:
            value = section["output"]
            config.sink_path = value if value == "-" else resolve(value)
        for key in ("metrics", "latency_csv", "state_dump"):
            if key in section:
                setattr(config, f"{key}_path", resolve(section[key]))
        config.tracking = TrackingParams(
            iou_threshold=section.getfloat("iou_threshold", 0.3),
            cosine_sim_threshold=section.getfloat("cosine_threshold", 0.7),
        )
        config.matcher_queue_capacity = section.getint("queue_capacity", 16)
        config.producer_queue_capacity = section.getint("producer_queue_capacity", 64)
        config.combination_cap = section.getint("combination_cap", DEFAULT_COMBINATION_CAP)
    return config

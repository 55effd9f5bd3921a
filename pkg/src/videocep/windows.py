"""Event-time windows over graph streams.

Windows are derived from frame timestamps, never wall-clock arrival, so a
replayed file always yields identical window contents. Intervals are
half-open [start, end) and aligned to multiples of the slide from epoch 0;
a tumbling window is a sliding window whose slide equals its length.
Windows are opened lazily when a frame lands in them and sealed once a
frame at or past their end arrives (or at end of stream via flush), so a
sealed window always holds at least one graph.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .graph import VEKGGraph


@dataclass(frozen=True)
class WindowConfig:
    query_id: str
    producer_id: str
    length_ms: int
    slide_ms: int

    def __post_init__(self) -> None:
        if self.length_ms <= 0:
            raise ValueError("window length must be positive")
        if not 0 < self.slide_ms <= self.length_ms:
            raise ValueError("window slide must be in (0, length]")


@dataclass(frozen=True)
class WindowState:
    """The sealed subsequence of graphs handed to a matcher as one unit."""

    query_id: str
    producer_id: str
    window_start_ms: int
    window_end_ms: int
    graphs: tuple[VEKGGraph, ...]
    sealed_at: float = field(default=0.0, compare=False)


def covering_starts(timestamp_ms: int, length_ms: int, slide_ms: int) -> list[int]:
    """All aligned, non-negative window starts whose interval contains the
    timestamp, ascending."""
    anchor = (timestamp_ms // slide_ms) * slide_ms
    starts = []
    start = anchor
    while start + length_ms > timestamp_ms:
        if start >= 0:
            starts.append(start)
        start -= slide_ms
        if start < 0 and not starts:
            break
    starts.reverse()
    return starts


class WindowAssigner:
    """Buffers one producer's graphs into the windows of one query."""

    def __init__(self, config: WindowConfig):
        self.config = config
        self._open: dict[int, list[VEKGGraph]] = {}

    def accept_graph(self, graph: VEKGGraph) -> list[WindowState]:
        """Append the graph to every open window covering its timestamp and
        return (in start order) any windows sealed by its arrival."""
        ts = graph.timestamp_ms
        sealed = [
            start
            for start in self._open
            if start + self.config.length_ms <= ts
        ]
        states = [self._seal(start) for start in sorted(sealed)]
        for start in covering_starts(ts, self.config.length_ms, self.config.slide_ms):
            self._open.setdefault(start, []).append(graph)
        return states

    def flush_open_windows(self) -> list[WindowState]:
        """Seal all remaining windows as-is (end of stream)."""
        return [self._seal(start) for start in sorted(self._open)]

    def _seal(self, start: int) -> WindowState:
        graphs = self._open.pop(start)
        return WindowState(
            query_id=self.config.query_id,
            producer_id=self.config.producer_id,
            window_start_ms=start,
            window_end_ms=start + self.config.length_ms,
            graphs=tuple(graphs),
            sealed_at=time.time(),
        )

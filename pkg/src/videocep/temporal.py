"""Temporal pattern operators over per-key event occurrence lists.

Within one window the matcher groups object events into a map keyed by
query node; these four operators combine the per-key occurrence lists:

* SEQ  — every combination with strictly increasing timestamps in key
  order (skip-till-any: combinations need not be contiguous). Bounded by
  a combination cap because the enumeration grows exponentially with the
  number of keys.
* EQ   — every combination whose timestamps are all equal (the same-frame
  operator: events in one frame share the frame's timestamp).
* CONJ — every combination regardless of order (cartesian product).
* DISJ — one match per individual occurrence of any key.

Timestamps compare at millisecond resolution, so two same-frame events can
never form a SEQ pair. All operators are deterministic: occurrences are
taken in list order (callers keep lists sorted by timestamp, then frame).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Protocol, Sequence

if TYPE_CHECKING:
    from .graph import ObjectNode

DEFAULT_COMBINATION_CAP = 10_000


class TimedEvent(Protocol):
    timestamp_ms: int
    frame_index: int


@dataclass(frozen=True)
class EventOccurrence:
    """One appearance of a query object node in a frame."""

    key: str
    node: "ObjectNode"
    timestamp_ms: int
    frame_index: int


@dataclass(frozen=True)
class TemporalMatch:
    operator: str
    bound_events: tuple


EventMap = Mapping[str, Sequence[TimedEvent]]


def _lists(event_map: EventMap, keys: Sequence[str]) -> list[Sequence[TimedEvent]]:
    return [event_map.get(key, ()) for key in keys]


def eval_seq(
    event_map: EventMap,
    key_order: Sequence[str],
    combination_cap: int = DEFAULT_COMBINATION_CAP,
) -> tuple[list[TemporalMatch], bool]:
    """All strictly-increasing combinations, capped.

    Skip-till-any by direct recursive search: at each level every remaining
    occurrence later than the bound prefix extends one partial combination.
    This is inherently the expensive operator (the candidate space is the
    full cross product); the cap bounds the enumeration. Returns
    (matches, truncated); truncated is set only when more matches exist
    beyond the cap.
    """
    lists = _lists(event_map, key_order)
    if not lists or any(not lst for lst in lists):
        return [], False
    matches: list[TemporalMatch] = []
    truncated = False
    last = len(lists) - 1

    def extend(depth: int, min_ts_exclusive: float, bound: list) -> None:
        nonlocal truncated
        for event in lists[depth]:
            if truncated:
                return
            if event.timestamp_ms <= min_ts_exclusive:
                continue
            if depth == last:
                if len(matches) >= combination_cap:
                    truncated = True
                    return
                matches.append(TemporalMatch("SEQ", (*bound, event)))
            else:
                extend(depth + 1, event.timestamp_ms, bound + [event])

    extend(0, float("-inf"), [])
    return matches, truncated


def eval_eq(event_map: EventMap, keys: Sequence[str]) -> list[TemporalMatch]:
    """All combinations whose timestamps are pairwise equal across keys."""
    lists = _lists(event_map, keys)
    if not lists or any(not lst for lst in lists):
        return []
    grouped: list[dict[int, list[TimedEvent]]] = []
    for lst in lists:
        by_ts: dict[int, list[TimedEvent]] = {}
        for event in lst:
            by_ts.setdefault(event.timestamp_ms, []).append(event)
        grouped.append(by_ts)
    common = set(grouped[0])
    for by_ts in grouped[1:]:
        common &= set(by_ts)
    matches = []
    for ts in sorted(common):
        for combo in itertools.product(*(by_ts[ts] for by_ts in grouped)):
            matches.append(TemporalMatch("EQ", combo))
    return matches


def eval_conj(event_map: EventMap, keys: Sequence[str]) -> list[TemporalMatch]:
    """One match per combination across keys, order-free."""
    lists = _lists(event_map, keys)
    if not lists or any(not lst for lst in lists):
        return []
    return [TemporalMatch("CONJ", combo) for combo in itertools.product(*lists)]


def eval_disj(event_map: EventMap, keys: Sequence[str]) -> list[TemporalMatch]:
    """One match per individual occurrence of any key."""
    matches = []
    for key in keys:
        for event in event_map.get(key, ()):
            matches.append(TemporalMatch("DISJ", (event,)))
    return matches

"""Query execution against one sealed window state.

Matching runs in three stages. Object event matching turns every graph
node that satisfies a query object node's constraints into an ObjectEvent.
Spatial matching pairs subject/reference events frame by frame, evaluates
the boolean spatial function and records the edge weight on the state's
private graph copy. Temporal matching groups events into a per-key map and
delegates to the temporal operators. Count plans quantify a per-frame
object count over the window instead.

Every match is scored with the entropy-weighted mean of its bound events'
detection probabilities,

    M = sum(P_i * -log2(P_i)) / sum(-log2(P_i)),

so low-confidence detections carry more weight in the mean, pulling the
score toward the least certain evidence. Probabilities are clamped to
[1e-6, 1 - 1e-6] first: an all-certain event set would otherwise hit 0/0
(clamped, it approaches 1 from below). Matches below the query threshold
are suppressed and counted, never emitted.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

from .graph import VEKGGraph
from .temporal import (
    DEFAULT_COMBINATION_CAP,
    TemporalMatch,
    eval_disj,
    eval_eq,
    eval_seq,
)
from .veql import QueryPlan, compare_values
from .windows import WindowState

PROBABILITY_CLAMP = 1e-6


@dataclass(frozen=True)
class ObjectEvent:
    """A query object node occurrence: a graph node bound to a plan key."""

    key: str
    node_id: int
    label: str
    probability: float
    frame_index: int
    timestamp_ms: int


@dataclass(frozen=True)
class MatchNotification:
    query_id: str
    producer_id: str
    window_start_ms: int
    window_end_ms: int
    pattern_kind: str
    bound_events: tuple[ObjectEvent, ...]
    confidence: float
    truncated: bool = False
    emitted_at: float = field(default=0.0, compare=False)


def confidence_score(probabilities) -> float:
    """Entropy-weighted mean of detection probabilities (see module doc)."""
    probs = [
        min(max(float(p), PROBABILITY_CLAMP), 1.0 - PROBABILITY_CLAMP)
        for p in probabilities
    ]
    if not probs:
        raise ValueError("confidence_score needs at least one probability")
    weights = [-math.log2(p) for p in probs]
    numerator = sum(p * w for p, w in zip(probs, weights))
    return numerator / sum(weights)


def match_objects(
    state: WindowState, plan: QueryPlan
) -> dict[str, list[tuple[VEKGGraph, ObjectEvent]]]:
    """Object event matching: every node satisfying a plan object node
    becomes an event, grouped per key in (frame, node) order."""
    events: dict[str, list[tuple[VEKGGraph, ObjectEvent]]] = {
        node.key: [] for node in plan.object_nodes
    }
    for graph in state.graphs:
        for qnode in plan.object_nodes:
            for node in graph.nodes:
                # label equality is a necessary condition whenever the plan
                # node pins a label; cheap prefilter before the full check
                if qnode.label is not None and node.label != qnode.label:
                    continue
                if qnode.matches(node):
                    events[qnode.key].append(
                        (
                            graph,
                            ObjectEvent(
                                key=qnode.key,
                                node_id=node.id,
                                label=node.label,
                                probability=node.confidence,
                                frame_index=node.frame_index,
                                timestamp_ms=node.timestamp_ms,
                            ),
                        )
                    )
    return events


def match_spatial(
    events: dict[str, list[tuple[VEKGGraph, ObjectEvent]]], plan: QueryPlan
) -> list[tuple[ObjectEvent, ObjectEvent]]:
    """Spatial event matching: per frame, every subject/reference event pair
    for which the relation holds. Updates the spatial edge weight on the
    frame's graph copy as a side effect."""
    step = plan.spatial_step
    assert step is not None
    subjects = events.get(step.subject_key, [])
    references = events.get(step.reference_key, [])
    refs_by_frame: dict[int, list[tuple[VEKGGraph, ObjectEvent]]] = {}
    for graph, event in references:
        refs_by_frame.setdefault(event.frame_index, []).append((graph, event))

    matches = []
    for graph, subject in subjects:
        for _ref_graph, reference in refs_by_frame.get(subject.frame_index, ()):
            if subject.node_id == reference.node_id:
                continue
            edge = graph.resolve_spatial_edge(
                step.relation, subject.node_id, reference.node_id
            )
            if edge.weight == 1.0:
                matches.append((subject, reference))
    return matches


def match_temporal(
    events: dict[str, list[tuple[VEKGGraph, ObjectEvent]]],
    plan: QueryPlan,
    combination_cap: int = DEFAULT_COMBINATION_CAP,
) -> tuple[list[TemporalMatch], bool]:
    """Temporal event matching: build the per-key event map and evaluate
    the step's operator over it.

    SEQ enumerates every combination (skip-till-any, capped), EQ every
    same-timestamp combination and DISJ every single occurrence. CONJ is a
    presence pattern: all keys occurring anywhere in the window constitute
    one match, bound to each key's earliest occurrence, so its cost does
    not grow with the occurrence cross product the way SEQ's does.

    Matches binding one node id to two keys are discarded (a pattern pairs
    distinct objects, never an object with itself)."""
    step = plan.temporal_step
    assert step is not None
    event_map = {
        key: [event for _graph, event in events.get(key, [])] for key in step.key_order
    }
    truncated = False
    if step.operator == "SEQ":
        matches, truncated = eval_seq(event_map, step.key_order, combination_cap)
    elif step.operator == "EQ":
        matches = eval_eq(event_map, step.key_order)
    elif step.operator == "CONJ":
        matches = _conj_presence(event_map, step.key_order)
    else:
        matches = eval_disj(event_map, step.key_order)

    kept = []
    for match in matches:
        ids = [event.node_id for event in match.bound_events]
        if len(set(ids)) == len(ids):
            kept.append(match)
    return kept, truncated


def _conj_presence(event_map, key_order) -> list[TemporalMatch]:
    """One CONJ match when every key occurred, irrespective of order. Binds
    each key's earliest occurrence whose node is not already bound."""
    bound: list[ObjectEvent] = []
    used: set[int] = set()
    for key in key_order:
        chosen = next(
            (e for e in event_map.get(key, ()) if e.node_id not in used), None
        )
        if chosen is None:
            return []
        bound.append(chosen)
        used.add(chosen.node_id)
    return [TemporalMatch("CONJ", tuple(bound))]


def match_count(
    state: WindowState, plan: QueryPlan
) -> tuple[VEKGGraph, list[ObjectEvent]] | None:
    """Count matching: universal (FOR EACH FRAME) requires every graph in
    the window to satisfy the count predicate, existential requires one.
    Returns the representative frame and its matching nodes: the minimum
    count frame under the universal quantifier, the first satisfying frame
    under the existential one."""
    step = plan.count_step
    assert step is not None
    if not state.graphs:
        return None
    qnode = plan.node_for(step.key)

    counted: list[tuple[VEKGGraph, list[ObjectEvent]]] = []
    for graph in state.graphs:
        matching = [
            ObjectEvent(
                key=qnode.key,
                node_id=node.id,
                label=node.label,
                probability=node.confidence,
                frame_index=node.frame_index,
                timestamp_ms=node.timestamp_ms,
            )
            for node in graph.nodes
            if (qnode.label is None or node.label == qnode.label) and qnode.matches(node)
        ]
        counted.append((graph, matching))

    def satisfied(entry: tuple[VEKGGraph, list[ObjectEvent]]) -> bool:
        return compare_values(step.cmp, len(entry[1]), step.value)

    if step.per_frame:
        if all(satisfied(entry) for entry in counted):
            return min(counted, key=lambda entry: len(entry[1]))
        return None
    for entry in counted:
        if satisfied(entry):
            return entry
    return None


def _passes(plan: QueryPlan, confidence: float) -> bool:
    if plan.confidence_cmp == ">":
        return confidence > plan.confidence_threshold
    return confidence >= plan.confidence_threshold


def evaluate_window(
    state: WindowState,
    plan: QueryPlan,
    combination_cap: int = DEFAULT_COMBINATION_CAP,
) -> tuple[list[MatchNotification], int]:
    """Run the plan's stages over one sealed state.

    Returns (notifications, suppressed): matches whose score fails the
    query's confidence threshold are counted, not emitted. Output order is
    deterministic: frame order, then key order, then enumeration order.
    """
    suppressed = 0
    notifications: list[MatchNotification] = []

    def emit(events: tuple[ObjectEvent, ...], kind: str, truncated: bool = False):
        nonlocal suppressed
        confidence = confidence_score([e.probability for e in events]) if events else 1.0
        if _passes(plan, confidence):
            notifications.append(
                MatchNotification(
                    query_id=plan.query_id,
                    producer_id=state.producer_id,
                    window_start_ms=state.window_start_ms,
                    window_end_ms=state.window_end_ms,
                    pattern_kind=kind,
                    bound_events=events,
                    confidence=confidence,
                    truncated=truncated,
                    emitted_at=time.time(),
                )
            )
        else:
            suppressed += 1

    events = match_objects(state, plan)

    if plan.pattern_kind == "OBJECT":
        ordered = sorted(
            (event for per_key in events.values() for _graph, event in per_key),
            key=lambda e: (e.frame_index, e.key, e.node_id),
        )
        for event in ordered:
            emit((event,), "OBJECT")
    elif plan.pattern_kind == "SPATIAL":
        for subject, reference in match_spatial(events, plan):
            emit((subject, reference), "SPATIAL")
    elif plan.pattern_kind == "TEMPORAL":
        matches, truncated = match_temporal(events, plan, combination_cap)
        for match in matches:
            emit(tuple(match.bound_events), "TEMPORAL")
        if truncated:
            # Aggregate summary over the distinct events bound by the capped
            # enumeration, flagged so the consumer knows the list is partial.
            seen: dict[tuple[str, int, int], ObjectEvent] = {}
            for match in matches:
                for event in match.bound_events:
                    seen.setdefault((event.key, event.node_id, event.frame_index), event)
            emit(tuple(seen.values()), "TEMPORAL", truncated=True)
    else:  # COUNT
        result = match_count(state, plan)
        if result is not None:
            _graph, bound = result
            emit(tuple(bound), "COUNT")

    return notifications, suppressed


def serialize_notification(n: MatchNotification) -> str:
    """One-line JSON wire form of a notification."""
    return json.dumps(
        {
            "query_id": n.query_id,
            "producer_id": n.producer_id,
            "window": [n.window_start_ms, n.window_end_ms],
            "pattern_kind": n.pattern_kind,
            "events": [
                {
                    "key": e.key,
                    "node_id": e.node_id,
                    "label": e.label,
                    "frame_index": e.frame_index,
                    "timestamp_ms": e.timestamp_ms,
                    "probability": e.probability,
                }
                for e in n.bound_events
            ],
            "confidence": n.confidence,
            "truncated": n.truncated,
        },
        separators=(",", ":"),
    )

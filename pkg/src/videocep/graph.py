"""Per-frame video event knowledge graphs and cross-frame object identity.

Every frame becomes a VEKGGraph: one node per detection, conceptually a
complete digraph whose spatial edges are materialized lazily (an edge's
relation and weight are computed only when a query evaluates it), plus
temporal edges linking nodes that tracking identified as the same physical
object in the immediately preceding frame.

Tracking associates detections with the previous frame's nodes greedily:
a prev/curr pair is a candidate when the labels match and either the box
IOU or the feature cosine similarity clears its threshold; candidates are
taken in descending IOU order, ties broken by descending cosine similarity,
then by lower previous id. Identity does not survive a missed frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

from .errors import SimilarityError
from .ingest import BoundingBox, DetectionRecord, FrameDetections
from .spatial import SpatialRelation, bsf


@dataclass(frozen=True)
class TrackingParams:
    iou_threshold: float = 0.3
    cosine_sim_threshold: float = 0.7


@dataclass(frozen=True)
class ObjectNode:
    """A detected object with a tracking identity, stable across frames."""

    id: int
    label: str
    confidence: float
    attributes: dict[str, str]
    bbox: BoundingBox
    feature: tuple[float, ...] | None
    frame_index: int
    timestamp_ms: int


@dataclass
class SpatialEdge:
    relation: SpatialRelation
    weight: float = 0.0


@dataclass
class VEKGGraph:
    """One frame's labelled graph. Nodes are immutable; the spatial edge
    cache is owned by whoever holds this graph instance (see detached_copy)."""

    producer_id: str
    frame_index: int
    timestamp_ms: int
    nodes: tuple[ObjectNode, ...]
    spatial_edges: dict[tuple[int, int], SpatialEdge] = field(default_factory=dict)
    temporal_edges: tuple[tuple[int, int], ...] = ()

    def node_by_id(self, node_id: int) -> ObjectNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def resolve_spatial_edge(
        self, relation: SpatialRelation, subject_id: int, reference_id: int
    ) -> SpatialEdge:
        """Materialize (or fetch) the edge for an ordered node pair under a
        relation. Weight starts at 0 and is set to the boolean function's
        value when evaluated."""
        key = (subject_id, reference_id)
        edge = self.spatial_edges.get(key)
        if edge is None or edge.relation is not relation:
            edge = SpatialEdge(relation, 0.0)
            edge.weight = float(
                bsf(relation, self.node_by_id(subject_id), self.node_by_id(reference_id))
            )
            self.spatial_edges[key] = edge
        return edge

    def detached_copy(self) -> "VEKGGraph":
        """Copy sharing the immutable nodes but with a private edge cache,
        so concurrent matchers never share mutable state."""
        return VEKGGraph(
            producer_id=self.producer_id,
            frame_index=self.frame_index,
            timestamp_ms=self.timestamp_ms,
            nodes=self.nodes,
            spatial_edges={},
            temporal_edges=self.temporal_edges,
        )


@dataclass
class VEKGStream:
    producer_id: str
    graphs: list[VEKGGraph] = field(default_factory=list)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def cosine_similarity(a: tuple[float, ...], b: tuple[float, ...]) -> float:
    """Cosine of the angle between two feature vectors."""
    if len(a) != len(b) or not a:
        raise SimilarityError(f"feature length mismatch: {len(a)} vs {len(b)}")
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(x * x for x in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise SimilarityError("zero feature vector")
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (norm_a * norm_b)


def _candidate_score(
    prev: ObjectNode, det: DetectionRecord, params: TrackingParams
) -> tuple[float, float] | None:
    """(iou, cosine) when the pair is a tracking candidate, else None.
    Pairs without comparable features fall back to IOU alone; the cosine
    slot then sorts below any real similarity."""
    if prev.label != det.label:
        return None
    overlap = iou(prev.bbox, det.bbox)
    cosine = -2.0
    if prev.feature is not None and det.feature is not None:
        try:
            cosine = cosine_similarity(prev.feature, det.feature)
        except SimilarityError:
            cosine = -2.0
    if overlap >= params.iou_threshold or cosine >= params.cosine_sim_threshold:
        return overlap, cosine
    return None


def track_objects(
    prev_nodes: list[ObjectNode] | tuple[ObjectNode, ...],
    curr_detections: list[DetectionRecord] | tuple[DetectionRecord, ...],
    params: TrackingParams,
) -> dict[int, int]:
    """Greedy one-to-one assignment of current detections to previous nodes.

    Returns {current detection index -> previous node id}; detections and
    previous nodes may stay unmatched.
    """
    candidates = []
    for det_index, det in enumerate(curr_detections):
        for prev in prev_nodes:
            score = _candidate_score(prev, det, params)
            if score is not None:
                overlap, cosine = score
                candidates.append((-overlap, -cosine, prev.id, det_index))
    candidates.sort()

    assignment: dict[int, int] = {}
    used_prev: set[int] = set()
    for _neg_iou, _neg_cos, prev_id, det_index in candidates:
        if det_index in assignment or prev_id in used_prev:
            continue
        assignment[det_index] = prev_id
        used_prev.add(prev_id)
    return assignment


def build_vekg(
    frame: FrameDetections,
    prev: VEKGGraph | None,
    params: TrackingParams,
    id_source: Iterator[int],
) -> VEKGGraph:
    """Construct the frame's graph, inheriting node ids from the previous
    graph where tracking matched and minting fresh ids otherwise."""
    assignment: dict[int, int] = {}
    if prev is not None and prev.nodes and frame.detections:
        assignment = track_objects(list(prev.nodes), list(frame.detections), params)

    nodes = []
    temporal_edges = []
    for index, det in enumerate(frame.detections):
        if index in assignment:
            node_id = assignment[index]
            temporal_edges.append((node_id, node_id))
        else:
            node_id = next(id_source)
        nodes.append(
            ObjectNode(
                id=node_id,
                label=det.label,
                confidence=det.confidence,
                attributes=dict(det.attributes),
                bbox=det.bbox,
                feature=det.feature,
                frame_index=frame.frame_index,
                timestamp_ms=frame.timestamp_ms,
            )
        )
    return VEKGGraph(
        producer_id=frame.producer_id,
        frame_index=frame.frame_index,
        timestamp_ms=frame.timestamp_ms,
        nodes=tuple(nodes),
        temporal_edges=tuple(temporal_edges),
    )


class GraphBuilder:
    """Sequential per-producer graph construction (tracking needs the
    previous graph, so one builder serves exactly one stream)."""

    def __init__(self, producer_id: str, params: TrackingParams | None = None):
        self.producer_id = producer_id
        self.params = params or TrackingParams()
        self._prev: VEKGGraph | None = None
        self._ids = iter(_count_from(1))

    def build(self, frame: FrameDetections) -> VEKGGraph:
        graph = build_vekg(frame, self._prev, self.params, self._ids)
        self._prev = graph
        return graph


def _count_from(start: int) -> Iterator[int]:
    value = start
    while True:
        yield value
        value += 1


def format_graph(graph: VEKGGraph) -> str:
    """Human-readable adjacency listing for debugging."""
    from .spatial import direction_relation, msf_distance

    lines = [
        f"frame {graph.frame_index} @ {graph.timestamp_ms} ms "
        f"(producer {graph.producer_id}, {len(graph.nodes)} nodes)"
    ]
    for node in graph.nodes:
        attrs = ", ".join(f"{k}={v}" for k, v in sorted(node.attributes.items()))
        box = node.bbox
        lines.append(
            f"  node {node.id}: {node.label} p={node.confidence:.2f} "
            f"bbox=[{box.x_min:g},{box.y_min:g},{box.width:g},{box.height:g}]"
            + (f" [{attrs}]" if attrs else "")
        )
    for curr_id, prev_id in graph.temporal_edges:
        lines.append(f"  temporal: {curr_id} <- {prev_id} (previous frame)")
    for subject in graph.nodes:
        for reference in graph.nodes:
            if subject.id == reference.id:
                continue
            rel = direction_relation(subject, reference)
            dist = msf_distance(subject, reference)
            rel_name = rel.value if rel is not None else "COINCIDENT"
            lines.append(
                f"  spatial: {subject.id} -> {reference.id} {rel_name} "
                f"dist={dist:.1f}px"
            )
    return "\n".join(lines)

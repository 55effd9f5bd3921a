"""Spatial relations between detected objects.

Two relation families over bounding-box geometry:

* direction: the plane around a reference object is split into four
  quadrants {FRONT, BACK, LEFT, RIGHT} along the image axes (LEFT/RIGHT on
  -x/+x, FRONT/BACK on -y/+y, frame-top = front). The dominant displacement
  axis decides the region, x winning ties, so the four regions partition
  the plane minus the coincident point.

* topology: the nine named predicates over closed axis-aligned rectangles,
  decided per axis with exact arithmetic and zero touch tolerance. For two
  non-degenerate rectangles WITHIN, INSIDE and COVEREDBY coincide (closed
  containment), and CROSSES can never hold between two areas of equal
  dimension, so it always evaluates false.

All functions here are pure and total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable

from .ingest import BoundingBox

if TYPE_CHECKING:
    from .graph import ObjectNode, VEKGGraph


class DirectionRelation(Enum):
    FRONT = "FRONT"
    BACK = "BACK"
    LEFT = "LEFT"
    RIGHT = "RIGHT"


class TopologyRelation(Enum):
    DISJOINT = "DISJOINT"
    TOUCH = "TOUCH"
    CONTAINS = "CONTAINS"
    INTERSECT = "INTERSECT"
    WITHIN = "WITHIN"
    COVEREDBY = "COVEREDBY"
    CROSSES = "CROSSES"
    OVERLAP = "OVERLAP"
    INSIDE = "INSIDE"


SpatialRelation = DirectionRelation | TopologyRelation


@dataclass(frozen=True)
class Point:
    x: float
    y: float


def centroid(box: BoundingBox) -> Point:
    return Point(box.x_min + box.width / 2.0, box.y_min + box.height / 2.0)


def direction_relation(subject: "ObjectNode", reference: "ObjectNode") -> DirectionRelation | None:
    """Quadrant of the subject's centroid relative to the reference's.

    Returns None when the centroids coincide; that is a value, not an error.
    """
    sub = centroid(subject.bbox)
    ref = centroid(reference.bbox)
    dx = sub.x - ref.x
    dy = sub.y - ref.y
    if dx == 0.0 and dy == 0.0:
        return None
    if abs(dx) >= abs(dy):
        return DirectionRelation.LEFT if dx < 0 else DirectionRelation.RIGHT
    return DirectionRelation.FRONT if dy < 0 else DirectionRelation.BACK


def _closed_overlap(a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> bool:
    return a_lo <= b_hi and b_lo <= a_hi


def _open_overlap(a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> bool:
    return min(a_hi, b_hi) > max(a_lo, b_lo)


def _contained(a: BoundingBox, b: BoundingBox) -> bool:
    return (
        b.x_min <= a.x_min
        and a.x_max <= b.x_max
        and b.y_min <= a.y_min
        and a.y_max <= b.y_max
    )


def topology_relation(a: BoundingBox, b: BoundingBox) -> set[TopologyRelation]:
    """All topology predicates that hold between two closed rectangles,
    read with `a` as the first argument (WITHIN means a within b)."""
    intersect = _closed_overlap(a.x_min, a.x_max, b.x_min, b.x_max) and _closed_overlap(
        a.y_min, a.y_max, b.y_min, b.y_max
    )
    if not intersect:
        return {TopologyRelation.DISJOINT}

    relations = {TopologyRelation.INTERSECT}
    interiors = _open_overlap(a.x_min, a.x_max, b.x_min, b.x_max) and _open_overlap(
        a.y_min, a.y_max, b.y_min, b.y_max
    )
    if not interiors:
        relations.add(TopologyRelation.TOUCH)
        return relations

    a_in_b = _contained(a, b)
    b_in_a = _contained(b, a)
    if a_in_b:
        relations.update(
            {TopologyRelation.WITHIN, TopologyRelation.INSIDE, TopologyRelation.COVEREDBY}
        )
    if b_in_a:
        relations.add(TopologyRelation.CONTAINS)
    if not a_in_b and not b_in_a:
        relations.add(TopologyRelation.OVERLAP)
    return relations


def bsf(relation: SpatialRelation, subject: "ObjectNode", reference: "ObjectNode") -> int:
    """Boolean spatial function: 1 iff the relation holds with `reference`
    as the frame of reference, else 0."""
    if isinstance(relation, DirectionRelation):
        return 1 if direction_relation(subject, reference) is relation else 0
    return 1 if relation in topology_relation(subject.bbox, reference.bbox) else 0


def msf_distance(a: "ObjectNode", b: "ObjectNode") -> float:
    """Metric spatial function: Euclidean distance between centroids, pixels."""
    ca = centroid(a.bbox)
    cb = centroid(b.bbox)
    return math.hypot(ca.x - cb.x, ca.y - cb.y)


def msf_count(graph: "VEKGGraph", predicate: Callable[["ObjectNode"], bool]) -> int:
    """Metric spatial function: number of nodes in the frame satisfying
    the object predicate."""
    return sum(1 for node in graph.nodes if predicate(node))

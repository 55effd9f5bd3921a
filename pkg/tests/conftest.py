from __future__ import annotations

import pytest

from videocep.graph import ObjectNode, VEKGGraph
from videocep.ingest import BoundingBox, DetectionRecord, FrameDetections
from videocep.windows import WindowState


def make_detection(label="Car", confidence=0.9, bbox=(0, 0, 10, 10), attributes=None, feature=None):
    return DetectionRecord(
        label=label,
        confidence=confidence,
        bbox=BoundingBox(*bbox),
        attributes=attributes or {},
        feature=feature,
    )


def make_frame(producer="Camera", index=0, ts=0, detections=()):
    return FrameDetections(
        producer_id=producer,
        frame_index=index,
        timestamp_ms=ts,
        detections=tuple(detections),
    )


def make_node(
    node_id=1,
    label="Car",
    confidence=0.9,
    bbox=(0, 0, 10, 10),
    attributes=None,
    feature=None,
    frame_index=0,
    ts=0,
):
    return ObjectNode(
        id=node_id,
        label=label,
        confidence=confidence,
        attributes=attributes or {},
        bbox=BoundingBox(*bbox),
        feature=feature,
        frame_index=frame_index,
        timestamp_ms=ts,
    )


def make_graph(producer="Camera", index=0, ts=0, nodes=()):
    return VEKGGraph(
        producer_id=producer,
        frame_index=index,
        timestamp_ms=ts,
        nodes=tuple(nodes),
    )


def make_state(graphs, query_id="q", producer="Camera", start=0, end=10_000):
    return WindowState(
        query_id=query_id,
        producer_id=producer,
        window_start_ms=start,
        window_end_ms=end,
        graphs=tuple(graphs),
    )


@pytest.fixture
def tmp_stream(tmp_path):
    """Write wire lines to a temp file and return its path."""

    def write(lines, name="stream.jsonl"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    return write

"""Complex event processing over video detection streams.

Per-frame object detections enter as newline-delimited JSON, become
labelled graphs with tracked object identity, and are matched against
declarative queries (object, attribute, spatial, temporal and count
patterns) over event-time windows. Each detected pattern is scored with
an entropy-weighted confidence and emitted as a notification line.
"""

from .engine import Engine, EngineConfig, EngineMetrics, load_config
from .errors import EngineError
from .graph import GraphBuilder, TrackingParams, VEKGGraph, build_vekg, cosine_similarity, iou
from .ingest import (
    BoundingBox,
    DetectionRecord,
    FrameDetections,
    parse_detection_line,
    serialize_frame,
    validate_sequence,
)
from .matcher import MatchNotification, confidence_score, evaluate_window
from .veql import QueryAST, QueryPlan, compile_query, parse_veql, render_veql
from .windows import WindowAssigner, WindowConfig, WindowState

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "DetectionRecord",
    "Engine",
    "EngineConfig",
    "EngineError",
    "EngineMetrics",
    "FrameDetections",
    "GraphBuilder",
    "MatchNotification",
    "QueryAST",
    "QueryPlan",
    "TrackingParams",
    "VEKGGraph",
    "WindowAssigner",
    "WindowConfig",
    "WindowState",
    "build_vekg",
    "compile_query",
    "confidence_score",
    "cosine_similarity",
    "evaluate_window",
    "iou",
    "load_config",
    "parse_detection_line",
    "parse_veql",
    "render_veql",
    "serialize_frame",
    "validate_sequence",
]

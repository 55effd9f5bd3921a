"""Detection wire format: parsing, validation and stream sources.

One frame per line (JSONL). Each line carries every detection of one video
frame from one producer:

    {"producer_id": "P4", "frame_index": 0, "timestamp_ms": 0,
     "detections": [{"label": "Car", "confidence": 0.6, "bbox": [0,0,10,10],
                     "attributes": {"color": "Black"}, "feature": [0.1, 0.9]}]}

`bbox` is [x_min, y_min, width, height] in pixels, origin at the top-left,
x rightward, y downward. `attributes` and `feature` are optional. Unknown
fields are ignored so producers may annotate freely.

Parsing is total: any byte sequence yields either a FrameDetections or a
classified error (WireParseError / WireSchemaError), never a crash.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from typing import Iterator

from .errors import OutOfOrderError, WireParseError, WireSchemaError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel rectangle, stored as corner plus size."""

    x_min: float
    y_min: float
    width: float
    height: float

    @property
    def x_max(self) -> float:
        return self.x_min + self.width

    @property
    def y_max(self) -> float:
        return self.y_min + self.height

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class DetectionRecord:
    """A single detector output, before any tracking identity is assigned."""

    label: str
    confidence: float
    bbox: BoundingBox
    attributes: dict[str, str] = field(default_factory=dict)
    feature: tuple[float, ...] | None = None


@dataclass(frozen=True)
class FrameDetections:
    """All detections of one frame, the unit carried on the wire."""

    producer_id: str
    frame_index: int
    timestamp_ms: int
    detections: tuple[DetectionRecord, ...]


def _schema_error(message: str, fld: str) -> WireSchemaError:
    return WireSchemaError(message, fld)


def _require(obj: dict, fld: str):
    if fld not in obj:
        raise _schema_error("missing required field", fld)
    return obj[fld]


def _as_str(value, fld: str) -> str:
    if not isinstance(value, str):
        raise _schema_error("expected a string", fld)
    return value


def _as_int(value, fld: str) -> int:
    # bool is an int subclass; reject it explicitly.
    if isinstance(value, bool) or not isinstance(value, int):
        raise _schema_error("expected an integer", fld)
    return value


def _as_number(value, fld: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _schema_error("expected a number", fld)
    return float(value)


def _parse_bbox(value, fld: str) -> BoundingBox:
    if not isinstance(value, list) or len(value) != 4:
        raise _schema_error("expected a 4-element [x,y,w,h] array", fld)
    x, y, w, h = (_as_number(v, fld) for v in value)
    if x < 0 or y < 0:
        raise _schema_error("bbox origin must be non-negative", fld)
    if w <= 0 or h <= 0:
        raise _schema_error("bbox width and height must be positive", fld)
    return BoundingBox(x, y, w, h)


def _parse_detection(obj, index: int) -> DetectionRecord:
    where = f"detections[{index}]"
    if not isinstance(obj, dict):
        raise _schema_error("expected an object", where)
    label = _as_str(_require(obj, "label"), f"{where}.label")
    if not label:
        raise _schema_error("label must be non-empty", f"{where}.label")
    confidence = _as_number(_require(obj, "confidence"), f"{where}.confidence")
    if not 0.0 < confidence <= 1.0:
        raise _schema_error("confidence out of range", f"{where}.confidence")
    bbox = _parse_bbox(_require(obj, "bbox"), f"{where}.bbox")

    attributes: dict[str, str] = {}
    if "attributes" in obj and obj["attributes"] is not None:
        raw = obj["attributes"]
        if not isinstance(raw, dict):
            raise _schema_error("expected a string map", f"{where}.attributes")
        for key, value in raw.items():
            attributes[_as_str(key, f"{where}.attributes")] = _as_str(
                value, f"{where}.attributes.{key}"
            )

    feature: tuple[float, ...] | None = None
    if "feature" in obj and obj["feature"] is not None:
        raw = obj["feature"]
        if not isinstance(raw, list) or not raw:
            raise _schema_error("expected a non-empty number array", f"{where}.feature")
        feature = tuple(_as_number(v, f"{where}.feature") for v in raw)

    return DetectionRecord(label, confidence, bbox, attributes, feature)


def parse_detection_line(line: str | bytes) -> FrameDetections:
    """Parse one wire-format line into a FrameDetections.

    Raises WireParseError (with byte offset) for malformed syntax and
    WireSchemaError (naming the field) for schema violations.
    """
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WireParseError("invalid UTF-8", exc.start) from exc
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        offset = len(line[: exc.pos].encode("utf-8"))
        raise WireParseError(f"invalid JSON: {exc.msg}", offset) from exc
    if not isinstance(obj, dict):
        raise _schema_error("expected a JSON object", "<root>")

    producer_id = _as_str(_require(obj, "producer_id"), "producer_id")
    frame_index = _as_int(_require(obj, "frame_index"), "frame_index")
    if frame_index < 0:
        raise _schema_error("frame_index must be non-negative", "frame_index")
    timestamp_ms = _as_int(_require(obj, "timestamp_ms"), "timestamp_ms")
    if timestamp_ms < 0:
        raise _schema_error("timestamp_ms must be non-negative", "timestamp_ms")
    raw_detections = _require(obj, "detections")
    if not isinstance(raw_detections, list):
        raise _schema_error("expected an array", "detections")
    detections = tuple(_parse_detection(d, i) for i, d in enumerate(raw_detections))
    return FrameDetections(producer_id, frame_index, timestamp_ms, detections)


def serialize_frame(frame: FrameDetections) -> str:
    """Render a FrameDetections back to its wire-format line (no newline)."""
    detections = []
    for det in frame.detections:
        rec: dict = {
            "label": det.label,
            "confidence": det.confidence,
            "bbox": [det.bbox.x_min, det.bbox.y_min, det.bbox.width, det.bbox.height],
        }
        if det.attributes:
            rec["attributes"] = dict(det.attributes)
        if det.feature is not None:
            rec["feature"] = list(det.feature)
        detections.append(rec)
    return json.dumps(
        {
            "producer_id": frame.producer_id,
            "frame_index": frame.frame_index,
            "timestamp_ms": frame.timestamp_ms,
            "detections": detections,
        },
        separators=(",", ":"),
    )


def validate_sequence(prev: FrameDetections | None, curr: FrameDetections) -> FrameDetections:
    """Enforce per-producer ordering: strictly increasing frame_index,
    non-decreasing timestamp_ms. Returns curr unchanged when in order."""
    if prev is None:
        return curr
    if curr.frame_index <= prev.frame_index or curr.timestamp_ms < prev.timestamp_ms:
        raise OutOfOrderError(prev.frame_index, curr.frame_index)
    return curr


class SequenceValidator:
    """Stateful per-producer ordering filter.

    Out-of-order frames are dropped and counted, never buffered: the engine
    assumes producers emit ordered streams and treats reordering as an
    ingest-side responsibility.
    """

    def __init__(self) -> None:
        self._prev: FrameDetections | None = None
        self.dropped = 0

    def accept(self, frame: FrameDetections) -> FrameDetections | None:
        try:
            validate_sequence(self._prev, frame)
        except OutOfOrderError:
            self.dropped += 1
            return None
        self._prev = frame
        return frame


def iter_file_lines(path: str) -> Iterator[str]:
    """Yield non-blank lines of a wire-format file."""
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield line


def iter_socket_lines(host: str, port: int, timeout_s: float | None = None) -> Iterator[str]:
    """Yield wire-format lines read from a TCP stream until the peer closes."""
    with socket.create_connection((host, port), timeout=timeout_s) as conn:
        with conn.makefile("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    yield line

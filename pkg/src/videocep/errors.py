"""Exception hierarchy for the engine.

Every error raised across the public surface derives from EngineError so
callers can catch one type at the pipeline boundary; subclasses carry the
context needed to classify and report the failure.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""


class WireParseError(EngineError):
    """Malformed wire-format syntax. Carries the byte offset of the fault."""

    def __init__(self, message: str, byte_offset: int = 0):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class WireSchemaError(EngineError):
    """Well-formed JSON that violates the detection record schema."""

    def __init__(self, message: str, field: str):
        super().__init__(f"{message} (field '{field}')")
        self.field = field


class OutOfOrderError(EngineError):
    """Frame arrived out of order within one producer stream."""

    def __init__(self, prev_index: int, curr_index: int):
        super().__init__(
            f"frame_index {curr_index} does not advance past {prev_index}"
        )
        self.prev_index = prev_index
        self.curr_index = curr_index


class SimilarityError(EngineError):
    """Feature vectors unusable for cosine similarity."""


class VeqlError(EngineError):
    """Base class for query language errors."""


class VeqlSyntaxError(VeqlError):
    """Lexical or syntactic query error, positioned at line:column."""

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at {line}:{column}"
        if expected:
            detail += f" (expected {', '.join(expected)})"
        super().__init__(detail)
        self.line = line
        self.column = column
        self.expected = expected


class VeqlSemanticError(VeqlError):
    """Query parses but is not meaningful (undeclared variable, bad arity, ...)."""


class RegistrationError(EngineError):
    """Query could not be installed in the engine registry."""


class StartupError(EngineError):
    """Engine configuration is unusable (missing source, unknown producer, ...)."""


class SinkError(EngineError):
    """Notification sink write failed; aborts the run."""

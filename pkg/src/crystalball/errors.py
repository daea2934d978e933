"""Exception types shared across the toolkit."""

from __future__ import annotations


class CrystalBallError(Exception):
    """Base class for all toolkit errors."""


class ExtractionError(CrystalBallError):
    """LLM answer held no usable property JSON (or every field was Unknown)."""


class DimensionMismatch(CrystalBallError):
    pass


class ZeroNorm(CrystalBallError):
    pass


class FormatError(CrystalBallError):
    """Vector file is not a valid CBV1 payload."""


class EmbeddingError(CrystalBallError):
    pass


class StorageError(CrystalBallError):
    pass


class ForeignKeyViolation(StorageError):
    pass


class NotFound(StorageError):
    pass


class ValidationError(StorageError):
    """Graph JSON offered for storage does not parse as an attack graph."""


class UnknownCounter(CrystalBallError):
    pass


class EmptyContext(CrystalBallError):
    pass


class EmptyReport(CrystalBallError):
    pass


class TransportError(CrystalBallError):
    """LLM transport failed after retries."""


class TransportTimeout(TransportError):
    pass


class PromptTooLarge(CrystalBallError):
    """Prompt exceeds the transport's token ceiling; nothing was sent."""


class NoGraphFound(CrystalBallError):
    """Answer contains no balanced JSON object with a nodes key."""


class Unrepairable(CrystalBallError):
    """Truncated JSON has no structurally complete array element to cut back to."""


class SchemaError(CrystalBallError):
    """Parsed JSON object is not shaped like an attack graph."""


class GraphParseError(CrystalBallError):
    """Answer could not be turned into a graph even after repair."""


class ChunkTooSmall(CrystalBallError):
    """A single description exceeds the per-chunk token budget."""


class EdgeNotInGraph(CrystalBallError):
    pass

"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HyperKGError(Exception):
    """Base class for all package errors."""


class GraphValidationError(HyperKGError):
    """A hypergraph failed invariant validation; carries the violation list."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("graph validation failed:\n" + "\n".join(self.violations))


class GraphFormatError(HyperKGError):
    """A graph file could not be parsed; message names the offending field."""


class ChunkingError(HyperKGError):
    """Invalid chunking input or configuration."""


class GatewayError(HyperKGError):
    """Transport-level provider failure after retries."""


class FixtureMissError(GatewayError):
    """Scripted provider had no fixture for the requested key."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no scripted fixture registered for key {key!r}")


class ResponseParseError(HyperKGError):
    """A model response did not conform to the expected format.

    The raw response text is preserved for logging and debugging.
    """

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class ExtractionError(HyperKGError):
    """Every chunk of a document failed extraction."""


class SkillOpError(HyperKGError):
    """A library operation referenced an unknown skill id; nothing was applied."""


class RolloutError(HyperKGError):
    """A rollout sample failed persistently; message names the sample index."""


class ReflectionError(HyperKGError):
    """A reflection call produced no usable insight after a reprompt."""


class MatchingError(HyperKGError):
    """Semantic matching could not be computed (embedding failure)."""


class RetrievalError(HyperKGError):
    """Evidence retrieval failed (embedding failure or empty inputs)."""


class VerificationError(HyperKGError):
    """The fact-check judge produced no parseable verdict after a reprompt."""


class ConfigError(HyperKGError):
    """Invalid run configuration."""

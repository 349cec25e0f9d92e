"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SignAgentError(Exception):
    """Base class for every error raised by signagent."""


# --- ingestion / persistence -------------------------------------------------


class DataError(SignAgentError):
    """Input data is malformed or inconsistent (CLI exit code 3)."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateSampleId(DataError):
    def __init__(self, sample_id: str):
        self.sample_id = sample_id
        super().__init__(f"duplicate sample_id {sample_id!r}")


class MissingFeatureFile(DataError):
    def __init__(self, path):
        self.path = path
        super().__init__(f"feature file not found: {path}")


class BadMagic(DataError):
    pass


class TruncatedFile(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class FrameCountMismatch(DataError):
    pass


class SchemaViolation(DataError):
    """A document failed schema validation; ``fields`` names the failing paths."""

    def __init__(self, fields, message: str | None = None):
        self.fields = list(fields)
        super().__init__(message or f"schema violation in: {', '.join(self.fields)}")


class KeyMismatch(DataError):
    pass


# --- knowledge graphs ----------------------------------------------------------


class DuplicateGloss(DataError):
    pass


class UnknownComponentLabel(DataError):
    pass


class UnknownGloss(SignAgentError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else "unknown gloss"


# --- tools ---------------------------------------------------------------------


class MissingFeatures(SignAgentError):
    pass


class TooShort(SignAgentError):
    pass


class NoActiveSpans(SignAgentError):
    pass


class EmptySegment(SignAgentError):
    pass


class DimensionMismatch(SignAgentError, ValueError):
    pass


class ZeroVector(SignAgentError, ValueError):
    pass


class EmptyPhonology(SignAgentError, ValueError):
    pass


class RankerUntrained(SignAgentError):
    pass


class EmptyCluster(SignAgentError):
    pass


class CandidateNotInEvidence(SignAgentError, KeyError):
    pass


# --- orchestrator --------------------------------------------------------------


class DuplicateTool(SignAgentError):
    pass


class UnknownTool(SignAgentError, KeyError):
    pass


class UnknownPolicy(SignAgentError, KeyError):
    pass


class ToolError(SignAgentError):
    """A tool handler failed; the episode continues with the error in state."""


class BackendError(SignAgentError):
    pass


class MalformedStep(BackendError):
    pass


class ResponseSchemaError(MalformedStep):
    pass


class TransportError(MalformedStep):
    pass


class AuthError(BackendError):
    pass


# --- metrics -------------------------------------------------------------------


class DomainError(SignAgentError, ValueError):
    pass


class EmptyReference(DomainError):
    pass


class EmptyInput(DomainError):
    pass


class SingleCluster(DomainError):
    pass


# --- configuration -------------------------------------------------------------


class ConfigError(SignAgentError):
    """Invalid run configuration (CLI exit code 2)."""

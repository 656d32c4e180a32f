"""Exception hierarchy shared by all causalkg modules."""


class CausalKgError(Exception):
    """Base class for every error raised by this package."""


class ParseError(CausalKgError):
    """Malformed input document (JSON corpus, KG file, checkpoint header)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(CausalKgError):
    """Structurally well-formed input that violates a domain invariant."""


class BuildError(CausalKgError):
    """Inconsistent inputs to knowledge-graph construction."""


class SplitError(CausalKgError):
    """Graph too small (or ratios unusable) for a train/valid/test split."""


class SamplingError(CausalKgError):
    """Negative sampling cannot proceed (e.g. single-entity vocabulary)."""


class EvalError(CausalKgError):
    """Ranking evaluation failure, e.g. the gold candidate was filtered out."""


class CheckpointError(CausalKgError):
    """Corrupt, truncated, version-mismatched or wrong-kind checkpoint."""


class NumericError(CausalKgError):
    """Non-finite value where the numeric contract requires finiteness."""

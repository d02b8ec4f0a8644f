"""Exception hierarchy shared across pipeline stages."""


class PipelineError(Exception):
    """Base class for all pipeline errors."""


class RetriableError(PipelineError):
    """Transient failure (network, rate limit); safe to retry."""


class EmptyDocumentError(PipelineError):
    """A filing decoded to empty text after cleaning."""


class DimensionMismatchError(PipelineError):
    """Embedding dimension does not match the target index."""


class ZeroNormError(PipelineError):
    """A zero vector was passed where a direction is required."""


class UnparseableScoreError(PipelineError):
    """No valid 0-100 integer could be extracted from a provider response."""

    def __init__(self, raw_response: str):
        super().__init__(f"no parseable score in response: {raw_response!r}")
        self.raw_response = raw_response


class RowScoringError(PipelineError):
    """A filing could not be fully scored; the whole feature row is dropped."""


class StageInputError(PipelineError):
    """A pipeline stage is missing an input artifact.

    Carries the name of the stage that would produce it.
    """

    def __init__(self, missing: str, producing_stage: str):
        super().__init__(
            f"missing input {missing!r}: run stage {producing_stage!r} first"
        )
        self.missing = missing
        self.producing_stage = producing_stage

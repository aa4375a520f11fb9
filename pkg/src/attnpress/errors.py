"""Exception types shared across the package."""


class AttnpressError(Exception):
    """Base class for all package errors."""


class DatasetError(AttnpressError):
    """Malformed dataset record or file.

    Carries the 1-based line number of the offending record when the error
    originates from a line-delimited file.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ContextError(AttnpressError):
    """Invalid user context, sentence spans, or token offsets."""


class SnapshotError(AttnpressError):
    """Attention snapshot violates its structural invariants."""


class MarkingError(AttnpressError):
    """Invalid selection threshold, marker structure, or sample size."""


class ProviderError(AttnpressError):
    """Attention provider failure.

    ``retriable`` distinguishes transport-class failures (worth retrying
    with backoff) from fatal ones such as a layer outside the model range.
    """

    def __init__(self, message: str, retriable: bool = False):
        self.retriable = retriable
        super().__init__(message)


class GeneratorError(AttnpressError):
    """Generator failure; ``payload`` holds the raw refusal/error body if any."""

    def __init__(self, message: str, retriable: bool = False, payload=None):
        self.retriable = retriable
        self.payload = payload
        super().__init__(message)


class TemplateError(AttnpressError):
    """Unknown prompt template or unresolved placeholder."""


class CacheError(AttnpressError):
    """Profile cache integrity problem."""


class PipelineError(AttnpressError):
    """Compression pipeline configuration or execution failure.

    ``user_id`` identifies the user whose record failed, so batch callers can
    report per-user failures without losing the rest of the run.
    """

    def __init__(self, message: str, user_id: str | None = None):
        self.user_id = user_id
        if user_id is not None:
            message = f"user {user_id}: {message}"
        super().__init__(message)

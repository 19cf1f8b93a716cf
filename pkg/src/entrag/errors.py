"""Exception hierarchy for entrag.

Value-like misuse (bad shapes, bad parameters) derives from ValueError so
callers that only know stdlib semantics still catch the right class; runtime
failures (backend I/O) derive from RuntimeError.
"""


class EntragError(Exception):
    """Base class for all entrag errors."""


class DimensionError(EntragError, ValueError):
    """Vector lengths or counts do not line up."""


class InvalidParameterError(EntragError, ValueError):
    """A numeric parameter is outside its admissible range."""


class DegenerateDistributionError(EntragError, ValueError):
    """An input cannot be normalized into a distribution (e.g. all -inf)."""


class EmptyEnsembleError(EntragError, ValueError):
    """An ensemble operation received zero members."""


class InvalidScoreError(EntragError, ValueError):
    """Retriever scores are missing or non-finite."""


class EmptyContextError(EntragError, ValueError):
    """A context-building operation received zero documents."""


class PromptError(EntragError, ValueError):
    """Prompt construction precondition violated (e.g. empty question)."""


class ConfigurationError(EntragError, ValueError):
    """Inconsistent or incomplete configuration."""


class InvalidTokenError(EntragError, ValueError):
    """A token id is outside the backend vocabulary."""


class InvalidLayerError(EntragError, ValueError):
    """A layer index is outside [1, num_layers]."""


class LabelingError(EntragError, ValueError):
    """Dataset lacks the oracle/distractor labels an analysis requires."""


class IngestionError(EntragError, ValueError):
    """A dataset file could not be parsed."""


class BackendError(EntragError, RuntimeError):
    """A model backend failed to serve a request."""


class BackendUnavailableError(BackendError):
    """The backend cannot be reached at all."""


class ContextLengthError(BackendError):
    """A token sequence exceeds the backend's context window."""


class DecodingError(EntragError, RuntimeError):
    """A decode run failed; message carries the query id when known."""

"""Training-free retrieval-augmented decoding.

Combines per-document expert distributions with entropy-based weights and
optionally contrasts the result against a no-context distribution projected
from an automatically chosen transformer layer.  Ships a deterministic mock
backend for hermetic testing and an HTTP client for real model servers.
"""

from .backend import Backend, BackendMeta, ForwardRequest, ForwardResponse
from .backend.mock import MockBackend, MockModelSpec, MockTrigger
from .backend.remote import RemoteBackend
from .contrast import LayerStrategy, contrast_step, select_layer_max_entropy, select_layer_max_jsd
from .decoder import DecodeConfig, DecodeResult, DecodeState, decode
from .ensemble import (
    WeightScheme,
    ensemble_step,
    entropy_weights,
    retriever_weights,
    uniform_weights,
)
from .errors import (
    BackendError,
    BackendUnavailableError,
    ConfigurationError,
    ContextLengthError,
    DecodingError,
    DegenerateDistributionError,
    DimensionError,
    EmptyContextError,
    EmptyEnsembleError,
    EntragError,
    IngestionError,
    InvalidLayerError,
    InvalidParameterError,
    InvalidScoreError,
    InvalidTokenError,
    LabelingError,
    PromptError,
)
from .evaluation import (
    EvalReport,
    QAExample,
    exact_match,
    first_token_entropy_gap,
    layer_entropy_profile,
    load_dataset,
    normalize_answer,
    position_sweep,
    run_eval,
)
from .prompting import (
    DEFAULT_TEMPLATE,
    Document,
    PromptTemplate,
    build_closed_book_prompt,
    build_concat_prompt,
    build_parallel_prompt,
)

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BackendError",
    "BackendMeta",
    "BackendUnavailableError",
    "ConfigurationError",
    "ContextLengthError",
    "DEFAULT_TEMPLATE",
    "DecodeConfig",
    "DecodeResult",
    "DecodeState",
    "DecodingError",
    "DegenerateDistributionError",
    "DimensionError",
    "Document",
    "EmptyContextError",
    "EmptyEnsembleError",
    "EntragError",
    "EvalReport",
    "ForwardRequest",
    "ForwardResponse",
    "IngestionError",
    "InvalidLayerError",
    "InvalidParameterError",
    "InvalidScoreError",
    "InvalidTokenError",
    "LabelingError",
    "LayerStrategy",
    "MockBackend",
    "MockModelSpec",
    "MockTrigger",
    "PromptError",
    "PromptTemplate",
    "QAExample",
    "RemoteBackend",
    "WeightScheme",
    "build_closed_book_prompt",
    "build_concat_prompt",
    "build_parallel_prompt",
    "contrast_step",
    "decode",
    "ensemble_step",
    "entropy_weights",
    "exact_match",
    "first_token_entropy_gap",
    "layer_entropy_profile",
    "load_dataset",
    "normalize_answer",
    "position_sweep",
    "retriever_weights",
    "run_eval",
    "select_layer_max_entropy",
    "select_layer_max_jsd",
    "uniform_weights",
    "__version__",
]

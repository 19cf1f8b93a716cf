"""Model-access contract: tokenization plus logit-returning forward passes.

A backend exposes raw next-token logits at the final layer and, on request,
at intermediate layers via the model's classification head (logit-lens
convention).  Normalization is always the engine's job, so every backend
returns plain logits; the engine turns them into distributions with the
core kernels.

Concrete implementations: :class:`entrag.backend.mock.MockBackend`
(deterministic, hermetic test double) and
:class:`entrag.backend.remote.RemoteBackend` (HTTP client for the remote
logits protocol).
"""

import abc
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from ..errors import ContextLengthError, InvalidLayerError, InvalidTokenError

__all__ = [
    "BackendMeta",
    "ForwardRequest",
    "ForwardResponse",
    "Backend",
]


@dataclass(frozen=True)
class BackendMeta:
    """Static facts about a backend; constant for the backend's lifetime."""

    vocab_size: int
    num_layers: int
    max_context: int
    name: str
    #: Optional end-of-sequence token id; not part of the required wire
    #: protocol, surfaced when the host provides it.
    eos_token_id: Optional[int] = None

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.max_context < 1:
            raise ValueError(f"max_context must be >= 1, got {self.max_context}")


@dataclass(frozen=True)
class ForwardRequest:
    """A single forward pass: token ids plus the layers to project.

    An empty ``layers`` tuple requests the final-layer logits only.
    """

    tokens: tuple[int, ...]
    layers: tuple[int, ...] = ()

    def validate(self, meta: BackendMeta) -> None:
        if len(self.tokens) > meta.max_context:
            raise ContextLengthError(
                f"{len(self.tokens)} tokens exceed max_context {meta.max_context}"
            )
        for t in self.tokens:
            if not 0 <= t < meta.vocab_size:
                raise InvalidTokenError(f"token id {t} outside vocabulary of {meta.vocab_size}")
        for l in self.layers:
            if not 1 <= l <= meta.num_layers:
                raise InvalidLayerError(f"layer {l} outside [1, {meta.num_layers}]")


@dataclass
class ForwardResponse:
    """Final-layer logits plus any requested intermediate-layer projections."""

    final: np.ndarray
    per_layer: Dict[int, np.ndarray] = field(default_factory=dict)


class Backend(abc.ABC):
    """Abstract model backend.

    Implementations must be safe for concurrent ``forward`` calls and
    referentially transparent: identical requests yield identical responses
    for a fixed backend instance.
    """

    @abc.abstractmethod
    def meta(self) -> BackendMeta:
        """Static backend description."""

    @abc.abstractmethod
    def tokenize(self, text: str) -> list[int]:
        """Text to token ids."""

    @abc.abstractmethod
    def detokenize(self, ids: Sequence[int]) -> str:
        """Token ids back to text."""

    @abc.abstractmethod
    def forward(self, tokens: Sequence[int], layers: Iterable[int] = ()) -> ForwardResponse:
        """Next-token logits for the given prompt.

        ``layers`` selects intermediate layers to project through the
        classification head; the final-layer logits are always returned.
        """

    def close(self) -> None:
        """Release any held resources; default is a no-op."""

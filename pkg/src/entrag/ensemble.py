"""Document weighting schemes and the product-of-experts combination step.

Three ways to weight the per-document next-token distributions:

* ``entropy``   -- softmax(-H_j / tau), recomputed every step; documents whose
  conditional distribution is sharper (lower entropy) get more say;
* ``uniform``   -- 1/K for every document;
* ``retriever`` -- softmax over raw retriever scores, computed once per query.

The combined distribution is the weighted sum of log-probabilities followed
by renormalization (a weighted geometric mean of the experts).
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from . import core
from .errors import (
    ConfigurationError,
    EmptyEnsembleError,
    InvalidParameterError,
    InvalidScoreError,
)

WeightKind = Literal["entropy", "uniform", "retriever"]


@dataclass(frozen=True)
class WeightScheme:
    """Which weighting rule to use; ``tau`` only applies to the entropy kind."""

    kind: WeightKind
    tau: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("entropy", "uniform", "retriever"):
            raise ConfigurationError(f"unknown weight scheme {self.kind!r}")
        if self.kind == "entropy":
            if self.tau is None or not self.tau > 0:
                raise ConfigurationError("entropy weighting requires tau > 0")

    @property
    def time_dependent(self) -> bool:
        """Entropy weights change every step; the others are fixed per query."""
        return self.kind == "entropy"


def entropy_weights(entropies, tau: float) -> np.ndarray:
    """softmax(-H / tau): lower entropy, higher weight.

    ``tau`` controls concentration: tau -> 0 puts all mass on the sharpest
    document, tau -> inf recovers uniform weighting.
    """
    t = float(tau)
    if not np.isfinite(t) or t <= 0.0:
        raise InvalidParameterError(f"tau must be finite and > 0, got {tau!r}")
    h = np.ascontiguousarray(entropies, dtype=np.float64)
    if h.size == 0:
        raise EmptyEnsembleError("entropy_weights needs at least one entropy")
    if not np.isfinite(h).all():
        raise InvalidParameterError("entropies must be finite")
    if (h < 0.0).any():
        raise InvalidParameterError("entropies must be nonnegative")
    return core.softmax(-h, temperature=t)


def uniform_weights(k: int) -> np.ndarray:
    """Equal weight 1/k for each of k documents."""
    if k < 1:
        raise EmptyEnsembleError(f"need at least one document, got k={k}")
    return np.full(k, 1.0 / k)


def retriever_weights(scores) -> np.ndarray:
    """softmax over raw retriever scores; shift-invariant, computed once per query."""
    s = np.ascontiguousarray(scores, dtype=np.float64)
    if s.size == 0:
        raise EmptyEnsembleError("retriever_weights needs at least one score")
    if not np.isfinite(s).all():
        raise InvalidScoreError("retriever scores must be finite")
    return core.softmax(s, temperature=1.0)


def ensemble_step(per_doc_logprobs: Sequence, weights) -> np.ndarray:
    """Combine per-document log-prob vectors into one normalized log-prob vector.

    log_softmax(sum_j w_j * logp_j); with a single document this is the
    identity (up to renormalization noise well below 1e-9).
    """
    combined = core.weighted_logprob_sum(per_doc_logprobs, weights)
    return core.log_softmax(combined)

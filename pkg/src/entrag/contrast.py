"""Contrastive adjustment of the ensemble distribution against a no-context prior.

The prior is a next-token distribution computed from the model *without* any
retrieved document, projected from one of its layers through the model's
classification head.  Subtracting beta times the prior's log-probs from the
amplified ensemble log-probs boosts tokens whose probability grew when the
documents were added (a pointwise-mutual-information style correction).

Layer choice matters: the last layer tends to be overconfident, so the
default strategy picks the candidate layer whose no-context distribution has
maximum entropy.  Alternatives (fixed layer, last layer, maximum JSD against
the ensemble) are provided for ablations.
"""

from dataclasses import dataclass
from typing import Literal, Mapping, Optional, Sequence

import numpy as np

from . import core
from .errors import (
    ConfigurationError,
    DegenerateDistributionError,
    DimensionError,
    InvalidParameterError,
)

StrategyKind = Literal["max_entropy", "last_layer", "max_jsd", "fixed"]


@dataclass(frozen=True)
class LayerStrategy:
    """How to pick the no-context layer used as the contrast prior.

    ``candidate_layers`` is the ordered set searched by the dynamic
    strategies; ``None`` means "every layer of the backend", resolved once
    the backend's layer count is known.
    """

    kind: StrategyKind = "max_entropy"
    candidate_layers: Optional[tuple[int, ...]] = None
    fixed_layer: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("max_entropy", "last_layer", "max_jsd", "fixed"):
            raise ConfigurationError(f"unknown layer strategy {self.kind!r}")
        if self.kind == "fixed" and self.fixed_layer is None:
            raise ConfigurationError("fixed strategy requires a layer index")
        if self.fixed_layer is not None and self.fixed_layer < 1:
            raise ConfigurationError(f"layer indices start at 1, got {self.fixed_layer}")
        if self.candidate_layers is not None:
            if len(self.candidate_layers) == 0:
                raise ConfigurationError("candidate_layers must be non-empty")
            if any(l < 1 for l in self.candidate_layers):
                raise ConfigurationError("layer indices start at 1")

    @classmethod
    def max_entropy(cls, layers: Optional[Sequence[int]] = None) -> "LayerStrategy":
        return cls("max_entropy", _as_layers(layers))

    @classmethod
    def last_layer(cls) -> "LayerStrategy":
        return cls("last_layer")

    @classmethod
    def max_jsd(cls, layers: Optional[Sequence[int]] = None) -> "LayerStrategy":
        return cls("max_jsd", _as_layers(layers))

    @classmethod
    def fixed(cls, layer: int) -> "LayerStrategy":
        return cls("fixed", fixed_layer=int(layer))

    def resolve(self, num_layers: int) -> tuple[int, ...]:
        """Layers the backend must project for this strategy.

        Validates indices against the backend's layer count.
        """
        if self.kind == "last_layer":
            layers = (num_layers,)
        elif self.kind == "fixed":
            layers = (int(self.fixed_layer),)  # type: ignore[arg-type]
        elif self.candidate_layers is None:
            layers = tuple(range(1, num_layers + 1))
        else:
            layers = self.candidate_layers
        if len(layers) == 0:
            raise ConfigurationError("empty candidate layer set")
        bad = [l for l in layers if not 1 <= l <= num_layers]
        if bad:
            raise ConfigurationError(
                f"candidate layers {bad} outside [1, {num_layers}]"
            )
        return layers


def _as_layers(layers: Optional[Sequence[int]]) -> Optional[tuple[int, ...]]:
    return None if layers is None else tuple(int(l) for l in layers)


def select_layer_max_entropy(
    per_layer: Mapping[int, np.ndarray],
    candidates: Optional[Sequence[int]] = None,
) -> int:
    """Index of the candidate layer whose distribution has maximum entropy.

    Ties break to the smallest layer index (deterministic traces).
    """
    layers = _candidate_list(per_layer, candidates)
    best_layer = layers[0]
    best_h = -1.0
    for l in layers:
        h = core.entropy_from_logprobs(per_layer[l])
        if h > best_h:
            best_h = h
            best_layer = l
    return best_layer


def select_layer_max_jsd(
    per_layer: Mapping[int, np.ndarray],
    ensemble_logprobs: np.ndarray,
    candidates: Optional[Sequence[int]] = None,
) -> int:
    """Index of the candidate layer most divergent (JSD) from the ensemble.

    Ties break to the smallest layer index.
    """
    layers = _candidate_list(per_layer, candidates)
    p = np.exp(np.ascontiguousarray(ensemble_logprobs, dtype=np.float64))
    best_layer = layers[0]
    best_d = -1.0
    for l in layers:
        d = core.jensen_shannon_divergence(p, np.exp(per_layer[l]))
        if d > best_d:
            best_d = d
            best_layer = l
    return best_layer


def _candidate_list(
    per_layer: Mapping[int, np.ndarray], candidates: Optional[Sequence[int]]
) -> list[int]:
    layers = sorted(per_layer) if candidates is None else sorted(set(candidates))
    if not layers:
        raise ConfigurationError("no candidate layers to select from")
    missing = [l for l in layers if l not in per_layer]
    if missing:
        raise ConfigurationError(f"layer distributions missing for layers {missing}")
    return layers


def contrast_step(ensemble, prior, beta: float) -> np.ndarray:
    """log_softmax((1 + beta) * ensemble - beta * prior).

    beta = 0 returns the ensemble unchanged (up to renormalization noise).
    Tokens the ensemble rules out (-inf) stay ruled out; the prior must give
    nonzero probability to every token the ensemble supports.
    """
    b = float(beta)
    if not np.isfinite(b) or b < 0.0:
        raise InvalidParameterError(f"beta must be finite and >= 0, got {beta!r}")
    e = core.check_logit_vector(ensemble, "ensemble")
    p = core.check_logit_vector(prior, "prior")
    if e.shape != p.shape:
        raise DimensionError(f"length mismatch: {e.shape[0]} vs {p.shape[0]}")
    if b == 0.0:
        # Exact degeneracy to the ensemble; the prior plays no role at all,
        # not even through 0 * (-inf).
        return core.log_softmax(e)
    e_masked = np.isneginf(e)
    with np.errstate(invalid="ignore"):
        z = np.where(e_masked, -np.inf, (1.0 + b) * e - b * p)
    if np.isnan(z).any() or np.isposinf(z).any():
        raise DegenerateDistributionError(
            "prior assigns zero probability to a token the ensemble supports"
        )
    return core.log_softmax(z)

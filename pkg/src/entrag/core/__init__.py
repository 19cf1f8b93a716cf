"""Numerically stable primitives over logit / probability vectors.

Conventions used across the whole engine:

* a *logit vector* is a float array of unnormalized log-scores; entries may
  be -inf (masked token) but never NaN or +inf;
* a *log-prob vector* has logsumexp == 0 (within 1e-6) and entries <= 0;
* a *prob vector* is nonnegative and sums to 1 (within 1e-6);
* every entropy and log-probability is in nats.

All accumulation happens in float64 regardless of the dtype handed in.  Two
interchangeable kernel sets exist: a compiled Cython extension and a numpy
fallback.  Selection happens once at import; set ENTRAG_PURE_PYTHON=1 to
force the fallback (the benchmark suite uses this to compare both).
"""

import os
from typing import Sequence

import numpy as np

from ..errors import (
    DegenerateDistributionError,
    DimensionError,
    EmptyEnsembleError,
    InvalidParameterError,
)

if os.environ.get("ENTRAG_PURE_PYTHON") == "1":
    from . import _numpy_impl as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _numpy_impl as _impl  # type: ignore[no-redef]

#: Which kernel set is active: "compiled" or "numpy".
KERNEL_BACKEND: str = _impl.BACKEND_NAME

__all__ = [
    "KERNEL_BACKEND",
    "log_softmax",
    "softmax",
    "entropy",
    "entropy_from_logprobs",
    "log_softmax_with_entropy",
    "jensen_shannon_divergence",
    "weighted_logprob_sum",
    "check_logit_vector",
    "check_logprob_vector",
    "check_prob_vector",
]


def _as_vector(x, name: str) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    return v


def check_logit_vector(x, name: str = "logits") -> np.ndarray:
    """Coerce to float64 and enforce the logit-vector invariant.

    NaN and +inf are rejected; -inf is allowed (masked token).
    """
    v = _as_vector(x, name)
    if np.isnan(v).any():
        raise InvalidParameterError(f"{name} contains NaN")
    if np.isposinf(v).any():
        raise InvalidParameterError(f"{name} contains +inf")
    return v


def check_logprob_vector(x, name: str = "logprobs", tol: float = 1e-6) -> np.ndarray:
    """Enforce the log-prob invariant: entries <= 0 and logsumexp == 0."""
    v = check_logit_vector(x, name)
    if (v > 1e-12).any():
        raise InvalidParameterError(f"{name} has entries > 0")
    m = v.max()
    if m == -np.inf:
        raise DegenerateDistributionError(f"{name} is all -inf")
    lse = m + np.log(np.exp(v - m).sum())
    if abs(lse) > tol:
        raise InvalidParameterError(f"{name} has logsumexp {lse:.3e}, expected 0")
    return v


def check_prob_vector(x, name: str = "probs", tol: float = 1e-6) -> np.ndarray:
    """Enforce the prob-vector invariant: nonnegative, sums to 1."""
    v = _as_vector(x, name)
    if np.isnan(v).any():
        raise InvalidParameterError(f"{name} contains NaN")
    if (v < 0.0).any():
        raise InvalidParameterError(f"{name} has negative entries")
    s = float(v.sum())
    if abs(s - 1.0) > tol:
        raise InvalidParameterError(f"{name} sums to {s!r}, expected 1")
    return v


def log_softmax(logits) -> np.ndarray:
    """Shift-invariant log-softmax; -inf inputs stay -inf in the output.

    Raises DegenerateDistributionError when every entry is -inf.
    """
    v = check_logit_vector(logits)
    if v.max() == -np.inf:
        raise DegenerateDistributionError("all logits are -inf")
    return _impl.log_softmax(v)


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """softmax(logits / temperature); temperature must be > 0."""
    t = float(temperature)
    if not np.isfinite(t) or t <= 0.0:
        raise InvalidParameterError(f"temperature must be finite and > 0, got {temperature!r}")
    v = check_logit_vector(logits)
    if v.max() == -np.inf:
        raise DegenerateDistributionError("all logits are -inf")
    return _impl.softmax(v, t)


def entropy(probs) -> float:
    """Shannon entropy in nats with the 0 log 0 = 0 convention.

    The full-sum invariant is not re-checked here (hot path); use
    check_prob_vector first when the input is untrusted.
    """
    v = _as_vector(probs, "probs")
    if np.isnan(v).any():
        raise InvalidParameterError("probs contains NaN")
    if (v < 0.0).any():
        raise InvalidParameterError("probs has negative entries")
    return _impl.entropy(v)


def entropy_from_logprobs(logprobs) -> float:
    """Entropy of exp(logprobs); -inf entries contribute exactly zero."""
    v = check_logit_vector(logprobs, "logprobs")
    return _impl.entropy_from_logprobs(v)


def log_softmax_with_entropy(logits) -> tuple[np.ndarray, float]:
    """Fused log_softmax + entropy of the resulting distribution.

    One kernel pass instead of two; the decode loop needs both values for
    every document at every step.
    """
    v = check_logit_vector(logits)
    if v.max() == -np.inf:
        raise DegenerateDistributionError("all logits are -inf")
    out, h = _impl.log_softmax_with_entropy(v)
    return out, float(h)


def jensen_shannon_divergence(p, q) -> float:
    """JSD in nats; symmetric, bounded by ln 2, zero iff p == q."""
    vp = _as_vector(p, "p")
    vq = _as_vector(q, "q")
    if vp.shape != vq.shape:
        raise DimensionError(f"length mismatch: {vp.shape[0]} vs {vq.shape[0]}")
    if np.isnan(vp).any() or np.isnan(vq).any():
        raise InvalidParameterError("JSD inputs contain NaN")
    return _impl.jsd(vp, vq)


def weighted_logprob_sum(logprobs: Sequence, weights) -> np.ndarray:
    """Elementwise sum_j w_j * logprobs_j (unnormalized log scores).

    The caller renormalizes via log_softmax.  Weights must be nonnegative and
    sum to 1 within 1e-9; members with zero weight are ignored entirely, so
    their masked (-inf) entries do not force the combined entry to -inf.
    """
    if len(logprobs) == 0:
        raise EmptyEnsembleError("weighted_logprob_sum needs at least one member")
    w = _as_vector(weights, "weights")
    if w.shape[0] != len(logprobs):
        raise DimensionError(f"{len(logprobs)} vectors but {w.shape[0]} weights")
    if (w < 0.0).any() or not np.isfinite(w).all():
        raise InvalidParameterError("weights must be finite and nonnegative")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise InvalidParameterError(f"weights sum to {float(w.sum())!r}, expected 1")
    rows = [check_logit_vector(lp, f"logprobs[{k}]") for k, lp in enumerate(logprobs)]
    n = rows[0].shape[0]
    for k, r in enumerate(rows[1:], start=1):
        if r.shape[0] != n:
            raise DimensionError(f"logprobs[{k}] has length {r.shape[0]}, expected {n}")
    mat = np.ascontiguousarray(np.stack(rows))
    return _impl.weighted_sum(mat, w)

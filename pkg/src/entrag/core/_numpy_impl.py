"""Pure-numpy kernels; fallback when the compiled extension is unavailable.

All functions assume validated float64 C-contiguous inputs (the public
wrappers in entrag.core take care of coercion and error reporting) and use
64-bit accumulation throughout.  Negative infinity encodes masked tokens and
must never produce NaN here.
"""

import numpy as np

BACKEND_NAME = "numpy"


def log_softmax(x):
    m = x.max()
    lse = m + np.log(np.exp(x - m).sum())
    return x - lse


def softmax(x, temperature):
    z = x / temperature
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return p


def entropy(p):
    mask = p > 0.0
    q = p[mask]
    return float(-(q * np.log(q)).sum())


def entropy_from_logprobs(lp):
    mask = lp > -np.inf
    q = lp[mask]
    return float(-(np.exp(q) * q).sum())


def log_softmax_with_entropy(x):
    y = log_softmax(x)
    return y, entropy_from_logprobs(y)


def jsd(p, q):
    m = 0.5 * (p + q)
    pm = p > 0.0
    qm = q > 0.0
    a = (p[pm] * np.log(p[pm] / m[pm])).sum()
    b = (q[qm] * np.log(q[qm] / m[qm])).sum()
    return float(0.5 * (a + b))


def weighted_sum(mat, w):
    # Accumulates in ascending row order so results are reproducible
    # bit-for-bit; rows with zero weight are skipped so that masked (-inf)
    # entries of ignored members cannot poison the sum.
    out = np.zeros(mat.shape[1])
    for k in range(mat.shape[0]):
        wk = w[k]
        if wk != 0.0:
            out += wk * mat[k]
    return out

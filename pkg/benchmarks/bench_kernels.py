"""Timing comparison between the compiled math kernels and the NumPy fallback.

Runs each hot kernel on realistic shapes (a 32k vocabulary, a handful of
ensemble members) against both implementations and reports per-call time
plus the speedup of the compiled path. Also times a composite "ensemble
step": per-member fused log-softmax + entropy, entropy weighting, weighted
combination, and final normalization, which is the sequence the decoder
executes once per generated token.

Usage:
    python3 benchmarks/bench_kernels.py [--vocab 32000] [--members 5]
                                        [--repeats 200] [--seed 0]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from entrag.core import _numpy_impl

try:
    from entrag.core import _kernels
except ImportError:
    _kernels = None


def _time_call(fn, repeats: int) -> float:
    """Median wall time per call in microseconds, after a short warmup."""
    for _ in range(3):
        fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        samples.append((time.perf_counter_ns() - t0) / 1e3)
    return statistics.median(samples)


def _make_inputs(vocab: int, members: int, seed: int):
    rng = np.random.default_rng(seed)
    logits = rng.normal(0.0, 4.0, size=vocab)
    logprob_rows = np.stack(
        [_numpy_impl.log_softmax(rng.normal(0.0, 4.0, size=vocab)) for _ in range(members)]
    )
    weights = rng.random(members)
    weights /= weights.sum()
    return logits, logprob_rows, weights


def _single_op_cases(mod, logits, logprob_rows, weights):
    lp = logprob_rows[0]
    probs = np.exp(logprob_rows[0])
    other_probs = np.exp(logprob_rows[1])
    return [
        ("log_softmax", lambda: mod.log_softmax(logits)),
        ("softmax", lambda: mod.softmax(logits, 1.0)),
        ("entropy", lambda: mod.entropy(probs)),
        ("entropy_from_logprobs", lambda: mod.entropy_from_logprobs(lp)),
        ("log_softmax_with_entropy", lambda: mod.log_softmax_with_entropy(logits)),
        ("jsd", lambda: mod.jsd(probs, other_probs)),
        ("weighted_sum", lambda: mod.weighted_sum(logprob_rows, weights)),
    ]


def _ensemble_step(mod, member_logits):
    """One decoder-shaped step: fuse, weight by entropy, combine, normalize."""
    rows = []
    entropies = np.empty(len(member_logits))
    for j, row in enumerate(member_logits):
        lp, h = mod.log_softmax_with_entropy(row)
        rows.append(lp)
        entropies[j] = h
    w = mod.softmax(-entropies, 0.1)
    combined = mod.weighted_sum(np.stack(rows), w)
    return int(np.argmax(mod.log_softmax(combined)))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--vocab", type=int, default=32000)
    parser.add_argument("--members", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _kernels is None:
        parser.exit(
            1,
            "compiled kernels are not built; run pip install -e . without "
            "ENTRAG_SKIP_EXT and retry\n",
        )

    logits, logprob_rows, weights = _make_inputs(args.vocab, args.members, args.seed)
    rng = np.random.default_rng(args.seed + 1)
    member_logits = rng.normal(0.0, 4.0, size=(args.members, args.vocab))

    print(
        f"vocab={args.vocab} members={args.members} repeats={args.repeats} "
        f"(median per call, microseconds)"
    )
    header = f"{'kernel':<26} {'numpy':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))

    numpy_cases = _single_op_cases(_numpy_impl, logits, logprob_rows, weights)
    compiled_cases = _single_op_cases(_kernels, logits, logprob_rows, weights)
    for (name, numpy_fn), (_, compiled_fn) in zip(numpy_cases, compiled_cases):
        t_numpy = _time_call(numpy_fn, args.repeats)
        t_compiled = _time_call(compiled_fn, args.repeats)
        print(f"{name:<26} {t_numpy:>10.1f} {t_compiled:>10.1f} {t_numpy / t_compiled:>7.2f}x")

    t_numpy = _time_call(lambda: _ensemble_step(_numpy_impl, member_logits), args.repeats)
    t_compiled = _time_call(lambda: _ensemble_step(_kernels, member_logits), args.repeats)
    print("-" * len(header))
    print(
        f"{'ensemble step':<26} {t_numpy:>10.1f} {t_compiled:>10.1f} "
        f"{t_numpy / t_compiled:>7.2f}x"
    )


if __name__ == "__main__":
    main()

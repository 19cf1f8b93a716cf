"""Greedy per-query generation loop for all decoding methods.

Methods:

* ``naive``    -- one forward on the concatenated-documents prompt;
* ``avg_ens``  -- K per-document forwards, uniform weights, product-of-experts;
* ``replug``   -- same, weights from retriever scores (fixed per query);
* ``leens``    -- same, entropy-based weights recomputed every step;
* ``clehe``    -- leens plus a contrast against the no-context distribution
  projected from a dynamically selected layer;
* ``cad``      -- naive distribution contrasted against the no-context
  final-layer distribution;
* ``closed_book`` -- debug mode, question only, no documents.

Each step fans out the required forward passes (optionally on a thread
pool), assembles the next-token distribution, commits the argmax token
(ties to the smallest id), appends it to every active prompt, and records a
trace row.  Steps are strictly sequential.
"""

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import core
from .backend import Backend
from .contrast import LayerStrategy, contrast_step, select_layer_max_entropy, select_layer_max_jsd
from .ensemble import ensemble_step, entropy_weights, retriever_weights, uniform_weights
from .errors import (
    ConfigurationError,
    ContextLengthError,
    EmptyContextError,
    InvalidScoreError,
)
from .prompting import (
    DEFAULT_TEMPLATE,
    Document,
    PromptTemplate,
    build_closed_book_prompt,
    build_concat_prompt,
    build_parallel_prompt,
)

__all__ = [
    "METHODS",
    "DecodeConfig",
    "StepRecord",
    "GenerationTrace",
    "DecodeResult",
    "DecodeState",
    "decode",
]

METHODS = ("naive", "avg_ens", "replug", "leens", "clehe", "cad", "closed_book")
OVERFLOW_POLICIES = ("skip", "truncate_documents", "error")

STOP_EOS = "eos"
STOP_NEWLINE = "newline"
STOP_MAX_TOKENS = "max_new_tokens"
STOP_SKIPPED = "skipped_overflow"


@dataclass(frozen=True)
class DecodeConfig:
    """Everything a decode run needs besides the question, docs and backend."""

    method: str = "leens"
    tau: float = 0.1
    beta: float = 0.25
    layer_strategy: LayerStrategy = field(default_factory=LayerStrategy.max_entropy)
    max_new_tokens: int = 32
    stop_on_eos: bool = True
    stop_on_newline: bool = True
    overflow_policy: str = "skip"
    template: PromptTemplate = DEFAULT_TEMPLATE
    #: Threads for the per-step forward fan-out; 0 = sequential.
    fanout_workers: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be > 0, got {self.tau}")
        if self.beta < 0:
            raise ConfigurationError(f"beta must be >= 0, got {self.beta}")
        if self.max_new_tokens < 1:
            raise ConfigurationError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.overflow_policy not in OVERFLOW_POLICIES:
            raise ConfigurationError(
                f"unknown overflow policy {self.overflow_policy!r}; "
                f"expected one of {OVERFLOW_POLICIES}"
            )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["layer_strategy"] = {
            "kind": self.layer_strategy.kind,
            "candidate_layers": self.layer_strategy.candidate_layers,
            "fixed_layer": self.layer_strategy.fixed_layer,
        }
        d["template"] = dataclasses.asdict(self.template)
        return d


@dataclass
class StepRecord:
    """Trace row for one emitted token."""

    step: int
    token_id: int
    token_text: str
    #: entropy (nats) of the committed distribution
    entropy: float
    top5: list[tuple[int, float]]
    doc_entropies: Optional[list[float]] = None
    weights: Optional[list[float]] = None
    selected_layer: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "token_id": self.token_id,
            "token_text": self.token_text,
            "entropy": self.entropy,
            "top5": [[int(t), float(p)] for t, p in self.top5],
            "doc_entropies": self.doc_entropies,
            "weights": self.weights,
            "selected_layer": self.selected_layer,
        }


@dataclass
class GenerationTrace:
    steps: list[StepRecord] = field(default_factory=list)

    def to_dicts(self) -> list[dict]:
        return [s.to_dict() for s in self.steps]


@dataclass
class DecodeResult:
    answer: str
    trace: GenerationTrace
    stop_reason: str
    tokens: list[int]
    skipped: bool = False


@dataclass
class _StepInfo:
    """step_distribution output prior to token commitment."""

    entropy: float
    top5: list[tuple[int, float]]
    doc_entropies: Optional[list[float]] = None
    weights: Optional[list[float]] = None
    selected_layer: Optional[int] = None


class DecodeState:
    """Mutable state of one decode run; drives one query to completion.

    ``step_distribution()`` exposes the full next-token distribution without
    committing, which the analysis harnesses use directly; ``decode`` is the
    convenience loop on top.
    """

    def __init__(
        self,
        question: str,
        docs: Sequence[Document],
        cfg: DecodeConfig,
        backend: Backend,
    ):
        if cfg.method != "closed_book" and len(docs) == 0:
            raise EmptyContextError(f"method {cfg.method!r} requires at least one document")
        self.cfg = cfg
        self.backend = backend
        self.meta = backend.meta()
        self.question = question
        self.docs = list(docs)
        self.committed: list[int] = []
        self.skipped = False
        self._pool: Optional[ThreadPoolExecutor] = None

        needs = self._needs()
        self._doc_tokens: list[list[int]] = []
        self._concat_tokens: Optional[list[int]] = None
        self._closed_tokens: Optional[list[int]] = None
        self._static_weights: Optional[np.ndarray] = None
        self._contrast_layers: tuple[int, ...] = ()

        if needs["per_doc"]:
            self._doc_tokens = [
                backend.tokenize(build_parallel_prompt(d, question, cfg.template))
                for d in self.docs
            ]
        if needs["concat"]:
            self._concat_tokens = backend.tokenize(
                build_concat_prompt(self.docs, question, cfg.template)
            )
        if needs["closed_book"]:
            self._closed_tokens = backend.tokenize(
                build_closed_book_prompt(question, cfg.template)
            )
        if cfg.method == "replug":
            scores = [d.retriever_score for d in self.docs]
            if any(s is None for s in scores):
                raise InvalidScoreError("replug requires a retriever score on every document")
            self._static_weights = retriever_weights(np.asarray(scores, dtype=np.float64))
        elif cfg.method == "avg_ens":
            self._static_weights = uniform_weights(len(self.docs))
        if cfg.method == "clehe":
            self._contrast_layers = cfg.layer_strategy.resolve(self.meta.num_layers)

        self._handle_overflow()

    # -- prompt management -------------------------------------------------

    def _needs(self) -> dict:
        m = self.cfg.method
        return {
            "per_doc": m in ("avg_ens", "replug", "leens", "clehe"),
            "concat": m in ("naive", "cad"),
            "closed_book": m in ("clehe", "cad", "closed_book"),
        }

    def _active_prompts(self) -> list[list[int]]:
        out = list(self._doc_tokens)
        if self._concat_tokens is not None:
            out.append(self._concat_tokens)
        if self._closed_tokens is not None:
            out.append(self._closed_tokens)
        return out

    def _handle_overflow(self) -> None:
        budget = self.meta.max_context - self.cfg.max_new_tokens
        if budget < 1:
            raise ConfigurationError(
                f"max_new_tokens {self.cfg.max_new_tokens} leaves no room in "
                f"context of {self.meta.max_context}"
            )
        longest = max((len(t) for t in self._active_prompts()), default=0)
        if longest <= budget:
            return
        policy = self.cfg.overflow_policy
        if policy == "error":
            raise ContextLengthError(
                f"prompt of {longest} tokens exceeds budget {budget} "
                f"(max_context {self.meta.max_context} - max_new_tokens)"
            )
        if policy == "skip":
            self.skipped = True
            return
        self._truncate_documents(budget)
        longest = max((len(t) for t in self._active_prompts()), default=0)
        if longest > budget:
            raise ContextLengthError(
                f"prompt still {longest} tokens after truncation (budget {budget})"
            )

    def _truncate_documents(self, budget: int) -> None:
        """Shorten document contents (token-wise) until every prompt fits."""

        def shrink(doc: Document, keep: int) -> Document:
            ids = self.backend.tokenize(doc.content)
            if len(ids) <= keep:
                return doc
            kept = self.backend.detokenize(ids[:max(keep, 1)])
            return dataclasses.replace(doc, content=kept or doc.content[:1])

        if self._doc_tokens:
            for j, doc in enumerate(self.docs):
                overhead = len(
                    self.backend.tokenize(
                        build_parallel_prompt(
                            dataclasses.replace(doc, content="…"),
                            self.question,
                            self.cfg.template,
                        )
                    )
                )
                keep = budget - overhead
                self.docs[j] = shrink(doc, max(keep, 1))
            self._doc_tokens = [
                self.backend.tokenize(build_parallel_prompt(d, self.question, self.cfg.template))
                for d in self.docs
            ]
        if self._concat_tokens is not None:
            overhead = len(
                self.backend.tokenize(
                    build_concat_prompt(
                        [dataclasses.replace(d, content="…") for d in self.docs],
                        self.question,
                        self.cfg.template,
                    )
                )
            )
            per_doc = max((budget - overhead) // max(len(self.docs), 1), 1)
            self.docs = [shrink(d, per_doc) for d in self.docs]
            self._concat_tokens = self.backend.tokenize(
                build_concat_prompt(self.docs, self.question, self.cfg.template)
            )

    # -- stepping ----------------------------------------------------------

    def _map_forwards(self, jobs: list[tuple[list[int], tuple[int, ...]]]):
        if self.cfg.fanout_workers > 0 and len(jobs) > 1:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=self.cfg.fanout_workers)
            futs = [self._pool.submit(self.backend.forward, t, l) for t, l in jobs]
            return [f.result() for f in futs]
        return [self.backend.forward(t, l) for t, l in jobs]

    def step_distribution(self) -> tuple[np.ndarray, _StepInfo]:
        """Full next-token probability vector plus the trace info for this step."""
        m = self.cfg.method
        if m == "naive":
            lp, h = self._forward_logprobs(self._concat_tokens)
            return np.exp(lp), _StepInfo(entropy=h, top5=_top5(lp))
        if m == "closed_book":
            lp, h = self._forward_logprobs(self._closed_tokens)
            return np.exp(lp), _StepInfo(entropy=h, top5=_top5(lp))
        if m in ("avg_ens", "replug", "leens"):
            lp, info = self._ensemble_logprobs()
            return np.exp(lp), info
        if m == "clehe":
            return self._clehe_step()
        if m == "cad":
            return self._cad_step()
        raise ConfigurationError(f"unhandled method {m!r}")

    def _forward_logprobs(self, tokens, layers=()):
        resp = self.backend.forward(tokens, layers)
        lp, h = core.log_softmax_with_entropy(resp.final)
        return lp, h

    def _ensemble_logprobs(self) -> tuple[np.ndarray, _StepInfo]:
        responses = self._map_forwards([(t, ()) for t in self._doc_tokens])
        lps, entropies = [], []
        for resp in responses:
            lp, h = core.log_softmax_with_entropy(resp.final)
            lps.append(lp)
            entropies.append(h)
        if self.cfg.method == "leens" or self.cfg.method == "clehe":
            w = entropy_weights(np.asarray(entropies), self.cfg.tau)
        else:
            w = self._static_weights
        combined = ensemble_step(lps, w)
        info = _StepInfo(
            entropy=core.entropy_from_logprobs(combined),
            top5=_top5(combined),
            doc_entropies=[float(h) for h in entropies],
            weights=[float(x) for x in w],
        )
        return combined, info

    def _clehe_step(self) -> tuple[np.ndarray, _StepInfo]:
        strategy = self.cfg.layer_strategy
        jobs = [(t, ()) for t in self._doc_tokens]
        jobs.append((self._closed_tokens, self._contrast_layers))
        responses = self._map_forwards(jobs)
        closed = responses.pop()

        lps, entropies = [], []
        for resp in responses:
            lp, h = core.log_softmax_with_entropy(resp.final)
            lps.append(lp)
            entropies.append(h)
        w = entropy_weights(np.asarray(entropies), self.cfg.tau)
        ens = ensemble_step(lps, w)

        layer_lps = {l: core.log_softmax(v) for l, v in closed.per_layer.items()}
        if strategy.kind == "max_entropy":
            l_star = select_layer_max_entropy(layer_lps, self._contrast_layers)
        elif strategy.kind == "max_jsd":
            l_star = select_layer_max_jsd(layer_lps, ens, self._contrast_layers)
        else:  # last_layer / fixed resolve to a single layer
            l_star = self._contrast_layers[0]
        final_lp = contrast_step(ens, layer_lps[l_star], self.cfg.beta)
        info = _StepInfo(
            entropy=core.entropy_from_logprobs(final_lp),
            top5=_top5(final_lp),
            doc_entropies=[float(h) for h in entropies],
            weights=[float(x) for x in w],
            selected_layer=l_star,
        )
        return np.exp(final_lp), info

    def _cad_step(self) -> tuple[np.ndarray, _StepInfo]:
        responses = self._map_forwards(
            [(self._concat_tokens, ()), (self._closed_tokens, ())]
        )
        with_ctx = core.log_softmax(responses[0].final)
        without_ctx = core.log_softmax(responses[1].final)
        final_lp = contrast_step(with_ctx, without_ctx, self.cfg.beta)
        info = _StepInfo(
            entropy=core.entropy_from_logprobs(final_lp),
            top5=_top5(final_lp),
            selected_layer=self.meta.num_layers,
        )
        return np.exp(final_lp), info

    def commit(self, token_id: int) -> None:
        """Append the chosen token to every active prompt."""
        self.committed.append(int(token_id))
        for t in self._doc_tokens:
            t.append(int(token_id))
        if self._concat_tokens is not None:
            self._concat_tokens.append(int(token_id))
        if self._closed_tokens is not None:
            self._closed_tokens.append(int(token_id))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=False)
            self._pool = None


def _top5(logprobs: np.ndarray) -> list[tuple[int, float]]:
    idx = np.argsort(logprobs, kind="stable")[::-1][:5]
    return [(int(i), float(np.exp(logprobs[i]))) for i in idx]


def decode(
    question: str,
    docs: Sequence[Document],
    cfg: DecodeConfig,
    backend: Backend,
) -> DecodeResult:
    """Run one query to completion under the configured method.

    Deterministic for a fixed (question, docs order, config, backend):
    greedy argmax with ties to the smallest token id.
    """
    state = DecodeState(question, docs, cfg, backend)
    if state.skipped:
        return DecodeResult(
            answer="", trace=GenerationTrace(), stop_reason=STOP_SKIPPED,
            tokens=[], skipped=True,
        )
    trace = GenerationTrace()
    stop_reason = STOP_MAX_TOKENS
    has_content = False
    try:
        for step in range(cfg.max_new_tokens):
            probs, info = state.step_distribution()
            token_id = int(np.argmax(probs))
            piece = backend.detokenize([token_id])
            if (
                cfg.stop_on_eos
                and state.meta.eos_token_id is not None
                and token_id == state.meta.eos_token_id
            ):
                stop_reason = STOP_EOS
                break
            if cfg.stop_on_newline and has_content and "\n" in piece:
                stop_reason = STOP_NEWLINE
                break
            state.commit(token_id)
            if piece.strip():
                has_content = True
            trace.steps.append(
                StepRecord(
                    step=step,
                    token_id=token_id,
                    token_text=piece,
                    entropy=info.entropy,
                    top5=info.top5,
                    doc_entropies=info.doc_entropies,
                    weights=info.weights,
                    selected_layer=info.selected_layer,
                )
            )
    finally:
        state.close()
    answer = backend.detokenize(state.committed)
    return DecodeResult(
        answer=answer, trace=trace, stop_reason=stop_reason, tokens=list(state.committed)
    )

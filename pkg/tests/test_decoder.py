"""Generation loop: method dispatch, stop rules, overflow policies."""

import numpy as np
import pytest

from entrag.backend import Backend, BackendMeta, ForwardResponse
from entrag.backend.mock import MockBackend, MockModelSpec, MockTrigger
from entrag.contrast import LayerStrategy
from entrag.decoder import DecodeConfig, DecodeState, decode
from entrag.errors import (
    ConfigurationError,
    ContextLengthError,
    EmptyContextError,
    InvalidScoreError,
)
from entrag.prompting import Document

TRIG = MockTrigger(trigger="the moons of Vel are seven", answer="Seven\n")
SPEC = MockModelSpec(triggers=(TRIG,))
QUESTION = "How many moons circle Vel?"


def _docs(k=3, oracle_at=0):
    docs = []
    for j in range(k):
        if j == oracle_at:
            docs.append(
                Document(
                    content="Astronomers recorded that the moons of Vel are seven in all.",
                    title="Vel",
                    retriever_score=3.0,
                    is_oracle=True,
                )
            )
        else:
            docs.append(
                Document(
                    content=f"Chronicle {j} speaks of tides and harvests.",
                    title=f"Misc{j}",
                    retriever_score=1.0,
                )
            )
    return docs


@pytest.mark.parametrize("method", ["naive", "avg_ens", "replug", "leens", "clehe", "cad"])
def test_all_methods_answer_planted_question(method):
    cfg = DecodeConfig(method=method, tau=0.1, beta=0.25, max_new_tokens=16)
    result = decode(QUESTION, _docs(), cfg, MockBackend(SPEC))
    assert result.answer == "Seven"
    assert result.stop_reason == "newline"
    assert not result.skipped


def test_newline_not_committed():
    cfg = DecodeConfig(method="leens", max_new_tokens=16)
    result = decode(QUESTION, _docs(), cfg, MockBackend(SPEC))
    assert not result.answer.endswith("\n")
    assert result.tokens == list(b"Seven")


def test_max_new_tokens_stop():
    cfg = DecodeConfig(method="leens", max_new_tokens=3)
    result = decode(QUESTION, _docs(), cfg, MockBackend(SPEC))
    assert len(result.tokens) == 3
    assert result.stop_reason == "max_new_tokens"
    assert result.answer == "Sev"


def test_trace_records_per_step_details():
    cfg = DecodeConfig(method="leens", tau=0.1, max_new_tokens=16)
    result = decode(QUESTION, _docs(), cfg, MockBackend(SPEC))
    steps = result.trace.steps
    assert len(steps) == len(result.tokens)
    first = steps[0]
    assert first.token_id == ord("S")
    assert len(first.doc_entropies) == 3
    assert len(first.weights) == 3
    assert abs(sum(first.weights) - 1.0) < 1e-9
    assert max(first.weights) == first.weights[0]
    assert len(first.top5) == 5
    assert first.top5[0][0] == ord("S")


def test_clehe_trace_records_selected_layer():
    cfg = DecodeConfig(
        method="clehe",
        beta=0.25,
        layer_strategy=LayerStrategy.max_entropy((2, 4, 6)),
        max_new_tokens=8,
    )
    result = decode(QUESTION, _docs(), cfg, MockBackend(SPEC))
    layers = {s.selected_layer for s in result.trace.steps}
    assert layers <= {2, 4, 6}
    # the mock's shallowest candidate always has the highest entropy
    assert layers == {2}


def test_leens_weights_favor_oracle_document():
    cfg = DecodeConfig(method="leens", tau=0.1, max_new_tokens=4)
    for oracle_at in range(3):
        result = decode(QUESTION, _docs(oracle_at=oracle_at), cfg, MockBackend(SPEC))
        w = result.trace.steps[0].weights
        assert np.argmax(w) == oracle_at
        assert w[oracle_at] > 0.99


def test_replug_requires_scores():
    docs = _docs()
    docs[1] = Document(content=docs[1].content, title=docs[1].title)
    cfg = DecodeConfig(method="replug")
    with pytest.raises(InvalidScoreError):
        decode(QUESTION, docs, cfg, MockBackend(SPEC))


def test_methods_requiring_docs_reject_empty_list():
    cfg = DecodeConfig(method="leens")
    with pytest.raises(EmptyContextError):
        decode(QUESTION, [], cfg, MockBackend(SPEC))


def test_closed_book_needs_no_docs():
    cfg = DecodeConfig(method="closed_book", max_new_tokens=4)
    result = decode(QUESTION, [], cfg, MockBackend(SPEC))
    assert len(result.tokens) == 4


def test_fanout_threads_match_sequential_results():
    seq = DecodeConfig(method="clehe", beta=0.5, max_new_tokens=10, fanout_workers=0)
    par = DecodeConfig(method="clehe", beta=0.5, max_new_tokens=10, fanout_workers=4)
    backend = MockBackend(SPEC)
    a = decode(QUESTION, _docs(), seq, backend)
    b = decode(QUESTION, _docs(), par, backend)
    assert a.answer == b.answer
    assert a.tokens == b.tokens
    for sa, sb in zip(a.trace.steps, b.trace.steps):
        np.testing.assert_allclose(sa.weights, sb.weights, atol=0)


# -- stop on eos -----------------------------------------------------------

class _EosBackend(Backend):
    """Tiny 4-token backend that emits token 3 (eos) after two steps."""

    def meta(self):
        return BackendMeta(
            vocab_size=4, num_layers=1, max_context=128, name="eos-stub", eos_token_id=3
        )

    def tokenize(self, text):
        return [1] * max(1, len(text) // 8)

    def detokenize(self, ids):
        return "".join({0: "a", 1: "b", 2: "c", 3: "<eos>"}[i] for i in ids)

    def forward(self, tokens, layers=()):
        n = len(tokens)
        logits = np.zeros(4)
        target = 2 if n % 29 else 0
        if n > 40:
            target = 3
        logits[target] = 9.0
        return ForwardResponse(final=logits, per_layer={l: logits / 2 for l in layers})


def test_eos_token_stops_generation_uncommitted():
    cfg = DecodeConfig(method="naive", max_new_tokens=20)
    result = decode("q", [Document(content="lengthy context " * 20)], cfg, _EosBackend())
    assert result.stop_reason == "eos"
    assert 3 not in result.tokens


def test_eos_stop_can_be_disabled():
    cfg = DecodeConfig(method="naive", max_new_tokens=5, stop_on_eos=False, stop_on_newline=False)
    result = decode("q", [Document(content="lengthy context " * 20)], cfg, _EosBackend())
    assert result.stop_reason == "max_new_tokens"


# -- overflow policies -----------------------------------------------------

def _overflow_setup(policy, max_context=160, max_new_tokens=8):
    spec = MockModelSpec(triggers=(TRIG,), max_context=max_context)
    cfg = DecodeConfig(method="naive", overflow_policy=policy, max_new_tokens=max_new_tokens)
    docs = [Document(content="word " * 60, title="Long"), _docs()[0]]
    return cfg, docs, MockBackend(spec)


def test_overflow_skip_returns_skipped_result():
    cfg, docs, backend = _overflow_setup("skip")
    result = decode(QUESTION, docs, cfg, backend)
    assert result.skipped
    assert result.answer == ""
    assert result.stop_reason == "skipped_overflow"
    assert result.tokens == []


def test_overflow_error_policy_raises():
    cfg, docs, backend = _overflow_setup("error")
    with pytest.raises(ContextLengthError):
        decode(QUESTION, docs, cfg, backend)


def test_overflow_truncate_documents_fits_and_decodes():
    cfg, docs, backend = _overflow_setup("truncate_documents", max_context=400)
    result = decode(QUESTION, docs, cfg, backend)
    assert not result.skipped
    budget = backend.meta().max_context - cfg.max_new_tokens
    state = DecodeState(QUESTION, docs, cfg, backend)
    assert all(len(t) <= budget for t in state._active_prompts())


def test_prompt_within_budget_is_untouched():
    cfg = DecodeConfig(method="leens", overflow_policy="truncate_documents")
    state = DecodeState(QUESTION, _docs(), cfg, MockBackend(SPEC))
    assert [d.content for d in state.docs] == [d.content for d in _docs()]


def test_config_validation():
    with pytest.raises(ConfigurationError):
        DecodeConfig(method="beam")
    with pytest.raises(ConfigurationError):
        DecodeConfig(tau=0.0)
    with pytest.raises(ConfigurationError):
        DecodeConfig(beta=-1.0)
    with pytest.raises(ConfigurationError):
        DecodeConfig(max_new_tokens=0)
    with pytest.raises(ConfigurationError):
        DecodeConfig(overflow_policy="drop")


def test_commit_appends_to_all_prompts():
    cfg = DecodeConfig(method="clehe")
    state = DecodeState(QUESTION, _docs(), cfg, MockBackend(SPEC))
    before = [len(t) for t in state._active_prompts()]
    state.commit(65)
    after = [len(t) for t in state._active_prompts()]
    assert all(b + 1 == a for b, a in zip(before, after))
    assert state.committed == [65]

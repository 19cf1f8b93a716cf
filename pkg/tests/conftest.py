"""Shared fixtures plus the acceptance-criteria summary.

Tests marked ``@pytest.mark.acceptance("...")`` are collected into a
per-criterion PASS/FAIL table printed after the normal pytest summary, so a
reviewer can audit the headline guarantees at a glance.
"""

import random
import time

import pytest

from entrag.backend.mock import MockModelSpec, MockTrigger
from entrag.evaluation import QAExample
from entrag.prompting import Document

_ACCEPTANCE_RESULTS: dict[str, list[tuple[str, bool]]] = {}
_SUITE_T0 = time.monotonic()


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker:
            item.user_properties.append(("acceptance", marker.args[0]))


def pytest_runtest_logreport(report):
    for key, value in report.user_properties:
        if key != "acceptance":
            continue
        if report.when == "call" or (report.when == "setup" and report.failed):
            _ACCEPTANCE_RESULTS.setdefault(value, []).append(
                (report.nodeid, report.passed)
            )


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        outcomes = _ACCEPTANCE_RESULTS[name]
        ok = all(passed for _, passed in outcomes)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")
    elapsed = time.monotonic() - _SUITE_T0
    budget_ok = elapsed < 300.0
    tr.write_line(
        f"{'PASS' if budget_ok else 'FAIL'}  "
        f"suite runtime under 5 minutes ({elapsed:.1f}s)"
    )


# -- planted-trigger fixture corpus ----------------------------------------

_SYLLABLES = [
    "bal", "cor", "dun", "fel", "gor", "hai", "jin", "kel", "lor", "mav",
    "nor", "pra", "qui", "rus", "sel", "tor", "ulm", "vex", "wyn", "zan",
]


def _word(rng: random.Random, syllables: int = 2) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(syllables))


def _filler_sentence(rng: random.Random) -> str:
    return (
        f"The chronicle of {_word(rng).capitalize()} mentions the "
        f"{_word(rng)} trade and the old {_word(rng)} road in passing."
    )


def _pad_to(text: str, target: int, rng: random.Random) -> str:
    """Pad with filler, then cut to exactly target bytes (ASCII only here)."""
    while len(text.encode("utf-8")) < target:
        text += " " + _filler_sentence(rng)
    return text.encode("utf-8")[:target].decode("utf-8")


def make_planted_example(
    rng: random.Random,
    num_docs: int = 4,
    oracle_position: int = 0,
    content_bytes: int = 110,
    example_id: str = "ex",
) -> tuple[QAExample, MockTrigger]:
    """One QA example whose oracle document contains a unique trigger phrase.

    The trigger phrase never occurs in the question or the distractors, so
    only the oracle-conditioned prompt gets the low-entropy boost.
    """
    noun = _word(rng)
    place = _word(rng, 3).capitalize()
    answer = _word(rng, 3).capitalize()
    trigger = f"the {noun} of {place} is {answer}"
    question = f"What is the {noun} of {place}?"
    oracle_text = _pad_to(
        f"Ancient records agree that {trigger}, and every survey concurs.",
        content_bytes,
        rng,
    )
    docs = []
    for j in range(num_docs):
        if j == oracle_position:
            docs.append(
                Document(
                    content=oracle_text,
                    title=place,
                    retriever_score=float(num_docs - j),
                    is_oracle=True,
                )
            )
        else:
            docs.append(
                Document(
                    content=_pad_to(_filler_sentence(rng), content_bytes, rng),
                    title=_word(rng).capitalize(),
                    retriever_score=float(num_docs - j),
                )
            )
    example = QAExample(
        id=example_id,
        question=question,
        answers=(answer,),
        documents=tuple(docs),
    )
    return example, MockTrigger(trigger=trigger, answer=answer + "\n")


def make_planted_corpus(
    n: int,
    seed: int,
    num_docs: int = 4,
    content_bytes: int = 110,
    attention_window: int | None = None,
    mock_seed: int = 0,
) -> tuple[list[QAExample], MockModelSpec]:
    """n planted examples plus a mock spec holding all their triggers."""
    rng = random.Random(seed)
    examples, triggers = [], []
    for i in range(n):
        ex, trig = make_planted_example(
            rng,
            num_docs=num_docs,
            oracle_position=rng.randrange(num_docs),
            content_bytes=content_bytes,
            example_id=f"q{i:03d}",
        )
        examples.append(ex)
        triggers.append(trig)
    spec = MockModelSpec(
        seed=mock_seed,
        triggers=tuple(triggers),
        attention_window=attention_window,
    )
    return examples, spec


@pytest.fixture
def planted_corpus():
    return make_planted_corpus


@pytest.fixture
def small_corpus():
    return make_planted_corpus(5, seed=11)

"""Exact-match evaluation and the analysis harnesses built on it.

``run_eval`` scores a JSONL dataset of questions with retrieved documents.
``position_sweep`` measures sensitivity to where the gold document sits in
the prompt.  ``first_token_entropy_gap`` checks that the gold document
yields the most confident first-token distribution.  ``layer_entropy_profile``
maps how contrast quality varies with the chosen projection layer.
"""

import dataclasses
import json
import logging
import re
import string
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .backend import Backend
from .contrast import LayerStrategy
from .decoder import DecodeConfig, DecodeState, decode
from .errors import BackendError, DecodingError, IngestionError, LabelingError
from .prompting import Document

__all__ = [
    "normalize_answer",
    "exact_match",
    "QAExample",
    "load_dataset",
    "ExampleRecord",
    "EvalReport",
    "run_eval",
    "position_sweep",
    "first_token_entropy_gap",
    "layer_entropy_profile",
]

logger = logging.getLogger(__name__)

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    text = text.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, answers: Sequence[str]) -> bool:
    """True if the normalized prediction equals any normalized reference."""
    norm = normalize_answer(prediction)
    return any(norm == normalize_answer(a) for a in answers)


@dataclass(frozen=True)
class QAExample:
    id: str
    question: str
    answers: tuple[str, ...]
    documents: tuple[Document, ...]


def _parse_document(obj: dict, where: str) -> Document:
    if not isinstance(obj, dict):
        raise IngestionError(f"{where}: document entry is not an object")
    text = obj.get("text", obj.get("content"))
    if not isinstance(text, str) or not text:
        raise IngestionError(f"{where}: document needs a non-empty 'text' field")
    title = obj.get("title")
    if title is not None and not isinstance(title, str):
        raise IngestionError(f"{where}: document 'title' must be a string")
    score = obj.get("score")
    if score is not None:
        try:
            score = float(score)
        except (TypeError, ValueError):
            raise IngestionError(f"{where}: document 'score' must be a number") from None
    return Document(
        content=text,
        title=title,
        retriever_score=score,
        is_oracle=bool(obj.get("is_oracle", False)),
    )


def load_dataset(path: str) -> list[QAExample]:
    """Read a JSONL file of examples; errors carry the offending line number."""
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{where}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise IngestionError(f"{where}: line is not a JSON object")
            for key in ("question", "answers", "documents"):
                if key not in obj:
                    raise IngestionError(f"{where}: missing field {key!r}")
            answers = obj["answers"]
            if (
                not isinstance(answers, list)
                or not answers
                or not all(isinstance(a, str) for a in answers)
            ):
                raise IngestionError(f"{where}: 'answers' must be a non-empty string list")
            docs_raw = obj["documents"]
            if not isinstance(docs_raw, list):
                raise IngestionError(f"{where}: 'documents' must be a list")
            docs = tuple(_parse_document(d, where) for d in docs_raw)
            examples.append(
                QAExample(
                    id=str(obj.get("id", lineno)),
                    question=str(obj["question"]),
                    answers=tuple(answers),
                    documents=docs,
                )
            )
    return examples


@dataclass
class ExampleRecord:
    id: str
    question: str
    prediction: str
    answers: tuple[str, ...]
    em: Optional[bool]
    stop_reason: str
    skipped: bool
    num_docs_used: int
    trace: Optional[list[dict]] = None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "question": self.question,
            "prediction": self.prediction,
            "answers": list(self.answers),
            "em": self.em,
            "stop_reason": self.stop_reason,
            "skipped": self.skipped,
            "num_docs_used": self.num_docs_used,
        }
        if self.trace is not None:
            d["trace"] = self.trace
        return d


@dataclass
class EvalReport:
    records: list[ExampleRecord]
    config: dict
    wall_clock_seconds: float = 0.0

    @property
    def num_total(self) -> int:
        return len(self.records)

    @property
    def num_skipped(self) -> int:
        return sum(1 for r in self.records if r.skipped)

    @property
    def num_scored(self) -> int:
        return self.num_total - self.num_skipped

    @property
    def em_percent(self) -> Optional[float]:
        """Mean EM over scored examples as a percentage, 2 decimals; None if none scored."""
        scored = [r for r in self.records if not r.skipped]
        if not scored:
            return None
        return round(100.0 * sum(bool(r.em) for r in scored) / len(scored), 2)

    def aggregate_dict(self) -> dict:
        return {
            "em": self.em_percent,
            "em_defined": self.num_scored > 0,
            "num_total": self.num_total,
            "num_scored": self.num_scored,
            "num_skipped": self.num_skipped,
            "wall_clock_seconds": round(self.wall_clock_seconds, 3),
            "config": self.config,
        }

    def write(self, records_path: str, aggregate_path: Optional[str] = None) -> None:
        with open(records_path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
        if aggregate_path:
            with open(aggregate_path, "w", encoding="utf-8") as fh:
                json.dump(self.aggregate_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")


def run_eval(
    examples: Sequence[QAExample],
    cfg: DecodeConfig,
    backend: Backend,
    top_k: Optional[int] = None,
    keep_traces: bool = False,
    run_config: Optional[dict] = None,
) -> EvalReport:
    """Decode every example and score with exact match.

    Records follow dataset order.  Examples skipped under the overflow policy
    count toward ``num_skipped`` and are excluded from the aggregate mean.
    """
    started = time.monotonic()
    records = []
    for ex in examples:
        docs = list(ex.documents)
        if top_k is not None:
            if len(docs) < top_k:
                logger.warning(
                    "example %s has %d documents, fewer than top_k=%d",
                    ex.id, len(docs), top_k,
                )
            docs = docs[:top_k]
        try:
            result = decode(ex.question, docs, cfg, backend)
        except (BackendError, DecodingError) as exc:
            raise type(exc)(f"example {ex.id}: {exc}") from exc
        records.append(
            ExampleRecord(
                id=ex.id,
                question=ex.question,
                prediction=result.answer,
                answers=ex.answers,
                em=None if result.skipped else exact_match(result.answer, ex.answers),
                stop_reason=result.stop_reason,
                skipped=result.skipped,
                num_docs_used=len(docs),
                trace=result.trace.to_dicts() if keep_traces else None,
            )
        )
    report = EvalReport(
        records=records,
        config=dict(run_config) if run_config else cfg.to_dict(),
        wall_clock_seconds=time.monotonic() - started,
    )
    return report


def _find_sole_oracle(ex: QAExample) -> int:
    oracle_positions = [j for j, d in enumerate(ex.documents) if d.is_oracle]
    if len(oracle_positions) != 1:
        raise LabelingError(
            f"example {ex.id}: expected exactly one oracle document, "
            f"found {len(oracle_positions)}"
        )
    if len(ex.documents) < 2:
        raise LabelingError(f"example {ex.id}: need at least one distractor document")
    return oracle_positions[0]


def _with_oracle_at(ex: QAExample, position: int) -> QAExample:
    """Reorder documents so the oracle sits at 0-based ``position``."""
    src = _find_sole_oracle(ex)
    docs = list(ex.documents)
    oracle = docs.pop(src)
    docs.insert(position, oracle)
    return replace(ex, documents=tuple(docs))


def position_sweep(
    examples: Sequence[QAExample],
    cfg: DecodeConfig,
    backend: Backend,
    run_config: Optional[dict] = None,
) -> dict:
    """EM at each oracle position 1..K; every example must have one oracle."""
    k = min(len(ex.documents) for ex in examples)
    if any(len(ex.documents) != k for ex in examples):
        logger.warning("examples have unequal document counts; sweeping first %d positions", k)
    per_position = {}
    for pos in range(k):
        moved = [_with_oracle_at(ex, pos) for ex in examples]
        report = run_eval(moved, cfg, backend, run_config=run_config)
        per_position[pos + 1] = report.em_percent
    return {
        "method": cfg.method,
        "num_positions": k,
        "em_by_position": per_position,
        "config": dict(run_config) if run_config else cfg.to_dict(),
    }


def first_token_entropy_gap(
    examples: Sequence[QAExample],
    cfg: DecodeConfig,
    backend: Backend,
) -> list[dict]:
    """Per example: first-step entropy of the oracle-conditioned distribution
    minus the mean over distractor-conditioned ones.  Negative gaps mean the
    oracle document makes the model more confident.
    """
    probe_cfg = dataclasses.replace(cfg, method="leens")
    out = []
    for ex in examples:
        oracle_idx = _find_sole_oracle(ex)
        state = DecodeState(ex.question, list(ex.documents), probe_cfg, backend)
        if state.skipped:
            out.append({"id": ex.id, "skipped": True, "gap": None})
            continue
        try:
            _, info = state.step_distribution()
        finally:
            state.close()
        entropies = info.doc_entropies
        h_oracle = entropies[oracle_idx]
        h_rest = [h for j, h in enumerate(entropies) if j != oracle_idx]
        gap = h_oracle - float(np.mean(h_rest))
        out.append(
            {
                "id": ex.id,
                "skipped": False,
                "oracle_entropy": h_oracle,
                "mean_distractor_entropy": float(np.mean(h_rest)),
                "gap": gap,
            }
        )
    return out


def layer_entropy_profile(
    examples: Sequence[QAExample],
    cfg: DecodeConfig,
    backend: Backend,
    layers: Sequence[int],
) -> list[dict]:
    """Decode with the contrast layer pinned to each candidate in turn.

    Returns, per layer, the EM and the mean per-step entropy of the final
    distributions actually sampled from.
    """
    out = []
    for layer in layers:
        pinned = dataclasses.replace(
            cfg, method="clehe", layer_strategy=LayerStrategy.fixed(layer)
        )
        report = run_eval(examples, pinned, backend, keep_traces=True)
        step_entropies = [
            s["entropy"]
            for r in report.records
            if r.trace is not None
            for s in r.trace
        ]
        out.append(
            {
                "layer": int(layer),
                "em": report.em_percent,
                "mean_step_entropy": float(np.mean(step_entropies)) if step_entropies else None,
                "num_steps": len(step_entropies),
            }
        )
    return out

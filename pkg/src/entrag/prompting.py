"""Prompt construction for per-document, concatenated, and closed-book decoding.

Layout is normative: instruction, document block, and question block are
separated by exactly one blank line, and every prompt ends with ``Answer:``
with no trailing newline, so generated continuations start immediately after
the colon and are position-comparable across the per-document prompts.
"""

from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

from .errors import EmptyContextError, PromptError

__all__ = [
    "Document",
    "PromptTemplate",
    "DEFAULT_TEMPLATE",
    "build_parallel_prompt",
    "build_concat_prompt",
    "build_closed_book_prompt",
]

DEFAULT_INSTRUCTION = (
    "Write a high-quality answer for the given question "
    "using only the provided search results."
)


@dataclass(frozen=True)
class Document:
    """One retrieved passage.

    ``retriever_score`` feeds score-based weighting when present;
    ``is_oracle`` is an evaluation-only label and never reaches a prompt.
    """

    content: str
    title: Optional[str] = None
    retriever_score: Optional[float] = None
    is_oracle: bool = False

    def __post_init__(self):
        if not self.content:
            raise PromptError("document content must be non-empty")


@dataclass(frozen=True)
class PromptTemplate:
    """Format strings for each prompt part; all overridable via config."""

    instruction: str = DEFAULT_INSTRUCTION
    doc_titled: str = "Document (Title: {title}) {content}"
    doc_untitled: str = "Document: {content}"
    doc_indexed_titled: str = "Document [{index}] (Title: {title}) {content}"
    doc_indexed_untitled: str = "Document [{index}]: {content}"
    question_block: str = "Question: {question}\nAnswer:"

    def __post_init__(self):
        if "{question}" not in self.question_block:
            raise PromptError("question_block must contain a {question} slot")
        if self.question_block.endswith("\n"):
            raise PromptError("question_block must not end with a newline")

    def with_overrides(self, overrides: dict) -> "PromptTemplate":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise PromptError(f"unknown template fields: {sorted(unknown)}")
        return replace(self, **overrides)


DEFAULT_TEMPLATE = PromptTemplate()


def _question_part(question: str, template: PromptTemplate) -> str:
    if not question:
        raise PromptError("question must be non-empty")
    return template.question_block.format(question=question)


def _doc_line(doc: Document, template: PromptTemplate, index: Optional[int] = None) -> str:
    if index is None:
        if doc.title:
            return template.doc_titled.format(title=doc.title, content=doc.content)
        return template.doc_untitled.format(content=doc.content)
    if doc.title:
        return template.doc_indexed_titled.format(
            index=index, title=doc.title, content=doc.content
        )
    return template.doc_indexed_untitled.format(index=index, content=doc.content)


def build_parallel_prompt(
    doc: Document, question: str, template: PromptTemplate = DEFAULT_TEMPLATE
) -> str:
    """Prompt conditioning on a single document (no index brackets)."""
    return "\n\n".join(
        [template.instruction, _doc_line(doc, template), _question_part(question, template)]
    )


def build_concat_prompt(
    docs: Sequence[Document], question: str, template: PromptTemplate = DEFAULT_TEMPLATE
) -> str:
    """Prompt concatenating all documents, enumerated [1..K] in given order."""
    if len(docs) == 0:
        raise EmptyContextError("concatenated prompt needs at least one document")
    block = "\n".join(
        _doc_line(doc, template, index=i) for i, doc in enumerate(docs, start=1)
    )
    return "\n\n".join([template.instruction, block, _question_part(question, template)])


def build_closed_book_prompt(
    question: str, template: PromptTemplate = DEFAULT_TEMPLATE
) -> str:
    """No-context prompt: instruction and question only.

    Keeps the instruction line so the only difference from the with-context
    prompts is the missing document block.
    """
    return "\n\n".join([template.instruction, _question_part(question, template)])

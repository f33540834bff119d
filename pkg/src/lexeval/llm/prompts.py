"""Multiple-choice tasks and the two prompt templates."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Sequence

NONE_ID = "NONE"
NONE_TEXT = "None of the other options"

SEMANTIC = "semantic"
WORDLEVEL = "wordlevel"
SENTENCE = "sentence"
ESSAY = "essay"


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class McqOption:
    option_id: str
    definition: str
    info: str = ""
    pos: str = ""

    @classmethod
    def from_entry(cls, entry) -> "McqOption":
        return cls(entry.id, entry.definition, entry.info, entry.pos)


NONE_OPTION = McqOption(NONE_ID, NONE_TEXT)


@dataclass(frozen=True)
class McqTask:
    context: str
    target: str
    options: tuple[McqOption, ...]
    template: str = WORDLEVEL
    context_mode: str = SENTENCE
    target_span: tuple[int, int] | None = None
    label_style: str = "number"
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        ids = [o.option_id for o in self.options]
        if len(set(ids)) != len(ids):
            raise PromptError("option ids must be distinct")
        if self.template == SEMANTIC:
            if NONE_ID in ids:
                raise PromptError("semantic tasks cannot offer the none option")
            if not 2 <= len(ids) <= 26:
                raise PromptError(f"semantic tasks need 2..26 options, got {len(ids)}")
        elif self.template == WORDLEVEL:
            if ids.count(NONE_ID) != 1 or ids[-1] != NONE_ID:
                raise PromptError("word-level tasks need exactly one none option, placed last")
            if self.label_style == "letter" and len(ids) > 26:
                raise PromptError("too many options for letter labels")
        else:
            raise PromptError(f"unknown template {self.template!r}")
        if self.context_mode not in (SENTENCE, ESSAY):
            raise PromptError(f"unknown context mode {self.context_mode!r}")
        if self.label_style not in ("number", "letter"):
            raise PromptError(f"unknown label style {self.label_style!r}")

    @property
    def n_options(self) -> int:
        return len(self.options)

    @property
    def option_ids(self) -> tuple[str, ...]:
        return tuple(o.option_id for o in self.options)

    def labels(self) -> tuple[str, ...]:
        """Positional labels: letters for semantic tasks, numbers otherwise."""
        if self.template == SEMANTIC or self.label_style == "letter":
            return tuple(string.ascii_uppercase[: self.n_options])
        return tuple(str(i) for i in range(1, self.n_options + 1))


def _check_order(task: McqTask, order: Sequence[int] | None) -> tuple[int, ...]:
    if order is None:
        return tuple(range(task.n_options))
    order = tuple(order)
    if sorted(order) != list(range(task.n_options)):
        raise PromptError(f"{order} is not a permutation of {task.n_options} options")
    return order


def _enumerate_letters(labels: Sequence[str]) -> str:
    if len(labels) == 2:
        return f"{labels[0]} or {labels[1]}"
    return ", ".join(labels[:-1]) + f", or {labels[-1]}"


def build_semantic_prompt(task: McqTask, order: Sequence[int] | None = None) -> str:
    if task.template != SEMANTIC:
        raise PromptError("not a semantic task")
    order = _check_order(task, order)
    labels = task.labels()
    head = (
        f'Read this sentence: "{task.context}" Choose the correct meaning of "{task.target}" '
        f"by selecting the most suitable among the following options {_enumerate_letters(labels)}. "
        "No other answer is allowed. Only output the respective option letter without any "
        "additional comments, notes, or explanations."
    )
    lines = [f"{lab}) {task.options[k].definition}" for lab, k in zip(labels, order)]
    return head + "\n\n" + "\n".join(lines)


def highlight(context: str, target: str, span: tuple[int, int] | None = None) -> str:
    """Wrap the target occurrence in square brackets."""
    if span is not None:
        start, end = span
        if not (0 <= start < end <= len(context)) or context[start:end] != target:
            raise PromptError(f"span {span} does not hold {target!r} in the context")
    else:
        m = re.search(rf"(?<!\w){re.escape(target)}(?!\w)", context, flags=re.IGNORECASE)
        if m is None:
            raise PromptError(f"target {target!r} not found in context")
        start, end = m.span()
    return f"{context[:start]}[{context[start:end]}]{context[end:]}"


def build_wordlevel_prompt(task: McqTask, order: Sequence[int] | None = None) -> str:
    if task.template != WORDLEVEL:
        raise PromptError("not a word-level task")
    order = _check_order(task, order)
    if order[-1] != task.n_options - 1:
        raise PromptError("the none option must stay in the last position")
    labels = task.labels()
    unit = task.context_mode  # "sentence" or "essay"
    kind = "letter" if task.label_style == "letter" else "number"
    head = (
        f"Read this L2 learner {unit}: {highlight(task.context, task.target, task.target_span)}\n\n"
        f'Choose the correct meaning of "{task.target}" (in square brackets) by selecting the most '
        "suitable among the following options. Also consider the additional information and the "
        "part of speech of each option. No other answer is allowed. Only output the respective "
        f"option {kind} without any additional comments, notes, or explanations."
    )
    lines = []
    for lab, k in zip(labels, order):
        opt = task.options[k]
        if opt.option_id == NONE_ID:
            lines.append(f"{lab}) {NONE_TEXT}")
        else:
            lines.append(f"{lab}) {opt.definition} - Additional information: {opt.info} (Part of speech: {opt.pos})")
    return head + "\n\n" + "\n".join(lines)


def build_prompt(task: McqTask, order: Sequence[int] | None = None) -> str:
    if task.template == SEMANTIC:
        return build_semantic_prompt(task, order)
    return build_wordlevel_prompt(task, order)

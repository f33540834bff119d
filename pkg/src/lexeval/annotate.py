"""Token-level CEFR annotation: LLM disambiguation and two baselines."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from lexeval.levels import NA, PUNCT, STOPWORD, WORD_LABELS
from lexeval.lexicon import Lexicon, LexEntry, ambiguity_class, lookup_candidates
from lexeval.llm.backends import Backend
from lexeval.llm.prompts import ESSAY, NONE_ID, NONE_OPTION, SENTENCE, WORDLEVEL, McqOption, McqTask
from lexeval.llm.scoring import OptionDistribution, PermutationPolicy, score_with_permutations, select
from lexeval.textproc import CONTENT, PUNCTUATION, STOPWORD_CLASS, AnalyzedDocument, Token

METHODS = ("llm", "pos", "random")


class AnnotationError(RuntimeError):
    """Annotation of a document failed; ``partial`` holds what was finished."""

    def __init__(self, message: str, partial: list | None = None):
        super().__init__(message)
        self.partial = partial or []


@dataclass(frozen=True)
class WordAnnotation:
    doc_id: str
    sentence_index: int
    token_index: int
    surface: str
    lemma: str
    label: str
    method: str
    ambiguity: str
    entry_id: str | None = None
    probs: OptionDistribution | None = None

    def __post_init__(self):
        if self.label not in WORD_LABELS:
            raise ValueError(f"invalid label {self.label!r}")
        if (self.entry_id is None) != (self.label in (NA, STOPWORD, PUNCT)):
            raise ValueError(f"entry_id must be set exactly for level labels (got {self.label}, {self.entry_id})")

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "sentence_index": self.sentence_index,
            "token_index": self.token_index,
            "surface": self.surface,
            "lemma": self.lemma,
            "label": self.label,
            "entry_id": self.entry_id,
            "method": self.method,
            "ambiguity": self.ambiguity,
            "probs": None if self.probs is None else self.probs.to_dict(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "WordAnnotation":
        probs = rec.get("probs")
        dist = OptionDistribution(dict(probs["probs"]), int(probs["permutations_used"])) if probs else None
        return cls(
            rec["doc_id"], int(rec["sentence_index"]), int(rec["token_index"]), rec["surface"], rec["lemma"],
            rec["label"], rec["method"], rec["ambiguity"], rec.get("entry_id"), dist,
        )


def _token(doc: AnalyzedDocument, position: tuple[int, int]) -> Token:
    si, ti = position
    return doc.sentences[si][ti]


def _make(doc, position, tok, label, method, lexicon, entry: LexEntry | None = None, probs=None) -> WordAnnotation:
    return WordAnnotation(
        doc.doc_id, position[0], position[1], tok.surface, tok.lemma, label, method,
        ambiguity_class(lexicon, tok.lemma, tok.pos), entry.id if entry is not None else None, probs,
    )


def _require_content(tok: Token) -> None:
    if tok.klass != CONTENT:
        raise ValueError(f"token {tok.surface!r} is not a content word")


# -- the three methods ---------------------------------------------------------


def build_word_task(
    doc: AnalyzedDocument,
    position: tuple[int, int],
    candidates: Sequence[LexEntry],
    context_mode: str = SENTENCE,
    label_style: str = "number",
) -> McqTask:
    tok = _token(doc, position)
    if context_mode == ESSAY:
        context, offset = doc.source_text, 0
    elif context_mode == SENTENCE:
        context, offset = doc.sentence_text(position[0])
    else:
        raise ValueError(f"unknown context mode {context_mode!r}")
    span = (tok.char_span[0] - offset, tok.char_span[1] - offset)
    meta = {"position": position, "doc_id": doc.doc_id}
    if doc.gold_labels is not None:
        meta["gold_label"] = doc.gold_labels[position[0]][position[1]]
    options = tuple(McqOption.from_entry(e) for e in candidates) + (NONE_OPTION,)
    return McqTask(context, tok.surface, options, WORDLEVEL, context_mode, span, label_style, meta)


def annotate_word_llm(
    doc: AnalyzedDocument,
    position: tuple[int, int],
    lexicon: Lexicon,
    backend: Backend,
    policy: PermutationPolicy = PermutationPolicy(),
    context_mode: str = SENTENCE,
    label_style: str = "number",
    max_workers: int = 1,
) -> WordAnnotation:
    tok = _token(doc, position)
    _require_content(tok)
    # every candidate goes to the model, PoS-mismatched ones included
    candidates = lookup_candidates(lexicon, tok.lemma)
    if not candidates:
        return _make(doc, position, tok, NA, "llm", lexicon)
    task = build_word_task(doc, position, candidates, context_mode, label_style)
    try:
        dist = score_with_permutations(backend, task, policy, max_workers)
    except Exception as exc:
        raise AnnotationError(f"{doc.doc_id}[{position[0]}:{position[1]}] {tok.surface!r}: {exc}") from exc
    choice = select(dist)
    if choice == NONE_ID:
        return _make(doc, position, tok, NA, "llm", lexicon, probs=dist)
    entry = lexicon[choice]
    return _make(doc, position, tok, entry.level.name, "llm", lexicon, entry, dist)


def pos_baseline_entry(candidates: Sequence[LexEntry], pos: str) -> LexEntry | None:
    """Entry whose level the PoS baseline assigns (the first at the minimum level)."""
    if not candidates:
        return None
    if len(candidates) == 1:
        return candidates[0]
    pool = [c for c in candidates if c.pos == pos] or list(candidates)
    return min(pool, key=lambda c: c.level)


def annotate_word_pos(doc: AnalyzedDocument, position: tuple[int, int], lexicon: Lexicon) -> WordAnnotation:
    tok = _token(doc, position)
    _require_content(tok)
    entry = pos_baseline_entry(lookup_candidates(lexicon, tok.lemma), tok.pos)
    if entry is None:
        return _make(doc, position, tok, NA, "pos", lexicon)
    return _make(doc, position, tok, entry.level.name, "pos", lexicon, entry)


def annotate_word_random(
    doc: AnalyzedDocument, position: tuple[int, int], lexicon: Lexicon, rng: np.random.Generator
) -> WordAnnotation:
    tok = _token(doc, position)
    _require_content(tok)
    candidates = lookup_candidates(lexicon, tok.lemma)
    if not candidates:
        return _make(doc, position, tok, NA, "random", lexicon)
    entry = candidates[0] if len(candidates) == 1 else candidates[int(rng.integers(len(candidates)))]
    return _make(doc, position, tok, entry.level.name, "random", lexicon, entry)


# -- documents -----------------------------------------------------------------


def annotate_document(
    doc: AnalyzedDocument,
    method: str,
    lexicon: Lexicon,
    backend: Backend | None = None,
    policy: PermutationPolicy = PermutationPolicy(),
    rng: np.random.Generator | None = None,
    context_mode: str = SENTENCE,
    max_workers: int = 1,
    label_style: str = "number",
) -> list[WordAnnotation]:
    """One annotation per token, in document order.

    Stopwords and punctuation are labelled without consulting the lexicon or
    the backend. For ``method="llm"`` content tokens may be scored
    concurrently; the first failure raises :class:`AnnotationError` with the
    finished annotations attached as ``partial``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == "llm" and backend is None:
        raise ValueError("the llm method needs a backend")
    if method == "random" and rng is None:
        raise ValueError("the random method needs a seeded generator")

    positions = [(si, ti) for si, ti, _ in doc.tokens()]
    out: dict[tuple[int, int], WordAnnotation] = {}
    pending = []
    for pos in positions:
        tok = _token(doc, pos)
        if tok.klass == STOPWORD_CLASS:
            out[pos] = WordAnnotation(doc.doc_id, *pos, tok.surface, tok.lemma, STOPWORD, method, "unknown")
        elif tok.klass == PUNCTUATION:
            out[pos] = WordAnnotation(doc.doc_id, *pos, tok.surface, tok.lemma, PUNCT, method, "unknown")
        elif method == "pos":
            out[pos] = annotate_word_pos(doc, pos, lexicon)
        elif method == "random":
            out[pos] = annotate_word_random(doc, pos, lexicon, rng)
        else:
            pending.append(pos)

    def ordered() -> list[WordAnnotation]:
        return [out[p] for p in positions if p in out]

    if pending:
        def run(pos):
            return annotate_word_llm(doc, pos, lexicon, backend, policy, context_mode, label_style)

        try:
            if max_workers > 1:
                with ThreadPoolExecutor(max_workers=max_workers) as pool:
                    futures = {pos: pool.submit(run, pos) for pos in pending}
                    for pos in pending:
                        exc = futures[pos].exception()
                        if exc is not None:
                            for f in futures.values():
                                f.cancel()
                            raise exc
                        out[pos] = futures[pos].result()
            else:
                for pos in pending:
                    out[pos] = run(pos)
        except AnnotationError as exc:
            raise AnnotationError(str(exc), ordered()) from exc.__cause__
    return ordered()


def document_rng(seed: int, doc_id: str) -> np.random.Generator:
    """Per-document generator so results do not depend on corpus order."""
    return np.random.default_rng([seed, *doc_id.encode("utf-8")])


# -- IO ------------------------------------------------------------------------


def write_annotations(annotations: Iterable[WordAnnotation], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in annotations:
            fh.write(json.dumps(a.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def read_annotations(path: str | os.PathLike) -> list[WordAnnotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(WordAnnotation.from_record(json.loads(line)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def group_by_document(annotations: Iterable[WordAnnotation]) -> dict[str, list[WordAnnotation]]:
    groups: dict[str, list[WordAnnotation]] = {}
    for a in annotations:
        groups.setdefault(a.doc_id, []).append(a)
    return groups

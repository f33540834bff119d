"""Graded lexicon: parsing, indexing, candidate lookup and polysemy statistics.

Lexicon files hold one JSON object per line::

    {"id": "push-v-persuade", "head": "push", "pos": "verb",
     "guideword": "PERSUADE", "level": "C2", "definition": "...",
     "phrase": "push (sb) for sth/to do sth"}

``level`` may also be a list of labels; such a row is split into one entry
per level with ids suffixed ``@<level>``.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from lexeval.levels import CefrLevel
from lexeval.textproc import LEXICON_POS, RuleAnalyzer, _is_punct, load_stopwords

AMBIGUOUS = "ambiguous"
NON_AMBIGUOUS = "non_ambiguous"
UNKNOWN = "unknown"

# Pattern placeholders in phrase strings, never used as reference words.
PLACEHOLDERS = frozenset({"sb", "sth", "sw", "swh", "someone", "something", "somewhere", "one's", "etc"})

_REQUIRED = ("id", "head", "pos", "level", "definition")
_OPTIONAL = ("guideword", "phrase", "ref_words", "learner_example", "dictionary_example", "topic")


class LexiconError(ValueError):
    pass


@dataclass(frozen=True)
class LexEntry:
    id: str
    head: str
    pos: str
    guideword: str
    level: CefrLevel
    definition: str
    phrase: str | None = None
    ref_words: tuple[str, ...] = ()
    learner_example: str | None = None
    dictionary_example: str | None = None
    topic: str | None = None

    @property
    def example(self) -> str | None:
        """Learner example if present, else the dictionary example."""
        return self.learner_example or self.dictionary_example

    @property
    def info(self) -> str:
        """Short disambiguating text: the phrase (or head) plus guideword."""
        base = self.phrase or self.head
        return f"{base} ({self.guideword})" if self.guideword else base

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "head": self.head,
            "pos": self.pos,
            "guideword": self.guideword,
            "level": self.level.name,
            "definition": self.definition,
        }
        if self.phrase is not None:
            rec["phrase"] = self.phrase
        rec["ref_words"] = list(self.ref_words)
        for key in ("learner_example", "dictionary_example", "topic"):
            value = getattr(self, key)
            if value is not None:
                rec[key] = value
        return rec


@dataclass(frozen=True)
class Lexicon:
    entries: tuple[LexEntry, ...]
    source: str = field(default="", compare=False)
    version: str = field(default="", compare=False)
    index: dict[str, tuple[str, ...]] = field(default_factory=dict, compare=False, init=False, repr=False)
    _by_id: dict[str, LexEntry] = field(default_factory=dict, compare=False, init=False, repr=False)

    def __post_init__(self) -> None:
        index: dict[str, list[str]] = defaultdict(list)
        by_id: dict[str, LexEntry] = {}
        for entry in self.entries:
            if entry.id in by_id:
                raise LexiconError(f"duplicate id {entry.id!r}")
            by_id[entry.id] = entry
            for word in entry.ref_words:
                index[word].append(entry.id)
        object.__setattr__(self, "index", {k: tuple(v) for k, v in index.items()})
        object.__setattr__(self, "_by_id", by_id)
        if not self.version:
            digest = hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()[:12]
            object.__setattr__(self, "version", digest)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, entry_id: str) -> LexEntry:
        return self._by_id[entry_id]

    def lookup(self, lemma: str) -> list[LexEntry]:
        return [self._by_id[i] for i in self.index.get(lemma, ())]

    def pos_vocabulary(self) -> dict[str, set[str]]:
        """lemma -> parts of speech of its candidate entries (analyzer hint)."""
        vocab: dict[str, set[str]] = defaultdict(set)
        for lemma, ids in self.index.items():
            for i in ids:
                vocab[lemma].add(self._by_id[i].pos)
        return dict(vocab)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_record(), ensure_ascii=False) + "\n" for e in self.entries)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())


def default_ref_words(head: str, phrase: str | None, analyzer: RuleAnalyzer | None = None) -> tuple[str, ...]:
    words = [head.lower()]
    if phrase:
        analyzer = analyzer or RuleAnalyzer()
        stopwords = load_stopwords()
        for sent in analyzer.analyze(phrase):
            for surface, lemma, _pos, _s, _e in sent:
                low = surface.lower()
                if _is_punct(surface) or low in stopwords or low in PLACEHOLDERS:
                    continue
                lemma = lemma.lower()
                if lemma in stopwords or lemma in PLACEHOLDERS:
                    continue
                if lemma not in words:
                    words.append(lemma)
    return tuple(words)


def _opt_str(rec: dict, key: str, where: str) -> str | None:
    value = rec.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise LexiconError(f"{where}: field {key!r} must be a string")
    return value


def _entries_from_record(rec: dict, where: str, analyzer: RuleAnalyzer) -> list[LexEntry]:
    if not isinstance(rec, dict):
        raise LexiconError(f"{where}: record is not a JSON object")
    missing = [k for k in _REQUIRED if k not in rec]
    if missing:
        raise LexiconError(f"{where}: missing field(s) {', '.join(missing)}")
    unknown = set(rec) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise LexiconError(f"{where}: unknown field(s) {', '.join(sorted(unknown))}")
    for key in ("id", "head", "pos", "definition"):
        if not isinstance(rec[key], str) or not rec[key].strip():
            raise LexiconError(f"{where}: field {key!r} must be a nonempty string")
    pos = rec["pos"].strip().lower()
    if pos not in LEXICON_POS:
        raise LexiconError(f"{where}: unknown PoS tag {rec['pos']!r}")
    raw_levels = rec["level"] if isinstance(rec["level"], list) else [rec["level"]]
    if not raw_levels:
        raise LexiconError(f"{where}: empty level list")
    try:
        levels = [CefrLevel.parse(lv) for lv in raw_levels]
    except ValueError as exc:
        raise LexiconError(f"{where}: {exc}") from None
    head = rec["head"].strip()
    phrase = _opt_str(rec, "phrase", where)
    if rec.get("ref_words") is not None:
        refs = rec["ref_words"]
        if not isinstance(refs, list) or not all(isinstance(w, str) and w.strip() for w in refs):
            raise LexiconError(f"{where}: ref_words must be a list of nonempty strings")
        ref_words = [w.strip().lower() for w in refs]
        if head.lower() not in ref_words:
            ref_words.insert(0, head.lower())
        ref_words = tuple(dict.fromkeys(ref_words))
    else:
        ref_words = default_ref_words(head, phrase, analyzer)
    base = dict(
        head=head,
        pos=pos,
        guideword=_opt_str(rec, "guideword", where) or "",
        definition=rec["definition"],
        phrase=phrase,
        ref_words=ref_words,
        learner_example=_opt_str(rec, "learner_example", where),
        dictionary_example=_opt_str(rec, "dictionary_example", where),
        topic=_opt_str(rec, "topic", where),
    )
    if len(levels) == 1:
        return [LexEntry(id=rec["id"], level=levels[0], **base)]
    return [LexEntry(id=f"{rec['id']}@{lv.name}", level=lv, **base) for lv in dict.fromkeys(levels)]


def parse_lexicon_lines(lines: Iterable[str], source: str = "<lexicon>") -> Lexicon:
    analyzer = RuleAnalyzer()
    entries: list[LexEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        where = f"{source}:{lineno}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LexiconError(f"{where}: malformed record ({exc.msg})") from None
        for entry in _entries_from_record(rec, where, analyzer):
            if entry.id in seen:
                raise LexiconError(f"{where}: duplicate id {entry.id!r}")
            seen.add(entry.id)
            entries.append(entry)
    return Lexicon(tuple(entries), source=source)


def parse_lexicon(source: str | os.PathLike) -> Lexicon:
    with open(source, encoding="utf-8") as fh:
        return parse_lexicon_lines(fh, source=os.fspath(source))


def sample_lexicon() -> Lexicon:
    """The small bundled lexicon used by tests and demos."""
    from importlib import resources

    text = resources.files("lexeval").joinpath("data", "sample_lexicon.jsonl").read_text(encoding="utf-8")
    return parse_lexicon_lines(text.splitlines(), source="sample_lexicon.jsonl")


def lookup_candidates(lexicon: Lexicon, lemma: str) -> list[LexEntry]:
    return lexicon.lookup(lemma)


def _spans_levels(entries: Iterable[LexEntry]) -> bool:
    return len({e.level for e in entries}) > 1


def ambiguity_class(lexicon: Lexicon, lemma: str, pos: str | None = None) -> str:
    cands = lexicon.lookup(lemma)
    if not cands:
        return UNKNOWN
    if pos is not None:
        return AMBIGUOUS if _spans_levels(c for c in cands if c.pos == pos) else NON_AMBIGUOUS
    groups: dict[str, list[LexEntry]] = defaultdict(list)
    for c in cands:
        groups[c.pos].append(c)
    return AMBIGUOUS if any(_spans_levels(g) for g in groups.values()) else NON_AMBIGUOUS


@dataclass(frozen=True)
class LexiconStats:
    entry_count: int
    unique_word_count: int
    polysemy_histogram: dict[int, float]
    ambiguous_fraction_by_pos: float
    ambiguous_fraction_by_word: float

    def table_rows(self, cap: int = 6) -> list[tuple[str, float]]:
        """Histogram rows with counts above ``cap`` pooled into one row."""
        rows = [(str(k), v) for k, v in sorted(self.polysemy_histogram.items()) if k <= cap]
        tail = sum(v for k, v in self.polysemy_histogram.items() if k > cap)
        if tail:
            rows.append((f">{cap}", tail))
        return rows


def lexicon_stats(lexicon: Lexicon) -> LexiconStats:
    if not lexicon.entries:
        raise LexiconError("cannot compute statistics of an empty lexicon")
    by_word: dict[str, list[LexEntry]] = defaultdict(list)
    by_word_pos: dict[tuple[str, str], list[LexEntry]] = defaultdict(list)
    for e in lexicon.entries:
        by_word[e.head.lower()].append(e)
        by_word_pos[(e.head.lower(), e.pos)].append(e)
    counts = Counter(len(v) for v in by_word.values())
    n_words = len(by_word)
    histogram = {k: 100.0 * counts[k] / n_words for k in sorted(counts)}
    ambiguous_entries = sum(len(g) for g in by_word_pos.values() if _spans_levels(g))
    ambiguous_words = {w for (w, _), g in by_word_pos.items() if _spans_levels(g)}
    return LexiconStats(
        entry_count=len(lexicon.entries),
        unique_word_count=n_words,
        polysemy_histogram=histogram,
        ambiguous_fraction_by_pos=100.0 * ambiguous_entries / len(lexicon.entries),
        ambiguous_fraction_by_word=100.0 * len(ambiguous_words) / n_words,
    )

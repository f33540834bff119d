"""Tokenization, lemmatization, PoS tagging and the gold token format.

The analyzer is pluggable: anything with ``name`` and ``analyze(text)``
returning sentences of ``(surface, lemma, pos, start, end)`` tuples works.
Two are shipped: :class:`RuleAnalyzer`, a dependency-free dictionary and
suffix-rule analyzer, and :class:`SpacyAnalyzer`, a thin adapter used when
spaCy and a model are installed.
"""

from __future__ import annotations

import io
import os
import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Protocol, Sequence

from lexeval.levels import NA, PUNCT, STOPWORD, WORD_LABELS

CONTENT = "content"
STOPWORD_CLASS = "stopword"
PUNCTUATION = "punctuation"

LEXICON_POS = (
    "noun",
    "verb",
    "adjective",
    "adverb",
    "preposition",
    "pronoun",
    "determiner",
    "conjunction",
    "exclamation",
    "phrase",
    "modal",
    "number",
)
TOKEN_POS = LEXICON_POS + ("other",)


class AnalyzerError(RuntimeError):
    pass


class GoldFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    pos: str
    char_span: tuple[int, int]
    klass: str


@dataclass
class AnalyzedDocument:
    doc_id: str
    sentences: list[list[Token]]
    source_text: str
    essay_score: float | None = None
    gold_labels: list[list[str]] | None = None
    essay_level: str | None = None

    def __post_init__(self) -> None:
        if self.gold_labels is not None:
            shape = [len(s) for s in self.sentences]
            if [len(s) for s in self.gold_labels] != shape:
                raise ValueError(f"{self.doc_id}: gold labels do not match token layout")

    def tokens(self) -> Iterable[tuple[int, int, Token]]:
        for si, sent in enumerate(self.sentences):
            for ti, tok in enumerate(sent):
                yield si, ti, tok

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    def sentence_text(self, sentence_index: int) -> tuple[str, int]:
        """Return the sentence's text and its offset into ``source_text``."""
        sent = self.sentences[sentence_index]
        if not sent:
            return "", 0
        start, end = sent[0].char_span[0], sent[-1].char_span[1]
        return self.source_text[start:end], start


# -- bundled data ------------------------------------------------------------


def _data_lines(name: str) -> list[str]:
    text = resources.files("lexeval").joinpath("data", name).read_text(encoding="utf-8")
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def load_stopwords() -> frozenset[str]:
    return frozenset(ln.strip().lower() for ln in _data_lines("stopwords.txt"))


@lru_cache(maxsize=None)
def load_pos_map() -> dict[str, str]:
    return dict(tuple(ln.split("\t")[:2]) for ln in _data_lines("pos_map.tsv"))


@lru_cache(maxsize=None)
def _closed_class() -> dict[str, str]:
    return dict(tuple(ln.split("\t")[:2]) for ln in _data_lines("closed_class.tsv"))


@lru_cache(maxsize=None)
def _irregular() -> dict[str, str]:
    return dict(tuple(ln.split("\t")[:2]) for ln in _data_lines("irregular.tsv"))


def map_pos(tag: str) -> str:
    """Map a universal-dependencies tag onto the lexicon's tag set."""
    return load_pos_map().get(tag.upper(), "other")


# -- classification ----------------------------------------------------------


def _is_punct(surface: str) -> bool:
    return bool(surface) and all(unicodedata.category(ch)[0] in "PS" for ch in surface)


def classify(surface: str, stopwords: frozenset[str] | None = None) -> str:
    if stopwords is None:
        stopwords = load_stopwords()
    if _is_punct(surface):
        return PUNCTUATION
    if surface.lower().replace("’", "'") in stopwords:
        return STOPWORD_CLASS
    return CONTENT


# -- analyzers ---------------------------------------------------------------

RawToken = tuple[str, str, str, int, int]


class Analyzer(Protocol):
    name: str

    def analyze(self, text: str) -> list[list[RawToken]]: ...


_TOKEN_RE = re.compile(
    r"[A-Za-z]+(?=n['’]t\b)"
    r"|n['’]t\b"
    r"|['’](?:s|re|ve|ll|d|m)\b"
    r"|\d+(?:[.,]\d+)*"
    r"|\w+(?:-\w+)*"
    r"|[^\w\s]",
    re.IGNORECASE,
)
_SENT_END = {".", "!", "?"}
_DOUBLE_OK = ("ll", "ss", "zz", "ff")
_E_ENDINGS = ("at", "iv", "us", "ak", "ag", "ut", "ur", "ir", "os", "uc", "ar", "ag", "v", "z", "c", "dg", "rg", "nc")


def _lemma_candidates(word: str) -> list[str]:
    irregular = _irregular()
    if word in irregular:
        return [irregular[word]]
    out: list[str] = []
    if word.endswith("ies") and len(word) > 4:
        out.append(word[:-3] + "y")
    if word.endswith(("sses", "shes", "ches", "xes", "zes")):
        out.append(word[:-2])
    if word.endswith("s") and not word.endswith(("ss", "us", "is")) and len(word) > 3:
        out.append(word[:-1])
    for suffix in ("ed", "ing"):
        if word.endswith(suffix) and len(word) > len(suffix) + 2:
            stem = word[: -len(suffix)]
            if suffix == "ed" and stem.endswith("i"):
                out.append(stem[:-1] + "y")
            if len(stem) > 2 and stem[-1] == stem[-2] and stem[-2:] not in _DOUBLE_OK:
                out.append(stem[:-1])
            if stem.endswith(_E_ENDINGS):
                out.extend([stem + "e", stem])
            else:
                out.extend([stem, stem + "e"])
    return out


class RuleAnalyzer:
    """Dictionary and suffix-rule analyzer with no third-party dependency.

    ``vocabulary`` maps lemmas to the parts of speech they carry in the
    lexicon; when given, it steers lemma choice (prefer a known lemma) and
    PoS choice (restrict to the lexicon's tags, then use local context).
    """

    name = "rule"

    def __init__(self, vocabulary: Mapping[str, Iterable[str]] | None = None):
        self.vocabulary = {k: frozenset(v) for k, v in (vocabulary or {}).items()}

    def lemmatize(self, surface: str) -> str:
        word = surface.lower().replace("’", "'")
        irregular = _irregular()
        if word in irregular:
            return irregular[word]
        if not self.vocabulary:
            cands = _lemma_candidates(word)
            return cands[0] if cands else word
        if word in self.vocabulary:
            return word
        for cand in _lemma_candidates(word):
            if cand in self.vocabulary:
                return cand
        cands = _lemma_candidates(word)
        return cands[0] if cands else word

    def analyze(self, text: str) -> list[list[RawToken]]:
        sentences: list[list[RawToken]] = []
        current: list[tuple[str, str, int, int]] = []
        for m in _TOKEN_RE.finditer(text):
            surface = m.group(0)
            current.append((surface, self.lemmatize(surface), m.start(), m.end()))
            if surface in _SENT_END:
                sentences.append(self._tag(current))
                current = []
        if current:
            sentences.append(self._tag(current))
        return sentences

    def _options(self, surface: str, lemma: str) -> tuple[str, ...]:
        if _is_punct(surface):
            return ("other",)
        if surface[0].isdigit():
            return ("number",)
        known = self.vocabulary.get(lemma)
        if known:
            tags = tuple(t for t in LEXICON_POS if t in known and t != "phrase")
            if tags:
                return tags
        closed = _closed_class()
        low = surface.lower().replace("’", "'")
        if low in closed:
            return (closed[low],)
        if lemma in closed:
            return (closed[lemma],)
        return ()

    def _tag(self, toks: list[tuple[str, str, int, int]]) -> list[RawToken]:
        options = [self._options(s, lem) for s, lem, _, _ in toks]
        tags: list[str] = [opts[0] if len(opts) == 1 else "" for opts in options]
        for i, (surface, lemma, _, _) in enumerate(toks):
            if tags[i]:
                continue
            prev = tags[i - 1] if i else ""
            prev_word = toks[i - 1][0].lower() if i else ""
            nxt = options[i + 1] if i + 1 < len(toks) else ()
            tags[i] = _guess(surface, options[i], prev, prev_word, nxt, sentence_initial=i == 0)
        return [(s, lem, tags[i], a, b) for i, (s, lem, a, b) in enumerate(toks)]


def _guess(surface, options, prev, prev_word, nxt, sentence_initial) -> str:
    pool = options or ("noun", "verb", "adjective", "adverb")
    low = surface.lower()

    def pick(*prefs):
        for p in prefs:
            if p in pool:
                return p
        return None

    if prev_word == "to" or prev in ("pronoun", "modal"):
        choice = pick("verb")
        if choice:
            return choice
    if "adjective" in options and "noun" in nxt and len(nxt) == 1:
        return "adjective"
    if prev in ("determiner", "adjective"):
        choice = pick("noun", "adjective")
        if choice:
            return choice
    if prev == "verb":
        choice = pick("adjective", "noun", "adverb")
        if choice:
            return choice
    if not options:
        if surface[:1].isupper() and not sentence_initial:
            return "noun"
        if low.endswith("ly"):
            return "adverb"
        if low.endswith(("ed", "ing")):
            return "verb"
        if low.endswith(("ous", "ful", "ive", "able", "ible", "al", "ic", "less")):
            return "adjective"
        return "noun"
    if low.endswith(("ed", "ing")):
        choice = pick("verb", "adjective")
        if choice:
            return choice
    return pick("noun", "verb", "adjective", "adverb") or pool[0]


class SpacyAnalyzer:
    """Adapter over a spaCy pipeline. Tags are mapped with ``pos_map.tsv``."""

    name = "spacy"

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy
        except ImportError as exc:
            raise AnalyzerError("spaCy is not installed; use the rule analyzer") from exc
        self.name = f"spacy:{model}"
        self._nlp = spacy.load(model)

    def analyze(self, text: str) -> list[list[RawToken]]:
        doc = self._nlp(text)
        out = []
        for sent in doc.sents:
            toks = []
            for t in sent:
                if t.is_space:
                    continue
                toks.append((t.text, t.lemma_.lower(), map_pos(t.pos_), t.idx, t.idx + len(t.text)))
            if toks:
                out.append(toks)
        return out


def get_analyzer(name: str = "rule", vocabulary: Mapping[str, Iterable[str]] | None = None) -> Analyzer:
    if name == "rule":
        return RuleAnalyzer(vocabulary)
    if name.startswith("spacy"):
        _, _, model = name.partition(":")
        return SpacyAnalyzer(model or "en_core_web_sm")
    raise ValueError(f"unknown analyzer {name!r}")


def analyze(
    text: str,
    analyzer: Analyzer,
    doc_id: str = "doc",
    stopwords: frozenset[str] | None = None,
) -> AnalyzedDocument:
    try:
        raw = analyzer.analyze(text)
    except Exception as exc:
        raise AnalyzerError(f"analyzer {analyzer.name!r} failed on document {doc_id!r}: {exc}") from exc
    sentences = []
    for sent in raw:
        toks = []
        for surface, lemma, pos, start, end in sent:
            if text[start:end] != surface:
                raise AnalyzerError(f"{doc_id}: span {start}:{end} does not cover {surface!r}")
            klass = classify(surface, stopwords)
            lemma = (lemma or surface).lower()
            toks.append(Token(surface, lemma, pos if pos in TOKEN_POS else "other", (start, end), klass))
        if toks:
            sentences.append(toks)
    return AnalyzedDocument(doc_id=doc_id, sentences=sentences, source_text=text)


# -- gold format -------------------------------------------------------------

_HEADER_RE = re.compile(r"^#\s*(\w+)\s*=\s*(.*?)\s*$")
_LABEL_CLASS = {STOPWORD: STOPWORD_CLASS, PUNCT: PUNCTUATION}


def _build_gold_doc(doc_id, rows, headers) -> AnalyzedDocument:
    sentences, labels = [], []
    parts: list[str] = []
    offset = 0
    for sent_rows in rows:
        toks, labs = [], []
        for surface, lemma, pos, label in sent_rows:
            if parts:
                parts.append(" ")
                offset += 1
            parts.append(surface)
            span = (offset, offset + len(surface))
            offset += len(surface)
            toks.append(Token(surface, lemma, pos, span, _LABEL_CLASS.get(label, CONTENT)))
            labs.append(label)
        sentences.append(toks)
        labels.append(labs)
    score = headers.get("essay_score")
    return AnalyzedDocument(
        doc_id=doc_id,
        sentences=sentences,
        source_text="".join(parts),
        essay_score=float(score) if score not in (None, "") else None,
        gold_labels=labels,
        essay_level=headers.get("essay_level") or None,
    )


def parse_gold(stream: Iterable[str], source: str = "<gold>") -> list[AnalyzedDocument]:
    docs: list[AnalyzedDocument] = []
    headers: dict[str, str] = {}
    rows: list[list[tuple[str, str, str, str]]] = []
    sent: list[tuple[str, str, str, str]] = []

    def flush_doc():
        nonlocal headers, rows, sent
        if sent:
            rows.append(sent)
            sent = []
        if rows or "doc_id" in headers:
            doc_id = headers.get("doc_id") or f"{os.path.basename(source)}#{len(docs)}"
            docs.append(_build_gold_doc(doc_id, rows, headers))
        headers, rows = {}, []

    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n").rstrip("\r")
        if line.startswith("#"):
            m = _HEADER_RE.match(line)
            if m is None:
                continue
            key, value = m.groups()
            if key == "doc_id" and (rows or sent or "doc_id" in headers):
                flush_doc()
            headers[key] = value
            continue
        if not line.strip():
            if sent:
                rows.append(sent)
                sent = []
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise GoldFormatError(f"{source}:{lineno}: expected 4 tab-separated columns, got {len(cols)}")
        surface, lemma, pos, label = cols
        if label not in WORD_LABELS:
            raise GoldFormatError(f"{source}:{lineno}: invalid label {label!r}")
        sent.append((surface, lemma, pos, label))
    flush_doc()
    return docs


def read_gold_corpus(path: str | os.PathLike) -> list[AnalyzedDocument]:
    with open(path, encoding="utf-8") as fh:
        return parse_gold(fh, source=str(path))


def read_gold(path: str | os.PathLike) -> AnalyzedDocument:
    docs = read_gold_corpus(path)
    if len(docs) != 1:
        raise GoldFormatError(f"{path}: expected exactly one document, found {len(docs)}")
    return docs[0]


def format_gold(docs: Sequence[AnalyzedDocument]) -> str:
    out = io.StringIO()
    for n, doc in enumerate(docs):
        if doc.gold_labels is None:
            raise GoldFormatError(f"{doc.doc_id}: document has no gold labels")
        if n:
            out.write("\n")
        out.write(f"# doc_id = {doc.doc_id}\n")
        if doc.essay_level is not None:
            out.write(f"# essay_level = {doc.essay_level}\n")
        if doc.essay_score is not None:
            out.write(f"# essay_score = {doc.essay_score!r}\n")
        for si, (sent, labels) in enumerate(zip(doc.sentences, doc.gold_labels)):
            if si:
                out.write("\n")
            for tok, label in zip(sent, labels):
                out.write(f"{tok.surface}\t{tok.lemma}\t{tok.pos}\t{label}\n")
    return out.getvalue()


def write_gold(docs: AnalyzedDocument | Sequence[AnalyzedDocument], path: str | os.PathLike) -> None:
    if isinstance(docs, AnalyzedDocument):
        docs = [docs]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_gold(docs))


def check_gold_consistency(doc: AnalyzedDocument) -> list[str]:
    """List tokens whose gold label disagrees with the token class."""
    problems = []
    if doc.gold_labels is None:
        return problems
    for si, ti, tok in doc.tokens():
        label = doc.gold_labels[si][ti]
        if tok.klass == STOPWORD_CLASS and label != STOPWORD:
            problems.append(f"{doc.doc_id}[{si}:{ti}] stopword {tok.surface!r} labelled {label}")
        if tok.klass == PUNCTUATION and label != PUNCT:
            problems.append(f"{doc.doc_id}[{si}:{ti}] punctuation {tok.surface!r} labelled {label}")
        if tok.klass == CONTENT and label in (STOPWORD, PUNCT):
            problems.append(f"{doc.doc_id}[{si}:{ti}] content {tok.surface!r} labelled {label}")
        if tok.klass == CONTENT and not tok.lemma:
            problems.append(f"{doc.doc_id}[{si}:{ti}] empty lemma")
    return problems


__all__ = [
    "NA",
    "Token",
    "AnalyzedDocument",
    "RuleAnalyzer",
    "SpacyAnalyzer",
    "analyze",
    "classify",
    "read_gold",
    "read_gold_corpus",
    "write_gold",
    "format_gold",
    "parse_gold",
    "load_stopwords",
]

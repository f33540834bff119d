"""Reproducible runners for the four studies.

Each runner returns a plain ``dict`` of results. Alongside the raw numbers a
result carries ``tables`` and ``plots`` (each ``{"columns": [...], "rows":
[...]}``) so that the report writer can render any runner generically, and a
``meta`` block identifying the inputs that produced it. Results never contain
timestamps; those live in the run manifest.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from lexeval import __version__
from lexeval.annotate import (
    WordAnnotation,
    annotate_document,
    document_rng,
    group_by_document,
    read_annotations,
)
from lexeval.assess.features import EssayFeatures, feature_matrix, level_proportions, naive_score_cells
from lexeval.assess.svr import ConvergenceError, SvrParams, cross_validate, make_cv_plan, train_test_eval
from lexeval.levels import LEVEL_LABELS, NA, PUNCT, SCORED_LABELS, STOPWORD, CefrLevel
from lexeval.lexicon import Lexicon, parse_lexicon, sample_lexicon
from lexeval.llm.backends import BackendConfig, make_backend
from lexeval.llm.cache import CachedBackend, ResponseCache
from lexeval.llm.prompts import ESSAY, SEMANTIC, SENTENCE, McqOption, McqTask
from lexeval.llm.scoring import PermutationPolicy, score_with_permutations, select
from lexeval.metrics import (
    CONSISTENCY_THRESHOLDS,
    MetricError,
    Occurrence,
    auc_trapezoid,
    consistency_table,
    cumulate_reversed,
    cumulative_level_distribution,
    ecdf,
    evaluate_words,
)
from lexeval.textproc import AnalyzedDocument, RuleAnalyzer, analyze, get_analyzer, read_gold_corpus

EXPERIMENTS = ("semantic", "wordlevel", "essay", "distribution", "consistency")


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    lexicon: str | None = None  # None -> bundled sample lexicon
    corpus: tuple[str, ...] = ()
    scores: str | None = None
    methods: tuple[str, ...] = ("llm",)
    backend: BackendConfig = BackendConfig()
    permutations: str | None = None  # None -> the experiment's default policy
    seed: int = 0
    buckets: tuple[int, ...] = (3, 4, 5, 6)
    context: str = SENTENCE
    label_style: str = "number"
    analyzer: str = "rule"
    denominator: str = "words"
    include_na: bool = False
    folds: int = 5
    stratify: bool = False
    svr: SvrParams = SvrParams()
    thresholds: tuple[str, ...] = CONSISTENCY_THRESHOLDS
    consistency_unit: str = "occurrence"
    words: tuple[str, ...] = ()
    top_words: int = 2
    keep_partial: bool = False
    # operational settings: they do not change results and stay out of the hash
    out_dir: str | None = field(default=None, compare=False)
    jobs: int = field(default=1, compare=False)
    cache: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def validate_paths(self) -> None:
        for path in ([self.lexicon] if self.lexicon else []) + list(self.corpus) + ([self.scores] if self.scores else []):
            if not os.path.exists(path):
                raise FileNotFoundError(f"input not found: {path}")

    def to_dict(self, operational: bool = False) -> dict:
        d = dataclasses.asdict(self)
        if not operational:
            for key in ("out_dir", "jobs", "cache"):
                d.pop(key)
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# -- session: lexicon + backend ------------------------------------------------


class Session:
    """Resources shared by a run: the lexicon, the (cached) backend, the analyzer."""

    def __init__(self, config: ExperimentConfig, lexicon: Lexicon | None = None, backend=None):
        self.config = config
        if lexicon is None:
            lexicon = parse_lexicon(config.lexicon) if config.lexicon else sample_lexicon()
        self.lexicon = lexicon
        self._backend = backend
        self._cached: CachedBackend | None = None

    @property
    def backend(self) -> CachedBackend:
        if self._cached is None:
            inner = self._backend or make_backend(self.config.backend, self.lexicon)
            self._cached = CachedBackend(inner, ResponseCache(self.config.cache))
        return self._cached

    @property
    def backend_identity(self) -> str:
        if self._backend is not None:
            return self._backend.identity
        if self.config.experiment != "semantic" and "llm" not in self.config.methods:
            return "none"
        if self.config.backend.kind == "http_openai_compatible":
            return f"http:{self.config.backend.model_id}@{self.config.backend.api_base}"
        return self.config.backend.kind.replace("_", "-")

    def cache_counts(self) -> dict[str, int]:
        if self._cached is None:
            return {"hits": 0, "misses": 0}
        return {"hits": self._cached.hits, "misses": self._cached.misses}

    def meta(self, policy: str | None = None) -> dict:
        return {
            "experiment": self.config.experiment,
            "config_hash": self.config.config_hash,
            "seed": self.config.seed,
            "lexicon_version": self.lexicon.version,
            "backend": self.backend_identity,
            "permutations": policy,
            "labels": self.config.label_style,
            "context": self.config.context,
            "tool_version": __version__,
        }

    def analyzer(self):
        return get_analyzer(self.config.analyzer, self.lexicon.pos_vocabulary())


def _table(columns: Sequence[str], rows: list[list]) -> dict:
    return {"columns": list(columns), "rows": rows}


def _pmap(fn, items, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- corpus loading ------------------------------------------------------------


def load_documents(paths: Sequence[str], session: Session) -> list[AnalyzedDocument]:
    """Gold TSV files, plain text files, directories of ``.txt`` files, or JSONL
    records with ``doc_id`` and ``text`` (plus optional ``essay_level`` /
    ``essay_score``)."""
    docs: list[AnalyzedDocument] = []
    analyzer = None
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files = sorted(p for p in path.iterdir() if p.suffix == ".txt")
        else:
            files = [path]
        for f in files:
            if f.suffix == ".tsv":
                docs.extend(read_gold_corpus(f))
            elif f.suffix == ".jsonl":
                analyzer = analyzer or session.analyzer()
                with open(f, encoding="utf-8") as fh:
                    for line in fh:
                        if not line.strip():
                            continue
                        rec = json.loads(line)
                        doc = analyze(rec["text"], analyzer, str(rec["doc_id"]))
                        doc.essay_level = rec.get("essay_level")
                        doc.essay_score = rec.get("essay_score")
                        docs.append(doc)
            else:
                analyzer = analyzer or session.analyzer()
                docs.append(analyze(f.read_text(encoding="utf-8"), analyzer, f.stem))
    ids = [d.doc_id for d in docs]
    dupes = sorted(k for k, v in Counter(ids).items() if v > 1)
    if dupes:
        raise ExperimentError(f"duplicate document ids: {dupes}")
    return docs


def annotate_corpus(
    docs: Sequence[AnalyzedDocument], method: str, session: Session, context: str | None = None
) -> list[WordAnnotation]:
    cfg = session.config
    policy = PermutationPolicy.parse(cfg.permutations or "none", cfg.seed)
    backend = session.backend if method == "llm" else None

    def one(doc):
        rng = document_rng(cfg.seed, doc.doc_id) if method == "random" else None
        return annotate_document(
            doc, method, session.lexicon, backend, policy, rng, context or cfg.context,
            max_workers=cfg.jobs if len(docs) == 1 else 1, label_style=cfg.label_style,
        )

    out: list[WordAnnotation] = []
    for anns in _pmap(one, list(docs), cfg.jobs):
        out.extend(anns)
    return out


def _looks_like_annotations(path: str) -> bool:
    if not path.endswith(".jsonl"):
        return False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return "label" in json.loads(line)
    return False


def load_scores(path: str) -> tuple[dict[str, dict[str, float]], dict[str, str], dict[str, str]]:
    """Read a TSV of ``doc_id`` plus score columns.

    Columns named ``essay_level`` (or ``level``) and ``split`` are metadata;
    every other column must be numeric.
    """
    scores: dict[str, dict[str, float]] = {}
    levels: dict[str, str] = {}
    splits: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if not reader.fieldnames or reader.fieldnames[0] != "doc_id":
            raise ExperimentError(f"{path}: first column must be doc_id")
        for lineno, row in enumerate(reader, 2):
            doc_id = row.pop("doc_id")
            level = row.pop("essay_level", None) or row.pop("level", None)
            split = row.pop("split", None)
            if level:
                levels[doc_id] = level
            if split:
                splits[doc_id] = split
            try:
                scores[doc_id] = {k: float(v) for k, v in row.items() if v not in (None, "")}
            except ValueError as exc:
                raise ExperimentError(f"{path}:{lineno}: {exc}") from None
    return scores, levels, splits


@dataclass
class EssayCorpus:
    annotations: dict[str, list[WordAnnotation]]
    levels: dict[str, str]
    scores: dict[str, dict[str, float]]
    splits: dict[str, str]


def load_essay_corpus(session: Session) -> EssayCorpus:
    cfg = session.config
    if not cfg.corpus:
        raise ExperimentError("no corpus given")
    anns: list[WordAnnotation] = []
    levels: dict[str, str] = {}
    scores: dict[str, dict[str, float]] = {}
    doc_paths = []
    for path in cfg.corpus:
        if _looks_like_annotations(path):
            anns.extend(read_annotations(path))
        else:
            doc_paths.append(path)
    if doc_paths:
        docs = load_documents(doc_paths, session)
        for d in docs:
            if d.essay_level:
                levels[d.doc_id] = d.essay_level
            if d.essay_score is not None:
                scores[d.doc_id] = {"holistic": float(d.essay_score)}
        anns.extend(annotate_corpus(docs, cfg.methods[0], session, context=cfg.context))
    splits: dict[str, str] = {}
    if cfg.scores:
        s, lv, splits = load_scores(cfg.scores)
        scores.update(s)
        levels.update(lv)
    return EssayCorpus(group_by_document(anns), levels, scores, splits)


# -- semantic understanding ----------------------------------------------------


def _find_target(example: str, word: str, analyzer: RuleAnalyzer) -> str | None:
    for sent in analyzer.analyze(example):
        for surface, lemma, _pos, _s, _e in sent:
            if lemma == word or surface.lower() == word:
                return surface
    return None


def semantic_items(lexicon: Lexicon, buckets: Sequence[int]):
    """Yield ``(k, word, gold_entry, task)`` and collect skips.

    A word's meanings are its lookup candidates; each candidate with an
    example sentence that contains the word becomes one item.
    """
    analyzer = RuleAnalyzer(lexicon.pos_vocabulary())
    items, skipped = [], []
    heads = sorted({e.head.lower() for e in lexicon.entries})
    for word in heads:
        cands = lexicon.lookup(word)
        k = len(cands)
        if k not in buckets:
            continue
        options = tuple(McqOption.from_entry(e) for e in cands)
        for entry in cands:
            example = entry.example
            if not example:
                skipped.append({"entry_id": entry.id, "word": word, "reason": "no example"})
                continue
            target = _find_target(example, word, analyzer)
            if target is None:
                skipped.append({"entry_id": entry.id, "word": word, "reason": "example lacks the word"})
                continue
            task = McqTask(example, target, options, SEMANTIC, SENTENCE, meta={"gold_id": entry.id})
            items.append((k, word, entry, task))
    return items, skipped


def semantic_policy(k: int, override: str | None, seed: int) -> PermutationPolicy:
    if override:
        return PermutationPolicy.parse(override, seed)
    return PermutationPolicy("full", seed=seed) if k <= 3 else PermutationPolicy("sample", 10, seed)


def run_semantic_eval(config: ExperimentConfig, session: Session | None = None) -> dict:
    session = session or Session(config)
    items, skipped = semantic_items(session.lexicon, config.buckets)
    backend = session.backend

    def score(item):
        k, _word, _entry, task = item
        return select(score_with_permutations(backend, task, semantic_policy(k, config.permutations, config.seed)))

    chosen = _pmap(score, items, config.jobs)
    per_bucket: dict[int, list[bool]] = {k: [] for k in sorted(config.buckets)}
    details = []
    for (k, word, entry, _task), choice in zip(items, chosen):
        per_bucket[k].append(choice == entry.id)
        details.append({"word": word, "k": k, "gold": entry.id, "predicted": choice})
    buckets = {}
    rows = []
    for k, hits in per_bucket.items():
        acc = sum(hits) / len(hits) if hits else None
        pol = semantic_policy(k, config.permutations, config.seed).describe()
        buckets[str(k)] = {"accuracy": acc, "correct": sum(hits), "total": len(hits), "permutations": pol}
        rows.append([str(k), acc, len(hits)])
    defined = [b["accuracy"] for b in buckets.values() if b["accuracy"] is not None]
    average = sum(defined) / len(defined) if defined else None
    rows.append(["avg", average, sum(len(h) for h in per_bucket.values())])
    policy_note = config.permutations or "full(k=3)/sample:10(k>=4)"
    return {
        "meta": session.meta(policy_note),
        "buckets": buckets,
        "average": average,
        "skipped": skipped,
        "items": details,
        "tables": {"semantic_accuracy": _table(["meanings", "accuracy", "items"], rows)},
        "plots": {},
    }


# -- word-level prediction -----------------------------------------------------


def run_wordlevel_eval(config: ExperimentConfig, session: Session | None = None) -> dict:
    session = session or Session(config)
    docs = load_documents(config.corpus, session)
    if not docs:
        raise ExperimentError("empty corpus")
    missing = [d.doc_id for d in docs if d.gold_labels is None]
    if missing:
        raise ExperimentError(f"documents without gold labels: {missing}")
    gold = [lab for d in docs for sent in d.gold_labels for lab in sent]
    reports = {}
    acc_rows, f1_rows = [], []
    for method in config.methods:
        anns = annotate_corpus(docs, method, session)
        pred = [a.label for a in anns]
        amb = [a.ambiguity for a in anns]
        report = evaluate_words(pred, gold, amb).to_dict()
        reports[method] = report
        acc = report["accuracy"]
        acc_rows.append([method, acc["ambiguous"], acc["non_ambiguous"], acc["all"]])
        for split in ("ambiguous", "non_ambiguous", "all"):
            for lab in SCORED_LABELS:
                cell = report["per_label"][split][lab]
                f1_rows.append([method, split, lab, cell["f1"], cell["support"]])
    policy = (config.permutations or "none") if "llm" in config.methods else None
    return {
        "meta": session.meta(policy),
        "methods": reports,
        "n_documents": len(docs),
        "tables": {
            "word_accuracy": _table(["method", "ambiguous", "non_ambiguous", "all"], acc_rows),
            "per_level_f1": _table(["method", "split", "label", "f1", "support"], f1_rows),
        },
        "plots": {},
    }


# -- essay-level prediction ----------------------------------------------------


def essay_features(corpus: EssayCorpus, denominator: str = "words") -> list[EssayFeatures]:
    return [level_proportions(corpus.annotations[d], denominator) for d in sorted(corpus.annotations)]


def document_auc(features: EssayFeatures) -> float:
    return auc_trapezoid(cumulate_reversed(features.proportions))


def distribution_results(features: Sequence[EssayFeatures], levels: dict[str, str]) -> dict:
    groups: dict[str, list] = defaultdict(list)
    aucs: dict[str, list[float]] = defaultdict(list)
    for f in features:
        lv = levels.get(f.doc_id)
        if lv is None:
            continue
        groups[lv].append(f.proportions)
        aucs[lv].append(document_auc(f))
    curves = cumulative_level_distribution(groups) if groups else []
    curve_rows = [[c.group, x, y] for c in curves for x, y in zip(c.x, c.y)]
    ecdf_rows = [[c.group, v, p] for c in curves for v, p in ecdf(aucs[c.group])]
    return {
        "curves": [c.to_dict() for c in curves],
        "auc_ecdf": {c.group: ecdf(aucs[c.group]) for c in curves},
        "plots": {
            "cumulative_distribution": _table(["essay_level", "word_level", "cumulative_proportion"], curve_rows),
            "auc_ecdf": _table(["essay_level", "auc", "fraction"], ecdf_rows),
        },
    }


def _svr_cell(fn) -> dict:
    try:
        return fn()
    except (ValueError, MetricError, ConvergenceError) as exc:
        return {"pcc": None, "src": None, "error": str(exc)}


def run_essay_eval(config: ExperimentConfig, session: Session | None = None) -> dict:
    session = session or Session(config)
    corpus = load_essay_corpus(session)
    features = essay_features(corpus, config.denominator)
    ids = [f.doc_id for f in features]
    unscored = [d for d in ids if d not in corpus.scores]
    if unscored:
        raise ExperimentError(f"missing score column for documents: {unscored[:5]}")
    columns = sorted({c for d in ids for c in corpus.scores[d]})
    if not columns:
        raise ExperimentError("missing score column")
    if columns[0] != "holistic" and "holistic" in columns:
        columns.remove("holistic")
        columns.insert(0, "holistic")
    target = columns[0]
    by_id = {f.doc_id: f for f in features}
    X_all = feature_matrix(features, config.include_na)

    naive = {}
    for col in columns:
        fs = [f for f in features if col in corpus.scores[f.doc_id]]
        naive[col] = naive_score_cells(fs, [corpus.scores[f.doc_id][col] for f in fs])

    svr: dict[str, dict] = {}
    protocol = "cv"
    if corpus.splits:
        protocol = "train_test"
        train = [d for d in ids if corpus.splits.get(d) == "train"]
        test = [d for d in ids if corpus.splits.get(d) == "test"]

        def fit_eval():
            X_tr = feature_matrix([by_id[d] for d in train], config.include_na)
            y_tr = [corpus.scores[d][target] for d in train]
            X_te = feature_matrix([by_id[d] for d in test], config.include_na)
            cols = {c: [corpus.scores[d][c] for d in test] for c in columns}
            _, cells = train_test_eval(X_tr, y_tr, X_te, cols, config.svr)
            return cells

        try:
            svr = fit_eval()
        except (ValueError, MetricError, ConvergenceError) as exc:
            svr = {c: {"pcc": None, "src": None, "error": str(exc)} for c in columns}
    else:
        strata = [corpus.levels.get(d, "") for d in ids] if config.stratify else None

        def cv(col):
            y = [corpus.scores[d][col] for d in ids]
            plan = make_cv_plan(len(ids), config.folds, config.seed, strata)
            res = cross_validate(X_all, y, plan, config.svr)
            return {"pcc": res.pcc, "src": res.src}

        for col in columns:
            svr[col] = _svr_cell(lambda: cv(col))

    rows = [["naive", col, naive[col]["pcc"], naive[col]["src"]] for col in columns]
    rows += [["svr", col, svr[col]["pcc"], svr[col]["src"]] for col in columns]
    dist = distribution_results(features, corpus.levels)
    return {
        "meta": session.meta(config.permutations if config.methods[0] == "llm" else None),
        "protocol": protocol,
        "target": target,
        "features": [f.to_record() for f in features],
        "naive": naive,
        "svr": svr,
        "curves": dist["curves"],
        "auc_ecdf": dist["auc_ecdf"],
        "tables": {"essay_correlations": _table(["model", "score", "pcc", "src"], rows)},
        "plots": dist["plots"],
    }


def run_distribution(config: ExperimentConfig, session: Session | None = None) -> dict:
    session = session or Session(config)
    corpus = load_essay_corpus(session)
    features = essay_features(corpus, config.denominator)
    dist = distribution_results(features, corpus.levels)
    auc_rows = [[c["group"], c["auc"], c["n_docs"]] for c in dist["curves"]]
    return {
        "meta": session.meta(config.permutations if config.methods[0] == "llm" else None),
        "curves": dist["curves"],
        "auc_ecdf": dist["auc_ecdf"],
        "tables": {"group_auc": _table(["essay_level", "auc", "documents"], auc_rows)},
        "plots": dist["plots"],
    }


# -- lexicon consistency -------------------------------------------------------


def frequent_ambiguous_words(annotations: Sequence[WordAnnotation], lexicon: Lexicon, top: int = 2) -> list[str]:
    """Most frequent content lemmas that have more than one lexicon meaning."""
    counts = Counter(
        a.lemma for a in annotations if a.label not in (STOPWORD, PUNCT) and len(lexicon.lookup(a.lemma)) > 1
    )
    return [w for w, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top]]


def consistency_for_word(
    word: str,
    annotations: Sequence[WordAnnotation],
    levels: dict[str, str],
    thresholds: Sequence[str] = CONSISTENCY_THRESHOLDS,
    unit: str = "occurrence",
) -> dict:
    occ = [
        Occurrence(a.label, levels[a.doc_id], a.doc_id)
        for a in annotations
        if a.lemma == word and a.doc_id in levels
    ]
    if not occ:
        raise ExperimentError(f"word {word!r} does not occur in the corpus")
    dist = {ev: {wl: 0 for wl in (*LEVEL_LABELS, NA)} for ev in LEVEL_LABELS}
    for o in occ:
        if o.essay_level in dist and o.predicted in dist[o.essay_level]:
            dist[o.essay_level][o.predicted] += 1
    return {"occurrences": len(occ), "accuracy": consistency_table(occ, thresholds, unit), "distribution": dist}


def run_consistency(config: ExperimentConfig, session: Session | None = None) -> dict:
    session = session or Session(config)
    corpus = load_essay_corpus(session)
    anns = [a for d in sorted(corpus.annotations) for a in corpus.annotations[d]]
    words = list(config.words) or frequent_ambiguous_words(anns, session.lexicon, config.top_words)
    per_word = {w: consistency_for_word(w, anns, corpus.levels, config.thresholds, config.consistency_unit) for w in words}
    rows = [[f">={th}", *[per_word[w]["accuracy"][f">={th}"] for w in words]] for th in config.thresholds]
    dist_rows = [
        [w, ev, wl, n] for w in words for ev, row in per_word[w]["distribution"].items() for wl, n in row.items()
    ]
    return {
        "meta": session.meta(config.permutations if config.methods[0] == "llm" else None),
        "words": words,
        "unit": config.consistency_unit,
        "per_word": per_word,
        "tables": {"consistency": _table(["threshold", *words], rows)},
        "plots": {"word_distribution": _table(["word", "essay_level", "word_level", "count"], dist_rows)},
    }


RUNNERS = {
    "semantic": run_semantic_eval,
    "wordlevel": run_wordlevel_eval,
    "essay": run_essay_eval,
    "distribution": run_distribution,
    "consistency": run_consistency,
}


# -- corpus preparation --------------------------------------------------------


def sample_per_level(
    docs: Sequence[AnalyzedDocument], per_level: int, seed: int = 0
) -> list[AnalyzedDocument]:
    """Draw up to ``per_level`` documents from each essay level, seeded.

    Documents come back grouped by level (CEFR order) and sorted by id within
    a level.
    """
    by_level: dict[str, list[AnalyzedDocument]] = defaultdict(list)
    for d in docs:
        if d.essay_level is None:
            raise ExperimentError(f"document {d.doc_id!r} has no essay level")
        by_level[d.essay_level].append(d)
    rng = np.random.default_rng(seed)
    out = []
    for lv in sorted(by_level, key=lambda x: CefrLevel.parse(x)):
        pool = sorted(by_level[lv], key=lambda d: d.doc_id)
        take = min(per_level, len(pool))
        picks = sorted(rng.choice(len(pool), size=take, replace=False))
        out.extend(pool[int(i)] for i in picks)
    return out

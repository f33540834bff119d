"""Evaluation maths: accuracy, per-label F1, correlations, curves, eCDF and
level-or-above consistency."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from lexeval.levels import LEVEL_LABELS, NA, PUNCT, SCORED_LABELS, STOPWORD, CefrLevel

AMBIGUITY_SPLITS = ("ambiguous", "non_ambiguous", "all")
REVERSED_LEVELS: tuple[str, ...] = tuple(reversed(LEVEL_LABELS))
CONSISTENCY_THRESHOLDS = ("B2", "B1", "A2")


class MetricError(ValueError):
    pass


class UndefinedCorrelation(MetricError):
    """Raised when a correlation is requested on a constant vector."""


def _split_of(tag: str) -> str:
    # lemmas absent from the lexicon have no ambiguity; count them as non-ambiguous
    return "ambiguous" if tag == "ambiguous" else "non_ambiguous"


def _scored_pairs(pred: Sequence[str], gold: Sequence[str]):
    if len(pred) != len(gold):
        raise MetricError(f"length mismatch: {len(pred)} predictions vs {len(gold)} gold labels")
    return [(i, p, g) for i, (p, g) in enumerate(zip(pred, gold)) if g not in (STOPWORD, PUNCT)]


@dataclass
class AccuracyResult:
    accuracy: dict[str, float | None]
    correct: dict[str, int]
    total: dict[str, int]

    @property
    def overall(self) -> float | None:
        return self.accuracy["all"]


def word_accuracy(
    pred: Sequence[str], gold: Sequence[str], ambiguity: Sequence[str] | None = None
) -> AccuracyResult:
    """Exact-match rate over scored tokens (gold S and P are skipped)."""
    if ambiguity is not None and len(ambiguity) != len(gold):
        raise MetricError("ambiguity tags must align with gold labels")
    correct = dict.fromkeys(AMBIGUITY_SPLITS, 0)
    total = dict.fromkeys(AMBIGUITY_SPLITS, 0)
    for i, p, g in _scored_pairs(pred, gold):
        keys = ["all"]
        if ambiguity is not None:
            keys.append(_split_of(ambiguity[i]))
        for k in keys:
            total[k] += 1
            correct[k] += p == g
    acc = {k: (correct[k] / total[k] if total[k] else None) for k in AMBIGUITY_SPLITS}
    return AccuracyResult(acc, correct, total)


@dataclass
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int
    true_positive: int

    @property
    def supported(self) -> bool:
        return self.support > 0 or self.predicted > 0


def per_level_f1(
    pred: Sequence[str], gold: Sequence[str], labels: Sequence[str] = SCORED_LABELS
) -> dict[str, LabelScore]:
    pairs = _scored_pairs(pred, gold)
    out = {}
    for lab in labels:
        tp = sum(1 for _, p, g in pairs if p == lab and g == lab)
        npred = sum(1 for _, p, _g in pairs if p == lab)
        ngold = sum(1 for _, _p, g in pairs if g == lab)
        precision = tp / npred if npred else 0.0
        recall = tp / ngold if ngold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out[lab] = LabelScore(precision, recall, f1, ngold, npred, tp)
    return out


@dataclass
class EvalReport:
    accuracy: AccuracyResult
    per_label: dict[str, dict[str, LabelScore]]
    n_tokens: int
    n_scored: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy.accuracy,
            "correct": self.accuracy.correct,
            "total": self.accuracy.total,
            "per_label": {
                split: {
                    lab: {
                        "precision": s.precision,
                        "recall": s.recall,
                        "f1": s.f1,
                        "support": s.support,
                        "predicted": s.predicted,
                        "supported": s.supported,
                    }
                    for lab, s in scores.items()
                }
                for split, scores in self.per_label.items()
            },
            "n_tokens": self.n_tokens,
            "n_scored": self.n_scored,
        }


def evaluate_words(pred: Sequence[str], gold: Sequence[str], ambiguity: Sequence[str]) -> EvalReport:
    """Accuracy by ambiguity split plus per-label F1 for every split."""
    acc = word_accuracy(pred, gold, ambiguity)
    per_label = {"all": per_level_f1(pred, gold)}
    for split in ("ambiguous", "non_ambiguous"):
        idx = [i for i, a in enumerate(ambiguity) if _split_of(a) == split]
        per_label[split] = per_level_f1([pred[i] for i in idx], [gold[i] for i in idx])
    return EvalReport(acc, per_label, len(gold), acc.total["all"])


# -- correlations --------------------------------------------------------------


def _check_vectors(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError("correlation inputs must be equal-length vectors")
    if len(x) < 3:
        raise MetricError("correlation needs at least 3 observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelation("correlation is undefined for a constant vector")
    return x, y


def pearson(x, y) -> float:
    x, y = _check_vectors(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / np.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return max(-1.0, min(1.0, r))


def spearman(x, y) -> float:
    x, y = _check_vectors(x, y)
    return pearson(rankdata(x, method="average"), rankdata(y, method="average"))


def correlations(x, y) -> dict[str, float | None]:
    """PCC and SRC, with ``None`` for undefined cells."""
    out: dict[str, float | None] = {}
    for name, fn in (("pcc", pearson), ("src", spearman)):
        try:
            out[name] = fn(x, y)
        except UndefinedCorrelation:
            out[name] = None
    return out


# -- cumulative curves, AUC, eCDF ---------------------------------------------


@dataclass
class CurveSeries:
    group: str
    x: tuple[str, ...]
    y: list[float]
    auc: float
    n_docs: int = 0

    def to_dict(self) -> dict:
        return {"group": self.group, "x": list(self.x), "y": self.y, "auc": self.auc, "n_docs": self.n_docs}


def cumulate_reversed(proportions: Sequence[float]) -> list[float]:
    """Cumulate A1..C2 proportions along the reversed axis C2 -> A1."""
    if len(proportions) != len(LEVEL_LABELS):
        raise MetricError("expected one proportion per CEFR level")
    return [float(v) for v in np.cumsum(list(reversed(proportions)))]


def auc_trapezoid(y: Sequence[float], x: Sequence[float] | None = None) -> float:
    """Trapezoidal area; the default axis spaces points uniformly over [0, 1]."""
    if len(y) < 2:
        raise MetricError("AUC needs at least 2 points")
    yv = np.asarray(y, dtype=float)
    xv = np.linspace(0.0, 1.0, len(yv)) if x is None else np.asarray(x, dtype=float)
    return float(np.sum((xv[1:] - xv[:-1]) * (yv[1:] + yv[:-1]) / 2.0))


def cumulative_level_distribution(groups: Mapping[str, Sequence[Sequence[float]]]) -> list[CurveSeries]:
    """One cumulative curve per essay-level group.

    ``groups`` maps a group label to per-document 6-vectors of level
    proportions (A1..C2 order). Groups are returned in CEFR order when their
    labels are levels, otherwise sorted.
    """
    out = []
    for group in _ordered_groups(groups):
        docs = groups[group]
        if not len(docs):
            raise MetricError(f"group {group!r} has no documents")
        mean = np.mean(np.asarray(docs, dtype=float), axis=0)
        y = cumulate_reversed(mean)
        out.append(CurveSeries(str(group), REVERSED_LEVELS, y, auc_trapezoid(y), len(docs)))
    return out


def _ordered_groups(groups: Iterable) -> list:
    keys = list(groups)
    if all(str(k) in LEVEL_LABELS for k in keys):
        return sorted(keys, key=lambda k: LEVEL_LABELS.index(str(k)))
    return sorted(keys, key=str)


def ecdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Sorted distinct values with the fraction of observations <= each."""
    if not len(values):
        return []
    v = np.sort(np.asarray(values, dtype=float))
    uniq = np.unique(v)
    frac = np.searchsorted(v, uniq, side="right") / len(v)
    return [(float(a), float(b)) for a, b in zip(uniq, frac)]


# -- consistency --------------------------------------------------------------


@dataclass(frozen=True)
class Occurrence:
    predicted: str
    essay_level: str
    doc_id: str = ""


def consistency_accuracy(occurrences: Sequence[Occurrence], threshold: str, unit: str = "occurrence") -> float:
    """Share of occurrences predicted at or above ``threshold`` that appear in
    essays at or above the predicted level.

    ``unit="essay"`` counts each (essay, predicted level) pair once.
    """
    th = CefrLevel.parse(threshold)
    qualifying = [o for o in occurrences if o.predicted in LEVEL_LABELS and CefrLevel.parse(o.predicted) >= th]
    if unit == "essay":
        qualifying = list({(o.doc_id, o.predicted): o for o in qualifying}.values())
    elif unit != "occurrence":
        raise ValueError(f"unknown unit {unit!r}")
    if not qualifying:
        raise MetricError(f"no occurrences predicted at {threshold} or above")
    hits = sum(1 for o in qualifying if CefrLevel.parse(o.essay_level) >= CefrLevel.parse(o.predicted))
    return hits / len(qualifying)


def consistency_table(
    occurrences: Sequence[Occurrence], thresholds: Sequence[str] = CONSISTENCY_THRESHOLDS, unit: str = "occurrence"
) -> dict[str, float | None]:
    rows: dict[str, float | None] = {}
    for th in thresholds:
        try:
            rows[f">={th}"] = consistency_accuracy(occurrences, th, unit)
        except MetricError:
            rows[f">={th}"] = None
    return rows


__all__ = [
    "NA",
    "word_accuracy",
    "per_level_f1",
    "evaluate_words",
    "pearson",
    "spearman",
    "correlations",
    "cumulative_level_distribution",
    "auc_trapezoid",
    "ecdf",
    "consistency_accuracy",
    "consistency_table",
]

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lexeval.levels import LEVEL_LABELS, NA, PUNCT, STOPWORD, CefrLevel
from lexeval.metrics import MetricError, correlations, pearson, spearman

DENOMINATORS = ("words", "content")


@dataclass(frozen=True)
class EssayFeatures:
    doc_id: str
    proportions: tuple[float, ...]
    na_proportion: float
    denominator: int
    composite: float

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "proportions": dict(zip(LEVEL_LABELS, self.proportions)),
            "na_proportion": self.na_proportion,
            "denominator": self.denominator,
            "composite": self.composite,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EssayFeatures":
        props = rec["proportions"]
        if isinstance(props, dict):
            props = [props[lab] for lab in LEVEL_LABELS]
        return cls(rec["doc_id"], tuple(float(p) for p in props), float(rec["na_proportion"]),
                   int(rec["denominator"]), float(rec["composite"]))


def level_proportions(annotations: Sequence, denominator: str = "words") -> EssayFeatures:
    """Per-level word proportions and the level-weighted composite.

    ``denominator="words"`` divides by every non-punctuation token (stopwords
    and N/A included); ``"content"`` divides by tokens that are neither
    stopwords nor punctuation.
    """
    if denominator not in DENOMINATORS:
        raise ValueError(f"unknown denominator {denominator!r}")
    doc_ids = {a.doc_id for a in annotations}
    if len(doc_ids) > 1:
        raise ValueError(f"annotations span several documents: {sorted(doc_ids)}")
    labels = [a.label for a in annotations]
    excluded = {PUNCT} if denominator == "words" else {PUNCT, STOPWORD}
    denom = sum(1 for lab in labels if lab not in excluded)
    if denom == 0:
        raise MetricError(f"document {next(iter(doc_ids), '?')!r} has no countable tokens")
    counts = [labels.count(lab) for lab in LEVEL_LABELS]
    weighted = sum(c * CefrLevel[lab].weight for c, lab in zip(counts, LEVEL_LABELS))
    return EssayFeatures(
        doc_id=next(iter(doc_ids)),
        proportions=tuple(c / denom for c in counts),
        na_proportion=labels.count(NA) / denom,
        denominator=denom,
        composite=weighted / denom,
    )


def feature_matrix(features: Sequence[EssayFeatures], include_na: bool = False) -> np.ndarray:
    rows = [list(f.proportions) + ([f.na_proportion] if include_na else []) for f in features]
    return np.asarray(rows, dtype=float).reshape(len(features), 7 if include_na else 6)


def naive_score(features: Sequence[EssayFeatures], scores: Sequence[float]) -> dict[str, float]:
    """Correlation of the composite with human scores. Raises on constant input."""
    if len(features) != len(scores):
        raise ValueError("features and scores must align")
    composite = [f.composite for f in features]
    return {"pcc": pearson(composite, scores), "src": spearman(composite, scores)}


def naive_score_cells(features: Sequence[EssayFeatures], scores: Sequence[float]) -> dict[str, float | None]:
    """Like :func:`naive_score` but degenerate cells come back as ``None``."""
    return correlations([f.composite for f in features], scores)

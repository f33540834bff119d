from __future__ import annotations

import pytest

from lexeval.annotate import WordAnnotation
from lexeval.assess.features import EssayFeatures, feature_matrix, level_proportions, naive_score, naive_score_cells
from lexeval.metrics import MetricError, UndefinedCorrelation


def anns(labels, doc_id="d"):
    out = []
    for i, lab in enumerate(labels):
        entry = None if lab in ("N/A", "S", "P") else f"e-{lab}"
        out.append(WordAnnotation(doc_id, 0, i, f"w{i}", f"w{i}", lab, "pos", "unknown", entry))
    return out


def test_worked_example_composite():
    f = level_proportions(anns(["A1"] * 5 + ["B1"] * 3 + ["N/A"] * 2 + ["P"]))
    assert f.denominator == 10
    assert f.proportions[0] == 0.5 and f.proportions[2] == 0.3
    assert f.na_proportion == 0.2
    assert f.composite == 1.4


def test_composite_bounds():
    assert level_proportions(anns(["N/A"] * 4)).composite == 0
    assert level_proportions(anns(["C2"] * 4)).composite == 6


def test_stopwords_count_in_default_denominator():
    f = level_proportions(anns(["A1", "S", "S", "S", "P"]))
    assert f.denominator == 4 and f.proportions[0] == 0.25
    g = level_proportions(anns(["A1", "S", "S", "S", "P"]), denominator="content")
    assert g.denominator == 1 and g.proportions[0] == 1.0


def test_zero_denominator_and_mixed_documents():
    with pytest.raises(MetricError):
        level_proportions(anns(["P", "P"]))
    with pytest.raises(ValueError):
        level_proportions(anns(["A1"], "a") + anns(["A1"], "b"))


def test_record_round_trip():
    f = level_proportions(anns(["A1", "B2", "N/A"]))
    assert EssayFeatures.from_record(f.to_record()) == f


def test_feature_matrix_shape():
    fs = [level_proportions(anns(["A1", "B2"], d)) for d in "abc"]
    assert feature_matrix(fs).shape == (3, 6)
    assert feature_matrix(fs, include_na=True).shape == (3, 7)
    assert feature_matrix([]).shape == (0, 6)


def test_naive_score_identity_and_reversal():
    fs = [level_proportions(anns(labels, d)) for d, labels in zip("abc", [["A1"], ["A2"], ["B1"]])]
    assert naive_score(fs, [1, 2, 3]) == pytest.approx({"pcc": 1.0, "src": 1.0})
    assert naive_score(fs, [3, 2, 1]) == pytest.approx({"pcc": -1.0, "src": -1.0})


def test_naive_score_constant_input():
    fs = [level_proportions(anns(["A1"], d)) for d in "abc"]
    with pytest.raises(UndefinedCorrelation):
        naive_score(fs, [1, 2, 3])
    assert naive_score_cells(fs, [1, 2, 3]) == {"pcc": None, "src": None}

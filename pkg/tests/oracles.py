"""Independent reference computations used by the tests."""

from __future__ import annotations

import itertools

import cvxpy as cp
import numpy as np


def standardize(X_train, X_other):
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0)
    std[std == 0] = 1.0
    return (X_train - mean) / std, (X_other - mean) / std


def rbf(A, B, gamma):
    d = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    return np.exp(-gamma * d)


def qp_svr_predict(X_train, y_train, X_test, epsilon=0.1, C=1.0, gamma=None):
    """Solve the epsilon-SVR dual as a generic QP and predict.

    The dual multiplier of the equality constraint is the intercept.
    """
    X_train = np.asarray(X_train, float)
    X_test = np.asarray(X_test, float)
    y = np.asarray(y_train, float)
    gamma = 1.0 / X_train.shape[1] if gamma is None else gamma
    Z, Zt = standardize(X_train, X_test)
    K = rbf(Z, Z, gamma) + 1e-12 * np.eye(len(y))
    n = len(y)
    a = cp.Variable(n)
    a_star = cp.Variable(n)
    beta = a - a_star
    eq = cp.sum(beta) == 0
    objective = 0.5 * cp.quad_form(beta, cp.psd_wrap(K)) + epsilon * cp.sum(a + a_star) - y @ beta
    prob = cp.Problem(cp.Minimize(objective), [a >= 0, a <= C, a_star >= 0, a_star <= C, eq])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    b = float(eq.dual_value)
    coef = np.asarray(beta.value)
    return rbf(Zt, Z, gamma) @ coef + b, coef


def brute_force_ranks(values):
    """Mean position of each element over every ordering that sorts the data."""
    n = len(values)
    totals = np.zeros(n)
    count = 0
    for perm in itertools.permutations(range(n)):
        if all(values[perm[i]] <= values[perm[i + 1]] for i in range(n - 1)):
            for pos, idx in enumerate(perm):
                totals[idx] += pos + 1
            count += 1
    return totals / count


def plain_pearson(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / (sxx * syy) ** 0.5


def monotone_corpus(n=200, noise=0.1, seed=0):
    """Essays whose level skews their word-level distribution upward.

    Each essay gets a level 1..6; its proportions are a Dirichlet draw centred
    on that level, scaled to leave room for N/A and stopwords. Targets are the
    composite plus Gaussian noise.
    """
    rng = np.random.default_rng(seed)
    ladder = np.arange(1, 7)
    levels = rng.integers(1, 7, size=n)
    props = np.array([rng.dirichlet(5 * np.exp(-0.8 * np.abs(ladder - lv))) for lv in levels]) * 0.8
    composite = props @ ladder
    return props, composite + rng.normal(0.0, noise, size=n)


LEVELS = ("A1", "A2", "B1", "B2", "C1", "C2")


def synthetic_essays(n_per_level=8, words=60, seed=0):
    """Annotated essays where higher essay levels draw higher word levels.

    Returns ``(records, scores)`` where ``records`` are annotation records and
    ``scores`` maps doc_id to ``(essay_level, score)``.
    """
    rng = np.random.default_rng(seed)
    ladder = np.arange(1, 7)
    records, scores = [], {}
    for li, level in enumerate(LEVELS, 1):
        for k in range(n_per_level):
            doc_id = f"{level}-{k:02d}"
            weights = np.exp(-1.2 * np.abs(ladder - li))
            weights /= weights.sum()
            for t in range(words):
                r = rng.random()
                if r < 0.3:
                    label, lemma = "S", "the"
                elif r < 0.4:
                    label, lemma = "P", "."
                elif r < 0.45:
                    label, lemma = "N/A", "zzz"
                else:
                    label = LEVELS[rng.choice(6, p=weights)]
                    lemma = "work" if t % 3 == 0 else f"w{label.lower()}"
                records.append({
                    "doc_id": doc_id, "sentence_index": 0, "token_index": t, "surface": lemma, "lemma": lemma,
                    "label": label, "entry_id": f"x-{label}" if label in LEVELS else None,
                    "method": "pos", "ambiguity": "unknown", "probs": None,
                })
            scores[doc_id] = (level, li + rng.normal(0, 0.3))
    return records, scores


def write_essay_inputs(tmp_path, records, scores, split=None):
    import json

    ann_path = tmp_path / "essays.jsonl"
    ann_path.write_text("".join(json.dumps(r) + "\n" for r in records))
    score_path = tmp_path / "scores.tsv"
    header = "doc_id\tessay_level\tholistic\tvocabulary" + ("\tsplit" if split else "")
    rows = [header]
    for i, (doc_id, (level, score)) in enumerate(sorted(scores.items())):
        row = f"{doc_id}\t{level}\t{score!r}\t{score * 0.5 + 1!r}"
        if split:
            row += "\t" + split(i)
        rows.append(row)
    score_path.write_text("\n".join(rows) + "\n")
    return str(ann_path), str(score_path)

"""Epsilon-insensitive support vector regression with an RBF kernel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from lexeval.assess import _backend
from lexeval.metrics import correlations


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SvrParams:
    epsilon: float = 0.1
    c: float = 1.0
    gamma: float | None = None  # None -> 1 / n_features
    tol: float = 1e-9
    max_iter: int = 10_000_000
    solver: str = "auto"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.c <= 0:
            raise ValueError("c must be > 0")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be > 0")


@dataclass(frozen=True)
class SvrModel:
    support_vectors: np.ndarray  # in standardized feature space
    dual_coef: np.ndarray
    bias: float
    gamma: float
    mean: np.ndarray
    scale: np.ndarray
    params: SvrParams
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return len(self.mean)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def _solver(name: str):
    if name == "auto":
        return _backend.solve
    try:
        return _backend.IMPLEMENTATIONS[name]
    except KeyError:
        raise ValueError(f"SMO implementation {name!r} is not available") from None


def fit_svr(X, y, params: SvrParams = SvrParams()) -> SvrModel:
    X = np.asarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n_samples, n_features) aligned with y")
    if len(X) < 1:
        raise ValueError("need at least one training sample")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    gamma = params.gamma if params.gamma is not None else 1.0 / X.shape[1]
    K = np.ascontiguousarray(rbf_kernel(Z, Z, gamma))
    beta, rho, n_iter, converged = _solver(params.solver)(K, y, params.epsilon, params.c, params.tol, params.max_iter)
    if not converged:
        raise ConvergenceError(f"SMO did not converge within {params.max_iter} iterations")
    beta = np.asarray(beta)
    sv = np.abs(beta) > 1e-12
    return SvrModel(
        support_vectors=Z[sv].copy(),
        dual_coef=beta[sv].copy(),
        bias=float(-rho),
        gamma=gamma,
        mean=mean,
        scale=scale,
        params=params,
        n_iter=int(n_iter),
    )


def predict_svr(model: SvrModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    if not len(model.dual_coef):
        return np.full(len(X), model.bias)
    Z = (X - model.mean) / model.scale
    return rbf_kernel(Z, model.support_vectors, model.gamma) @ model.dual_coef + model.bias


# -- cross-validation ------------------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    k: int
    seed: int
    folds: tuple[int, ...] = field(repr=False)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.folds) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.folds) != fold)


def make_cv_plan(n: int, k: int = 5, seed: int = 0, strata: Sequence | None = None) -> CvPlan:
    """Shuffled fold assignment; fold sizes differ by at most one.

    With ``strata`` the shuffled samples are ordered by stratum before the
    round-robin deal, so every fold gets a near-equal share of each stratum.
    """
    if k < 2 or k > n:
        raise ValueError(f"k must be in [2, n]; got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    if strata is not None:
        strata = np.asarray(strata)
        order = order[np.argsort(strata[order], kind="stable")]
    folds = np.empty(n, dtype=int)
    folds[order] = np.arange(n) % k
    return CvPlan(k, seed, tuple(int(f) for f in folds))


@dataclass
class CvResult:
    predictions: np.ndarray
    pcc: float | None
    src: float | None
    plan: CvPlan


def cross_validate(X, y, plan: CvPlan, params: SvrParams = SvrParams()) -> CvResult:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(plan.folds) != len(y):
        raise ValueError("plan does not cover all samples")
    preds = np.full(len(y), np.nan)
    for fold in range(plan.k):
        test = plan.test_indices(fold)
        train = plan.train_indices(fold)
        if len(train) < 2:
            raise ValueError(f"fold {fold} leaves fewer than 2 training samples")
        if not len(test):
            continue
        model = fit_svr(X[train], y[train], params)
        preds[test] = predict_svr(model, X[test])
    corr = correlations(preds, y)
    return CvResult(preds, corr["pcc"], corr["src"], plan)


def train_test_eval(X_train, y_train, X_test, test_targets: dict[str, Sequence[float]], params: SvrParams = SvrParams()):
    """Fit on one target and correlate test predictions with every target column."""
    model = fit_svr(X_train, y_train, params)
    preds = predict_svr(model, X_test)
    return preds, {name: correlations(preds, col) for name, col in test_targets.items()}

"""Essay-level features, the weighted composite score and kernel regression."""

from lexeval.assess.features import EssayFeatures, feature_matrix, level_proportions, naive_score
from lexeval.assess.svr import (
    ConvergenceError,
    CvPlan,
    SvrModel,
    SvrParams,
    cross_validate,
    fit_svr,
    make_cv_plan,
    predict_svr,
    train_test_eval,
)

__all__ = [
    "EssayFeatures",
    "feature_matrix",
    "level_proportions",
    "naive_score",
    "ConvergenceError",
    "CvPlan",
    "SvrModel",
    "SvrParams",
    "cross_validate",
    "fit_svr",
    "make_cv_plan",
    "predict_svr",
    "train_test_eval",
]

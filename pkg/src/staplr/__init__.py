"""Multi-view stacking with penalized logistic regression, view selection via
a (optionally nonnegative) lasso meta-learner, and a logistic group lasso
baseline."""

from .core import (
    FittedLinearModel,
    FoldPartition,
    MultiViewDataset,
    PenaltySpec,
    make_folds,
    standardize_columns,
)
from .cv import LearnerSpec, binomial_deviance, cv_predictor, cv_select_lambda
from .grouplasso import GroupStructure, fit_group_lasso, group_lambda_path, selected_groups
from .metrics import accuracy, auc
from .solver import SolverSettings, fit_logistic, lambda_path, predict_proba
from .stacking import (
    StackedModel,
    fit_staplr,
    load_stacked_model,
    predict_stacked,
    save_stacked_model,
    selected_views,
)

__version__ = "0.1.0"

__all__ = [
    "FittedLinearModel", "FoldPartition", "MultiViewDataset", "PenaltySpec",
    "make_folds", "standardize_columns", "LearnerSpec", "binomial_deviance",
    "cv_predictor", "cv_select_lambda", "GroupStructure", "fit_group_lasso",
    "group_lambda_path", "selected_groups", "accuracy", "auc",
    "SolverSettings", "fit_logistic", "lambda_path", "predict_proba",
    "StackedModel", "fit_staplr", "load_stacked_model", "predict_stacked",
    "save_stacked_model", "selected_views",
]

"""Cross-validation: deviance-based lambda selection and out-of-fold predictors."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DegenerateFoldError,
    FittedLinearModel,
    FoldPartition,
    InvalidArgumentError,
    PenaltySpec,
    derive_seed,
    make_folds,
    standardize_columns,
)
from .grouplasso import GroupStructure, fit_group_lasso_path, group_lambda_path
from .solver import (
    DEFAULT_SETTINGS,
    LambdaPath,
    SolverSettings,
    fit_logistic_path,
    lambda_path,
    predict_proba,
)

DEVIANCE_CLIP = 1e-15


def binomial_deviance(p: np.ndarray, y: np.ndarray) -> float:
    """-(2/n) * sum_i [ y_i ln p_i + (1 - y_i) ln(1 - p_i) ], with p clipped."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise InvalidArgumentError("p and y must have equal length")
    p = np.clip(p, DEVIANCE_CLIP, 1.0 - DEVIANCE_CLIP)
    return float(-2.0 * np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass(frozen=True)
class LearnerSpec:
    """Configuration of one penalized logistic learner (penalty + tuning policy).

    ``family`` may also be ``intercept_only``, which skips tuning and returns
    the base-rate model.  ``nested_tuning`` controls whether out-of-fold
    prediction re-selects lambda inside each training fold (default) or reuses
    one full-data selection.
    """

    family: str = "ridge"
    alpha: float | None = None
    nonnegative: bool = False
    n_lambda: int = 100
    k: int = 10
    epsilon: float | None = None
    standardize: bool = True
    nested_tuning: bool = True
    stratify: bool = False

    def to_dict(self) -> dict:
        return {
            "family": self.family, "alpha": self.alpha,
            "nonnegative": self.nonnegative, "n_lambda": self.n_lambda,
            "k": self.k, "epsilon": self.epsilon,
            "standardize": self.standardize, "nested_tuning": self.nested_tuning,
            "stratify": self.stratify,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerSpec":
        return cls(**d)


@dataclass(frozen=True)
class CvResult:
    """Per-lambda mean held-out deviance and the selected minimizer."""

    path: LambdaPath
    mean_deviance: np.ndarray
    selected_lambda: float

    def __post_init__(self):
        dev = np.asarray(self.mean_deviance, dtype=np.float64)
        object.__setattr__(self, "mean_deviance", dev)
        if dev.shape != self.path.values.shape:
            raise InvalidArgumentError("mean_deviance must align with the path")


def _check_fold_classes(y: np.ndarray, folds: FoldPartition) -> None:
    for k in range(1, folds.k + 1):
        ytr = y[folds.train_indices(k)]
        if len(ytr) == 0 or ytr.min() == ytr.max():
            raise DegenerateFoldError(f"training part of fold {k} contains a single class")


def _fit_family_path(X, y, spec: LearnerSpec, lambdas, settings,
                     groups: GroupStructure | None):
    if spec.family == "group_lasso":
        if groups is None:
            raise InvalidArgumentError("group_lasso requires a GroupStructure")
        return fit_group_lasso_path(X, y, groups, lambdas, settings)
    return fit_logistic_path(X, y, spec.family, lambdas, alpha=spec.alpha,
                             nonnegative=spec.nonnegative, settings=settings)


def _build_path(X, y, spec: LearnerSpec, groups: GroupStructure | None) -> LambdaPath:
    if spec.family == "group_lasso":
        return group_lambda_path(X, y, groups, spec.n_lambda, spec.epsilon)
    return lambda_path(X, y, spec.family, spec.n_lambda, spec.epsilon, spec.alpha)


def cv_select_lambda(
    X: np.ndarray,
    y: np.ndarray,
    spec: LearnerSpec,
    folds: FoldPartition,
    settings: SolverSettings = DEFAULT_SETTINGS,
    groups: GroupStructure | None = None,
) -> CvResult:
    """Select lambda by minimum mean held-out binomial deviance.

    The grid is built on the full data; per fold, the path is refit on the
    training part (warm starts) and scored on the held-out part.  Ties break
    toward the larger lambda.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_fold_classes(y, folds)
    path = _build_path(X, y, spec, groups)
    dev = np.zeros((folds.k, len(path.values)))
    for k in range(1, folds.k + 1):
        tr = folds.train_indices(k)
        te = folds.test_indices(k)
        models = _fit_family_path(X[tr], y[tr], spec, path.values, settings, groups)
        for li, model in enumerate(models):
            dev[k - 1, li] = binomial_deviance(predict_proba(model, X[te]), y[te])
    mean_dev = dev.mean(axis=0)
    # np.argmin returns the first minimizer; the path is decreasing, so this
    # is the largest lambda among ties.
    best = int(np.argmin(mean_dev))
    return CvResult(path=path, mean_deviance=mean_dev,
                    selected_lambda=float(path.values[best]))


def _intercept_only_model(X: np.ndarray, y: np.ndarray) -> FittedLinearModel:
    ybar = float(np.mean(y))
    ybar = min(max(ybar, DEVIANCE_CLIP), 1.0 - DEVIANCE_CLIP)
    return FittedLinearModel(
        intercept=float(np.log(ybar / (1.0 - ybar))),
        coefficients=np.zeros(X.shape[1]),
        penalty=PenaltySpec(family="lasso", lam=float("inf")),
        converged=True,
        n_iterations=0,
    )


def fit_tuned(
    X: np.ndarray,
    y: np.ndarray,
    spec: LearnerSpec,
    seed: int,
    settings: SolverSettings = DEFAULT_SETTINGS,
    groups: GroupStructure | None = None,
    fixed_lambda: float | None = None,
) -> FittedLinearModel:
    """Standardize (if ``spec.standardize``), tune lambda by K-fold CV, and fit on all rows.

    ``fixed_lambda`` bypasses tuning (used by non-nested out-of-fold
    prediction).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if spec.family == "intercept_only":
        return _intercept_only_model(X, y)
    means = scales = None
    if spec.standardize:
        X, means, scales = standardize_columns(X, allow_constant=True)
    if fixed_lambda is None:
        folds = make_folds(len(y), spec.k, seed,
                           stratify_labels=y if spec.stratify else None)
        cvres = cv_select_lambda(X, y, spec, folds, settings, groups)
        path_values = cvres.path.values
        lam = cvres.selected_lambda
    else:
        path = _build_path(X, y, spec, groups)
        path_values = path.values[path.values >= fixed_lambda]
        if len(path_values) == 0 or path_values[-1] != fixed_lambda:
            path_values = np.append(path_values, fixed_lambda)
        lam = fixed_lambda
    models = _fit_family_path(X, y, spec, path_values, settings, groups)
    idx = int(np.argmin(np.abs(path_values - lam)))
    model = models[idx]
    if means is not None:
        model = replace(model, feature_means=means, feature_scales=scales)
    return model


def cv_predictor(
    X: np.ndarray,
    y: np.ndarray,
    spec: LearnerSpec,
    folds: FoldPartition,
    seed: int,
    settings: SolverSettings = DEFAULT_SETTINGS,
    groups: GroupStructure | None = None,
) -> np.ndarray:
    """Out-of-fold prediction vector z: each z_i comes from a model trained
    without row i's fold.

    With ``spec.nested_tuning`` each fold's model re-selects lambda on its own
    training part; otherwise one lambda is selected on the full data first.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_fold_classes(y, folds)
    fixed = None
    if spec.family != "intercept_only" and not spec.nested_tuning:
        fixed = fit_tuned(X, y, spec, seed, settings, groups).penalty.lam
    z = np.empty(len(y))
    for k in range(1, folds.k + 1):
        tr = folds.train_indices(k)
        te = folds.test_indices(k)
        model = fit_tuned(X[tr], y[tr], spec, derive_seed(seed, k), settings,
                          groups, fixed_lambda=fixed)
        z[te] = predict_proba(model, X[te])
    return z

"""Two-level multi-view stacking with penalized logistic base- and meta-learners.

Default configuration: ridge base-learner per view, lasso meta-learner on the
out-of-fold base predictions, with optional nonnegativity constraints on the
meta coefficients.  Base predictions passed to the meta level are
probabilities and are deliberately not standardized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import nnls

from .core import (
    CollinearityError,
    FittedLinearModel,
    FoldPartition,
    InvalidArgumentError,
    MultiViewDataset,
    PenaltySpec,
    derive_seed,
    make_folds,
)
from .cv import LearnerSpec, cv_predictor, fit_tuned
from .solver import predict_proba

SCHEMA_VERSION = 1

DEFAULT_BASE_SPEC = LearnerSpec(family="ridge", standardize=True)
DEFAULT_META_SPEC = LearnerSpec(family="lasso", nonnegative=True, standardize=False)


@dataclass(frozen=True)
class StackedModel:
    """Per-view base models, the meta model, and the Z matrix they produced."""

    base_models: tuple[FittedLinearModel, ...]
    meta_model: FittedLinearModel
    z_matrix: np.ndarray
    fold_partition: FoldPartition
    base_spec: LearnerSpec
    meta_spec: LearnerSpec
    view_names: tuple[str, ...]
    seed: int

    def __post_init__(self):
        if self.meta_model.n_features != len(self.base_models):
            raise InvalidArgumentError("meta model must have one coefficient per view")

    @property
    def n_views(self) -> int:
        return len(self.base_models)


def _fit_one_view(X, y, base_spec, folds, seed):
    model = fit_tuned(X, y, base_spec, derive_seed(seed, 0))
    z = cv_predictor(X, y, base_spec, folds, derive_seed(seed, 1))
    return model, z


def fit_base_level(
    data: MultiViewDataset,
    base_spec: LearnerSpec,
    k: int,
    seed: int,
    n_jobs: int = 1,
) -> tuple[tuple[FittedLinearModel, ...], np.ndarray, FoldPartition]:
    """Full-data base fits plus the out-of-fold prediction matrix Z."""
    y = data.outcomes
    folds = make_folds(data.n, k, derive_seed(seed, 0),
                       stratify_labels=y if base_spec.stratify else None)
    # one shared sub-seed for every view: per-view fits are then pure
    # functions of (X_v, y, folds, seed), making view permutation commute
    # with fitting
    view_seed = derive_seed(seed, 1)
    tasks = [
        delayed(_fit_one_view)(data.views[v], y, base_spec, folds, view_seed)
        for v in range(data.n_views)
    ]
    try:
        results = Parallel(n_jobs=n_jobs)(tasks)
    except Exception as exc:  # annotate with the failing view where possible
        raise type(exc)(f"base-level fitting failed: {exc}") from exc
    base_models = tuple(r[0] for r in results)
    Z = np.column_stack([r[1] for r in results])
    return base_models, Z, folds


def fit_staplr(
    data: MultiViewDataset,
    base_spec: LearnerSpec = DEFAULT_BASE_SPEC,
    meta_spec: LearnerSpec = DEFAULT_META_SPEC,
    k: int = 10,
    seed: int = 0,
    n_jobs: int = 1,
) -> StackedModel:
    """Fit the full two-level stack: base models, Z, then the meta model."""
    base_models, Z, folds = fit_base_level(data, base_spec, k, seed, n_jobs)
    meta = fit_tuned(Z, data.outcomes, meta_spec, derive_seed(seed, 2))
    return StackedModel(
        base_models=base_models, meta_model=meta, z_matrix=Z,
        fold_partition=folds, base_spec=base_spec, meta_spec=meta_spec,
        view_names=data.view_names, seed=int(seed),
    )


def base_probabilities(model: StackedModel, data: MultiViewDataset) -> np.ndarray:
    """n x V matrix of full-data base-model probabilities."""
    if data.n_views != model.n_views:
        raise InvalidArgumentError(
            f"model has {model.n_views} views, data has {data.n_views}"
        )
    cols = []
    for v, (bm, X) in enumerate(zip(model.base_models, data.views)):
        if X.shape[1] != bm.n_features:
            raise InvalidArgumentError(
                f"view {model.view_names[v]!r} has {X.shape[1]} features, "
                f"model expects {bm.n_features}"
            )
        cols.append(predict_proba(bm, X))
    return np.column_stack(cols)


def predict_stacked(model: StackedModel, data: MultiViewDataset) -> np.ndarray:
    """Stacked probability predictions: meta model applied to base probabilities."""
    return predict_proba(model.meta_model, base_probabilities(model, data))


def selected_views(model: StackedModel) -> set[int]:
    """Indices of views with nonzero meta coefficient."""
    return set(np.flatnonzero(model.meta_model.coefficients != 0.0).tolist())


def fit_linear_meta(Z: np.ndarray, y: np.ndarray, nonnegative: bool = False):
    """Unpenalized linear (identity-link) meta fit: intercept + Z beta.

    Exists to study the degenerate behavior of unconstrained stacking with
    null base models; the production meta-learner is the logistic lasso.
    Returns (intercept, beta).
    """
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != len(y):
        raise InvalidArgumentError("Z must be n x V aligned with y")
    if Z.shape[1] >= 2:
        corr = np.corrcoef(Z, rowvar=False)
        off = corr[np.triu_indices_from(corr, k=1)]
        if np.any(np.abs(off) >= 1.0 - 1e-12):
            raise CollinearityError("meta inputs are perfectly collinear")
    zbar = Z.mean(axis=0)
    ybar = y.mean()
    Zc = Z - zbar
    yc = y - ybar
    if nonnegative:
        beta, _ = nnls(Zc, yc)
    else:
        beta, *_ = np.linalg.lstsq(Zc, yc, rcond=None)
    intercept = float(ybar - zbar @ beta)
    return intercept, beta


# ---------------------------------------------------------------------------
# Serialization (versioned JSON; float round-trips are exact via repr)
# ---------------------------------------------------------------------------


def linear_model_to_dict(m: FittedLinearModel) -> dict:
    return {
        "intercept": m.intercept,
        "coefficients": m.coefficients.tolist(),
        "penalty": {
            "family": m.penalty.family,
            "lambda": m.penalty.lam,
            "alpha": m.penalty.alpha,
            "nonnegative": m.penalty.nonnegative,
            "group_map": list(m.penalty.group_map) if m.penalty.group_map else None,
        },
        "converged": m.converged,
        "n_iterations": m.n_iterations,
        "feature_means": None if m.feature_means is None else m.feature_means.tolist(),
        "feature_scales": None if m.feature_scales is None else m.feature_scales.tolist(),
    }


def linear_model_from_dict(d: dict) -> FittedLinearModel:
    pen = d["penalty"]
    lam = pen["lambda"]
    return FittedLinearModel(
        intercept=float(d["intercept"]),
        coefficients=np.asarray(d["coefficients"], dtype=np.float64),
        penalty=PenaltySpec(
            family=pen["family"], lam=float(lam) if lam is not None else 0.0,
            alpha=pen["alpha"], nonnegative=pen["nonnegative"],
            group_map=tuple(pen["group_map"]) if pen["group_map"] else None,
        ),
        converged=bool(d["converged"]),
        n_iterations=int(d["n_iterations"]),
        feature_means=None if d["feature_means"] is None
        else np.asarray(d["feature_means"], dtype=np.float64),
        feature_scales=None if d["feature_scales"] is None
        else np.asarray(d["feature_scales"], dtype=np.float64),
    )


def stacked_model_to_dict(model: StackedModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "stacked_model",
        "seed": model.seed,
        "view_names": list(model.view_names),
        "base_spec": model.base_spec.to_dict(),
        "meta_spec": model.meta_spec.to_dict(),
        "fold_partition": {
            "n": model.fold_partition.n,
            "k": model.fold_partition.k,
            "assignments": model.fold_partition.assignments.tolist(),
        },
        "z_matrix": model.z_matrix.tolist(),
        "base_models": [linear_model_to_dict(m) for m in model.base_models],
        "meta_model": linear_model_to_dict(model.meta_model),
    }


def stacked_model_from_dict(d: dict) -> StackedModel:
    if d.get("schema_version") != SCHEMA_VERSION or d.get("kind") != "stacked_model":
        raise InvalidArgumentError("not a recognized stacked-model document")
    fp = d["fold_partition"]
    return StackedModel(
        base_models=tuple(linear_model_from_dict(m) for m in d["base_models"]),
        meta_model=linear_model_from_dict(d["meta_model"]),
        z_matrix=np.asarray(d["z_matrix"], dtype=np.float64),
        fold_partition=FoldPartition(
            n=int(fp["n"]), k=int(fp["k"]),
            assignments=np.asarray(fp["assignments"], dtype=np.int64),
        ),
        base_spec=LearnerSpec.from_dict(d["base_spec"]),
        meta_spec=LearnerSpec.from_dict(d["meta_spec"]),
        view_names=tuple(d["view_names"]),
        seed=int(d["seed"]),
    )


def save_stacked_model(model: StackedModel, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(stacked_model_to_dict(model), fh)


def load_stacked_model(path: str) -> StackedModel:
    with open(path) as fh:
        return stacked_model_from_dict(json.load(fh))

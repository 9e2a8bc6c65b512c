"""Shared domain types: multi-view datasets, fold partitions, penalties, fitted models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InvalidArgumentError(ValueError):
    """Raised when an argument violates a documented precondition."""


class DegenerateOutcomeError(InvalidArgumentError):
    """Raised when the outcome vector contains a single class."""


class DegenerateFoldError(InvalidArgumentError):
    """Raised when a cross-validation fold cannot support model fitting."""


class ZeroVarianceError(InvalidArgumentError):
    """Raised when a constant column is standardized without passthrough."""


class UndefinedMetricError(InvalidArgumentError):
    """Raised when a metric is undefined for the given inputs (e.g. one class only)."""


class CollinearityError(InvalidArgumentError):
    """Raised when perfectly collinear predictors make estimates non-unique."""


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Deterministic sub-stream generator for (seed, path...).

    Every top-level run owns one 64-bit seed; nested work units (replications,
    folds, views) derive independent streams by extending the entropy path.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(p) for p in path]]))


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic 63-bit integer seed for (seed, path...)."""
    ss = np.random.SeedSequence([int(seed), *[int(p) for p in path]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class MultiViewDataset:
    """V feature blocks over shared rows plus binary outcomes."""

    views: tuple[np.ndarray, ...]
    outcomes: np.ndarray
    view_names: tuple[str, ...]

    def __post_init__(self):
        views = tuple(np.asarray(v, dtype=np.float64) for v in self.views)
        y = np.asarray(self.outcomes)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "outcomes", y.astype(np.int64))
        object.__setattr__(self, "view_names", tuple(self.view_names))
        if len(views) < 1:
            raise InvalidArgumentError("need at least one view")
        if len(self.view_names) != len(views):
            raise InvalidArgumentError("view_names length must match number of views")
        n = views[0].shape[0]
        if n < 2:
            raise InvalidArgumentError("need at least two rows")
        for i, v in enumerate(views):
            if v.ndim != 2 or v.shape[1] < 1:
                raise InvalidArgumentError(f"view {i} must be a 2-d matrix with >= 1 column")
            if v.shape[0] != n:
                raise InvalidArgumentError(f"view {i} has {v.shape[0]} rows, expected {n}")
        if y.shape != (n,):
            raise InvalidArgumentError("outcomes must be a length-n vector")
        if not np.isin(self.outcomes, (0, 1)).all():
            raise InvalidArgumentError("outcomes must contain only 0 and 1")

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def view_sizes(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.views)

    def subset(self, rows: np.ndarray) -> "MultiViewDataset":
        """Dataset restricted to the given row indices."""
        return MultiViewDataset(
            views=tuple(v[rows] for v in self.views),
            outcomes=self.outcomes[rows],
            view_names=self.view_names,
        )


@dataclass(frozen=True)
class FoldPartition:
    """Assignment of n rows to folds 1..K (disjoint, covering, nonempty)."""

    n: int
    assignments: np.ndarray
    k: int

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", a)
        if a.shape != (self.n,):
            raise InvalidArgumentError("assignments must have length n")
        present = np.unique(a)
        if present.min() < 1 or present.max() > self.k or len(present) != self.k:
            raise InvalidArgumentError("every fold 1..K must be nonempty")

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k + 1)[1:]


def make_folds(
    n: int,
    k: int,
    seed: int,
    stratify_labels: np.ndarray | None = None,
) -> FoldPartition:
    """Seeded K-fold partition of {1..n}; fold sizes differ by at most one.

    Indices are shuffled with the seeded generator and dealt round-robin.  In
    stratified mode the dealing happens within each class, balancing per-fold
    class counts to within one.
    """
    if not (2 <= k <= n):
        raise InvalidArgumentError(f"need 2 <= K <= n, got K={k}, n={n}")
    rng = derive_rng(seed)
    assignments = np.zeros(n, dtype=np.int64)
    if stratify_labels is None:
        order = rng.permutation(n)
        assignments[order] = np.arange(n) % k + 1
    else:
        labels = np.asarray(stratify_labels)
        if labels.shape != (n,):
            raise InvalidArgumentError("stratify_labels must have length n")
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            if len(members) < k:
                raise DegenerateFoldError(
                    f"class {cls} has {len(members)} members, fewer than K={k}"
                )
            order = rng.permutation(members)
            assignments[order] = np.arange(len(members)) % k + 1
    return FoldPartition(n=n, assignments=assignments, k=k)


def standardize_columns(
    X: np.ndarray,
    allow_constant: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns to mean 0 and (population) standard deviation 1.

    The n-denominator form is used so a standardized column satisfies
    sum(x^2) = n, which keeps the penalty-path formulas free of extra factors.
    Constant columns either raise or, with ``allow_constant``, pass through
    centered with scale 1.
    """
    X = np.asarray(X, dtype=np.float64)
    means = X.mean(axis=0)
    scales = X.std(axis=0)  # ddof=0
    constant = scales == 0.0
    if constant.any():
        if not allow_constant:
            raise ZeroVarianceError(
                f"columns {np.flatnonzero(constant).tolist()} are constant"
            )
        scales = np.where(constant, 1.0, scales)
    return (X - means) / scales, means, scales


def unstandardize_columns(Z: np.ndarray, means: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Inverse of :func:`standardize_columns`."""
    return Z * scales + means


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family and strength for a penalized logistic fit.

    Families: ``lasso`` (L1), ``ridge`` (squared L2), ``elastic_net`` (mix,
    requires ``alpha`` in (0,1)), ``group_lasso`` (sum of group L2 norms,
    requires ``group_map``).  ``nonnegative`` constrains all slope
    coefficients to be >= 0 (the intercept is never constrained).
    """

    family: str
    lam: float
    alpha: float | None = None
    nonnegative: bool = False
    group_map: tuple[int, ...] | None = None

    _FAMILIES = ("lasso", "ridge", "elastic_net", "group_lasso")

    def __post_init__(self):
        if self.family not in self._FAMILIES:
            raise InvalidArgumentError(f"unknown penalty family {self.family!r}")
        if not (self.lam >= 0.0):
            raise InvalidArgumentError("lambda must be nonnegative")
        if self.family == "elastic_net":
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise InvalidArgumentError("elastic_net requires alpha in (0, 1)")
        elif self.alpha is not None:
            raise InvalidArgumentError("alpha is only valid for elastic_net")
        if (self.group_map is not None) != (self.family == "group_lasso"):
            raise InvalidArgumentError("group_map is required iff family is group_lasso")
        if self.group_map is not None:
            object.__setattr__(self, "group_map", tuple(int(g) for g in self.group_map))

    @property
    def l1_fraction(self) -> float:
        """Share of lambda applied to the L1 term (glmnet-style mixing)."""
        if self.family == "lasso":
            return 1.0
        if self.family == "ridge":
            return 0.0
        if self.family == "elastic_net":
            return float(self.alpha)
        raise InvalidArgumentError("l1_fraction undefined for group_lasso")


@dataclass(frozen=True)
class FittedLinearModel:
    """Intercept plus coefficient vector, with the penalty it was fit under.

    ``feature_means``/``feature_scales`` hold the training standardization, if
    any; prediction applies them before the linear predictor.
    """

    intercept: float
    coefficients: np.ndarray
    penalty: PenaltySpec
    converged: bool
    n_iterations: int
    feature_means: np.ndarray | None = None
    feature_scales: np.ndarray | None = None

    def __post_init__(self):
        beta = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", beta)
        if self.penalty.nonnegative and beta.size and beta.min() < 0.0:
            raise InvalidArgumentError("nonnegative penalty produced a negative coefficient")

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]

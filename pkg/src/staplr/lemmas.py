"""Closed-form results about out-of-fold intercept-only predictors.

When every fold's model is the constant (intercept-only) predictor, the
out-of-fold prediction vector z is an affine function of the held-out fold
means, and its correlation with the outcome is never positive.  This module
exposes those identities as executable oracles:

- the out-of-fold constant predictor itself;
- the closed-form Pearson correlation rho(y, z), with its equal-fold and
  leave-one-out specializations (-(K-1) sigma(z)/sigma(y) and -1);
- the leave-one-out variance identity sigma^2(z) = sigma^2(y)/(n-1)^2;
- closed-form two-regressor least squares, which exhibits the degenerate
  stacking solution (beta_1 = 1 - n on the null predictor, beta_2 = 0 on the
  informative one).

All variances here use the (n-1)-divisor convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CollinearityError,
    FoldPartition,
    InvalidArgumentError,
    UndefinedMetricError,
    derive_rng,
    make_folds,
)


def _var(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1))


def _cov(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.cov(x, y, ddof=1)[0, 1])


@dataclass(frozen=True)
class CorrelationReport:
    """Closed-form vs empirical correlation between y and its out-of-fold
    constant predictor."""

    closed_form_rho: float
    empirical_rho: float
    k: int
    equal_folds: bool

    def __post_init__(self):
        for r in (self.closed_form_rho, self.empirical_rho):
            if not (-1.0 - 1e-9 <= r <= 1.0 + 1e-9):
                raise InvalidArgumentError("correlations must lie in [-1, 1]")


def intercept_cv_predictor(y: np.ndarray, folds: FoldPartition) -> np.ndarray:
    """z_i = mean of y over rows outside row i's fold."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (folds.n,):
        raise InvalidArgumentError("y must have length folds.n")
    z = np.empty_like(y)
    total = y.sum()
    for k in range(1, folds.k + 1):
        te = folds.test_indices(k)
        z[te] = (total - y[te].sum()) / (folds.n - len(te))
    return z


def lemma_closed_form_rho(y: np.ndarray, folds: FoldPartition) -> float:
    """Closed form for rho(y, z) of the out-of-fold constant predictor."""
    y = np.asarray(y, dtype=np.float64)
    z = intercept_cv_predictor(y, folds)
    sy = np.sqrt(_var(y))
    sz = np.sqrt(_var(z))
    if sy == 0.0 or sz == 0.0:
        raise UndefinedMetricError("correlation undefined: constant y or z")
    ybar = y.mean()
    num = 0.0
    for k in range(1, folds.k + 1):
        te = folds.test_indices(k)
        num += (y[te] - ybar).sum() ** 2 / (folds.n - len(te))
    return float(-num / ((folds.n - 1) * sy * sz))


def lemma1_rho(y: np.ndarray, folds: FoldPartition) -> CorrelationReport:
    """Closed-form and empirical rho(y, z) for the out-of-fold constant predictor."""
    y = np.asarray(y, dtype=np.float64)
    z = intercept_cv_predictor(y, folds)
    sy = np.sqrt(_var(y))
    sz = np.sqrt(_var(z))
    if sy == 0.0 or sz == 0.0:
        raise UndefinedMetricError("correlation undefined: constant y or z")
    closed = lemma_closed_form_rho(y, folds)
    empirical = float(np.corrcoef(y, z)[0, 1])
    sizes = folds.fold_sizes()
    return CorrelationReport(
        closed_form_rho=closed, empirical_rho=empirical, k=folds.k,
        equal_folds=bool((sizes == sizes[0]).all()),
    )


def loo_variance_identity(y: np.ndarray) -> tuple[float, float]:
    """(sigma^2(z), sigma^2(y)/(n-1)^2) under leave-one-out; the two agree."""
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n < 3:
        raise InvalidArgumentError("need n >= 3")
    assignments = np.arange(1, n + 1)
    z = intercept_cv_predictor(y, FoldPartition(n=n, assignments=assignments, k=n))
    return _var(z), _var(y) / (n - 1) ** 2


def ols_two_predictor(y: np.ndarray, z1: np.ndarray, z2: np.ndarray):
    """Closed-form least squares of y on (1, z1, z2): returns (b0, b1, b2)."""
    y = np.asarray(y, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if not (y.shape == z1.shape == z2.shape):
        raise InvalidArgumentError("y, z1, z2 must share length")
    v1, v2 = _var(z1), _var(z2)
    if v1 == 0.0 or v2 == 0.0:
        raise CollinearityError("constant regressor")
    rho12 = _cov(z1, z2) / np.sqrt(v1 * v2)
    if abs(rho12) >= 1.0 - 1e-12:
        raise CollinearityError("z1 and z2 are perfectly collinear")
    gamma = (1.0 - rho12**2) * v1 * v2
    b1 = (v2 * _cov(y, z1) - _cov(z1, z2) * _cov(y, z2)) / gamma
    b2 = (v1 * _cov(y, z2) - _cov(z1, z2) * _cov(y, z1)) / gamma
    b0 = float(y.mean() - b1 * z1.mean() - b2 * z2.mean())
    return b0, float(b1), float(b2)


# ---------------------------------------------------------------------------
# Randomized self-check suite (backs the `verify-lemmas` CLI subcommand)
# ---------------------------------------------------------------------------


def _random_case(rng: np.random.Generator):
    n = int(rng.integers(6, 60))
    k = int(rng.integers(2, n + 1))
    y = rng.integers(0, 2, size=n).astype(np.float64)
    while y.min() == y.max():
        y = rng.integers(0, 2, size=n).astype(np.float64)
    folds = make_folds(n, k, int(rng.integers(0, 2**31)))
    return y, folds


def verify_lemmas(trials: int = 100, seed: int = 0, tol: float = 1e-12) -> list[dict]:
    """Run randomized checks of every closed form; returns one row per check."""
    rng = derive_rng(seed)
    rows = []

    def check(name, worst, limit):
        rows.append({"check": name, "worst_error": worst, "tolerance": limit,
                     "passed": bool(worst <= limit)})

    worst_match = worst_sign = worst_equal = worst_loo = worst_var = 0.0
    for _ in range(trials):
        y, folds = _random_case(rng)
        try:
            rep = lemma1_rho(y, folds)
        except UndefinedMetricError:
            continue
        worst_match = max(worst_match, abs(rep.closed_form_rho - rep.empirical_rho))
        worst_sign = max(worst_sign, rep.closed_form_rho)
        if rep.equal_folds:
            sz = np.sqrt(_var(intercept_cv_predictor(y, folds)))
            sy = np.sqrt(_var(y))
            expect = -(folds.k - 1) * sz / sy
            worst_equal = max(worst_equal, abs(rep.closed_form_rho - expect))
        if folds.k == folds.n:
            worst_loo = max(worst_loo, abs(rep.empirical_rho + 1.0))
        a, b = loo_variance_identity(y)
        worst_var = max(worst_var, abs(a - b))
    check("closed-form rho equals empirical rho", worst_match, tol)
    check("closed-form rho is nonpositive", worst_sign, tol)
    check("equal-fold specialization -(K-1)s(z)/s(y)", worst_equal, tol)
    check("leave-one-out rho equals -1", worst_loo, tol)
    check("leave-one-out variance identity", worst_var, tol)

    worst_b1 = worst_b2 = worst_lsq = 0.0
    for _ in range(trials):
        n = int(rng.integers(6, 60))
        y = rng.integers(0, 2, size=n).astype(np.float64)
        while y.min() == y.max():
            y = rng.integers(0, 2, size=n).astype(np.float64)
        loo = FoldPartition(n=n, assignments=np.arange(1, n + 1), k=n)
        z1 = intercept_cv_predictor(y, loo)
        z2 = 0.5 * y + 0.2 * rng.standard_normal(n)
        if not (0.0 < np.corrcoef(y, z2)[0, 1] < 1.0):
            continue
        b0, b1, b2 = ols_two_predictor(y, z1, z2)
        worst_b1 = max(worst_b1, abs(b1 - (1.0 - n)))
        worst_b2 = max(worst_b2, abs(b2))
        A = np.column_stack([np.ones(n), z1, z2])
        ref, *_ = np.linalg.lstsq(A, y, rcond=None)
        worst_lsq = max(worst_lsq, float(np.abs(np.array([b0, b1, b2]) - ref).max()))
    check("degenerate least squares: b1 = 1 - n", worst_b1, 1e-8)
    check("degenerate least squares: b2 = 0", worst_b2, 1e-8)
    check("closed form matches generic least squares", worst_lsq, 1e-8)
    return rows

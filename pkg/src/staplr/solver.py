"""Penalized logistic regression via IRLS with coordinate-wise updates.

The objective minimized is the negative mean log-likelihood plus a penalty:

    f(b0, beta) = -(1/n) * sum_i [ y_i * eta_i - log(1 + exp(eta_i)) ]
                  + lam * ( a * ||beta||_1 + (1 - a)/2 * ||beta||_2^2 )

with eta_i = b0 + x_i . beta and mixing share a = 1 (lasso), a = 0 (ridge),
a = alpha (elastic net).  The intercept is never penalized.  Optional
nonnegativity clamps each coordinate update at zero.

The outer loop forms the usual quadratic approximation (working responses and
weights); the inner loop performs coordinate sweeps with warm starts down the
lambda path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    DegenerateOutcomeError,
    FittedLinearModel,
    InvalidArgumentError,
    PenaltySpec,
)


@dataclass(frozen=True)
class SolverSettings:
    """Optimizer schedule; all values must be positive."""

    coef_tolerance: float = 1e-7
    max_outer_iterations: int = 100
    max_inner_iterations: int = 100_000
    weight_floor: float = 1e-5
    prob_clip: float = 1e-5

    def __post_init__(self):
        for name in ("coef_tolerance", "max_outer_iterations", "max_inner_iterations",
                     "weight_floor", "prob_clip"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class LambdaPath:
    """Strictly decreasing, log-equispaced penalty grid."""

    values: np.ndarray
    lambda_max: float
    epsilon: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or len(v) < 1:
            raise InvalidArgumentError("path must be a nonempty vector")
        if len(v) > 1 and not (np.diff(v) < 0).all():
            raise InvalidArgumentError("path must be strictly decreasing")


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if gamma < 0:
        raise InvalidArgumentError("gamma must be nonnegative")
    return float(np.sign(z) * max(abs(z) - gamma, 0.0))


def coordinate_update_nonneg(z: float, gamma: float) -> float:
    """Soft threshold followed by clamping at zero (nonnegative update rule)."""
    return max(soft_threshold(z, gamma), 0.0)


@njit(cache=True)
def _fit_one(X, y, b0, beta, lam, l1_frac, nonneg, tol, max_outer, max_inner,
             weight_floor, prob_clip, obj_trace):
    """One penalized logistic fit; beta updated in place.

    Returns (b0, converged, n_outer, sweeps_used).  obj_trace[t] records the
    objective after outer iteration t (for monotonicity checks); unused slots
    stay NaN.
    """
    n, m = X.shape
    l2 = lam * (1.0 - l1_frac)
    l1 = lam * l1_frac
    sweeps = 0
    converged = False
    n_outer = 0
    for outer in range(max_outer):
        n_outer = outer + 1
        # quadratic approximation at the current iterate
        eta = b0 + X @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        for i in range(n):
            if p[i] < prob_clip:
                p[i] = prob_clip
            elif p[i] > 1.0 - prob_clip:
                p[i] = 1.0 - prob_clip
        w = p * (1.0 - p)
        for i in range(n):
            if w[i] < weight_floor:
                w[i] = weight_floor
        r = (y - p) / w  # residual of the working response around eta
        d = np.empty(m)
        for j in range(m):
            s = 0.0
            for i in range(n):
                s += w[i] * X[i, j] * X[i, j]
            d[j] = s / n
        wsum = w.sum()
        beta_outer = beta.copy()
        b0_outer = b0
        # inner coordinate sweeps at fixed weights
        while sweeps < max_inner:
            sweeps += 1
            maxdelta = 0.0
            # closed-form intercept update (weighted mean of working residual)
            shift = 0.0
            for i in range(n):
                shift += w[i] * r[i]
            shift /= wsum
            if shift != 0.0:
                b0 += shift
                r -= shift
                delta = (wsum / n) * shift * shift
                if delta > maxdelta:
                    maxdelta = delta
            for j in range(m):
                if d[j] == 0.0 and l2 == 0.0:
                    continue
                zj = beta[j] * d[j]
                for i in range(n):
                    zj += w[i] * X[i, j] * r[i] / n
                if zj > l1:
                    bnew = (zj - l1) / (d[j] + l2)
                elif zj < -l1:
                    bnew = (zj + l1) / (d[j] + l2)
                else:
                    bnew = 0.0
                if nonneg and bnew < 0.0:
                    bnew = 0.0
                if bnew != beta[j]:
                    diff = bnew - beta[j]
                    for i in range(n):
                        r[i] -= X[i, j] * diff
                    beta[j] = bnew
                    delta = d[j] * diff * diff
                    if delta > maxdelta:
                        maxdelta = delta
            if maxdelta < tol:
                break
        # objective bookkeeping (stable log(1 + exp(eta)))
        eta = b0 + X @ beta
        nll = 0.0
        for i in range(n):
            if eta[i] > 0.0:
                nll += eta[i] + np.log1p(np.exp(-eta[i])) - y[i] * eta[i]
            else:
                nll += np.log1p(np.exp(eta[i])) - y[i] * eta[i]
        pen = 0.0
        for j in range(m):
            pen += l1 * abs(beta[j]) + 0.5 * l2 * beta[j] * beta[j]
        obj_trace[outer] = nll / n + pen
        # outer convergence: coefficient movement across the reweighting
        maxmove = (wsum / n) * (b0 - b0_outer) ** 2
        for j in range(m):
            move = d[j] * (beta[j] - beta_outer[j]) ** 2
            if move > maxmove:
                maxmove = move
        if maxmove < tol:
            converged = True
            break
    return b0, converged, n_outer, sweeps


@njit(cache=True)
def _fit_path(X, y, lambdas, l1_frac, nonneg, tol, max_outer, max_inner,
              weight_floor, prob_clip):
    """Warm-started fits down a decreasing lambda grid."""
    n, m = X.shape
    L = len(lambdas)
    ybar = y.mean()
    b0 = np.log(ybar / (1.0 - ybar))
    beta = np.zeros(m)
    intercepts = np.empty(L)
    betas = np.empty((L, m))
    conv = np.zeros(L, dtype=np.bool_)
    iters = np.zeros(L, dtype=np.int64)
    trace = np.full(max_outer, np.nan)
    for li in range(L):
        b0, ok, it, _ = _fit_one(X, y, b0, beta, lambdas[li], l1_frac, nonneg,
                                 tol, max_outer, max_inner, weight_floor,
                                 prob_clip, trace)
        intercepts[li] = b0
        betas[li] = beta
        conv[li] = ok
        iters[li] = it
    return intercepts, betas, conv, iters


def _validate_xy(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # column-major layout: the inner loops scan one column at a time
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InvalidArgumentError("X must be n x m and y length n")
    if X.shape[0] < 2:
        raise InvalidArgumentError("need at least two observations")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise InvalidArgumentError("inputs must be finite")
    if not ((y == 0) | (y == 1)).all():
        raise InvalidArgumentError("y must be binary 0/1")
    if y.min() == y.max():
        raise DegenerateOutcomeError("y contains a single class")
    return X, y


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    penalty: PenaltySpec,
    settings: SolverSettings = DEFAULT_SETTINGS,
    warm_start: FittedLinearModel | None = None,
    return_trace: bool = False,
):
    """Fit one penalized logistic regression (lasso / ridge / elastic net).

    With ``return_trace`` also returns the per-outer-iteration objective
    values (NaN-padded).
    """
    X, y = _validate_xy(X, y)
    if penalty.family == "group_lasso":
        raise InvalidArgumentError("use grouplasso.fit_group_lasso for group penalties")
    n, m = X.shape
    if penalty.lam == 0.0 and m >= n:
        raise InvalidArgumentError("unpenalized fit refused for m >= n (not identifiable)")
    ybar = y.mean()
    if m == 0:
        model = FittedLinearModel(
            intercept=float(np.log(ybar / (1.0 - ybar))),
            coefficients=np.zeros(0),
            penalty=penalty,
            converged=True,
            n_iterations=0,
        )
        if return_trace:
            return model, np.full(settings.max_outer_iterations, np.nan)
        return model
    if warm_start is not None and warm_start.n_features == m:
        b0 = float(warm_start.intercept)
        beta = warm_start.coefficients.copy()
    else:
        b0 = float(np.log(ybar / (1.0 - ybar)))
        beta = np.zeros(m)
    trace = np.full(settings.max_outer_iterations, np.nan)
    b0, conv, iters, _ = _fit_one(
        X, y, b0, beta, float(penalty.lam), penalty.l1_fraction,
        penalty.nonnegative, settings.coef_tolerance,
        settings.max_outer_iterations, settings.max_inner_iterations,
        settings.weight_floor, settings.prob_clip, trace,
    )
    if penalty.nonnegative:
        beta = np.maximum(beta, 0.0)
    model = FittedLinearModel(
        intercept=float(b0), coefficients=beta, penalty=penalty,
        converged=bool(conv), n_iterations=int(iters),
    )
    if return_trace:
        return model, trace
    return model


def fit_logistic_path(
    X: np.ndarray,
    y: np.ndarray,
    family: str,
    lambdas: np.ndarray,
    alpha: float | None = None,
    nonnegative: bool = False,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> list[FittedLinearModel]:
    """Warm-started fits for every value of a decreasing lambda grid."""
    X, y = _validate_xy(X, y)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    probe = PenaltySpec(family=family, lam=float(lambdas[0]), alpha=alpha,
                        nonnegative=nonnegative)
    intercepts, betas, conv, iters = _fit_path(
        X, y, lambdas, probe.l1_fraction, nonnegative,
        settings.coef_tolerance, settings.max_outer_iterations,
        settings.max_inner_iterations, settings.weight_floor, settings.prob_clip,
    )
    models = []
    for li, lam in enumerate(lambdas):
        beta = betas[li]
        if nonnegative:
            beta = np.maximum(beta, 0.0)
        models.append(FittedLinearModel(
            intercept=float(intercepts[li]), coefficients=beta,
            penalty=PenaltySpec(family=family, lam=float(lam), alpha=alpha,
                                nonnegative=nonnegative),
            converged=bool(conv[li]), n_iterations=int(iters[li]),
        ))
    return models


def lasso_lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest lambda at which the lasso fit is all-zero: max_j |x_j . (y - ybar)| / n."""
    X, y = _validate_xy(X, y)
    return float(np.abs(X.T @ (y - y.mean())).max() / X.shape[0])


# Ridge has no finite all-zero lambda; its path top is a documented convention.
RIDGE_LAMBDA_MAX_FACTOR = 1000.0


def lambda_path(
    X: np.ndarray,
    y: np.ndarray,
    family: str,
    n_lambda: int = 100,
    epsilon: float | None = None,
    alpha: float | None = None,
) -> LambdaPath:
    """Log-equispaced grid from lambda_max down to epsilon * lambda_max."""
    X, y = _validate_xy(X, y)
    n, m = X.shape
    if n_lambda < 1:
        raise InvalidArgumentError("n_lambda must be >= 1")
    if epsilon is None:
        epsilon = 1e-4 if n > m else 1e-2
    if not (0.0 < epsilon < 1.0):
        raise InvalidArgumentError("epsilon must be in (0, 1)")
    lmax = lasso_lambda_max(X, y)
    if family == "elastic_net":
        if alpha is None or not (0.0 < alpha < 1.0):
            raise InvalidArgumentError("elastic_net requires alpha in (0, 1)")
        lmax = lmax / alpha
    elif family == "ridge":
        lmax = lmax * RIDGE_LAMBDA_MAX_FACTOR
    elif family != "lasso":
        raise InvalidArgumentError(f"unknown family {family!r}")
    if lmax <= 0.0:
        lmax = 1e-3  # degenerate data (all columns orthogonal to y); arbitrary small grid
    values = np.geomspace(lmax, lmax * epsilon, n_lambda) if n_lambda > 1 else np.array([lmax])
    return LambdaPath(values=values, lambda_max=float(lmax), epsilon=float(epsilon))


def predict_proba(model: FittedLinearModel, X: np.ndarray) -> np.ndarray:
    """P(y=1 | x) under the fitted model, applying stored standardization first."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InvalidArgumentError(
            f"X has {X.shape[1] if X.ndim == 2 else '?'} columns, model expects {model.n_features}"
        )
    if model.feature_means is not None:
        X = (X - model.feature_means) / model.feature_scales
    eta = model.intercept + X @ model.coefficients
    # stable inverse logit
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def penalized_objective(
    X: np.ndarray,
    y: np.ndarray,
    intercept: float,
    beta: np.ndarray,
    penalty: PenaltySpec,
) -> float:
    """The minimized objective (mean negative log-likelihood + penalty)."""
    eta = intercept + X @ beta
    nll = float(np.mean(np.logaddexp(0.0, eta) - y * eta))
    if penalty.family == "group_lasso":
        from .grouplasso import group_penalty_value

        return nll + group_penalty_value(beta, penalty)
    a = penalty.l1_fraction
    pen = penalty.lam * (a * np.abs(beta).sum() + 0.5 * (1 - a) * beta @ beta)
    return nll + float(pen)


def kkt_residual(X: np.ndarray, y: np.ndarray, model: FittedLinearModel) -> float:
    """Max stationarity violation of the fitted optimum (0 at an exact solution)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = predict_proba(model, X)
    n = X.shape[0]
    g = X.T @ (p - y) / n  # gradient of the smooth part w.r.t. beta
    pen = model.penalty
    a = pen.l1_fraction
    l1 = pen.lam * a
    l2 = pen.lam * (1 - a)
    beta = model.coefficients
    res = abs(float(np.mean(p - y)))  # intercept stationarity
    for j in range(len(beta)):
        gj = g[j] + l2 * beta[j]
        if beta[j] > 0:
            res = max(res, abs(gj + l1))
        elif beta[j] < 0:
            res = max(res, abs(gj - l1))
        elif pen.nonnegative:
            # at the boundary the directional derivative must be >= 0
            res = max(res, max(0.0, -gj - l1))
        else:
            res = max(res, max(0.0, abs(gj) - l1))
    return res

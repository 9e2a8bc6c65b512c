"""Synthetic multi-view generators and the replication experiment runner.

Data are block-correlated Gaussians built from a three-factor construction
(one global factor, one per-view factor, one idiosyncratic term), giving
population correlation rho_w within a view and rho_b between views.  Outcomes
are Bernoulli draws from a logistic model whose nonzero coefficients are
assigned per view with a configurable signal probability.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .core import (
    InvalidArgumentError,
    MultiViewDataset,
    derive_rng,
    derive_seed,
    standardize_columns,
)
from .cv import LearnerSpec, fit_tuned
from .grouplasso import GroupStructure, selected_groups
from .metrics import accuracy, auc, selection_summary
from .solver import DEFAULT_SETTINGS, SolverSettings, predict_proba
from .stacking import (
    DEFAULT_BASE_SPEC,
    StackedModel,
    fit_base_level,
    predict_stacked,
    selected_views,
)

METHODS = ("staplr_nn", "staplr_unconstrained", "group_lasso")

INV_SQRT = "inv_sqrt"  # per-view effect size 1/sqrt(m_v)


@dataclass(frozen=True)
class SimulationConfig:
    """Generative parameters for one experimental condition."""

    name: str
    n: int
    view_sizes: tuple[int, ...]
    rho_w: float
    rho_b: float
    signal_probs: tuple[float, ...]
    beta_magnitude: float | str = 0.04
    beta0: float = 0.0
    seed: int = 1
    replications: int = 100
    test_n: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "view_sizes", tuple(int(m) for m in self.view_sizes))
        object.__setattr__(self, "signal_probs", tuple(float(p) for p in self.signal_probs))
        if self.n < 2:
            raise InvalidArgumentError("n must be >= 2")
        if not (0.0 <= self.rho_b <= self.rho_w < 1.0):
            raise InvalidArgumentError("need 0 <= rho_b <= rho_w < 1")
        if len(self.signal_probs) != len(self.view_sizes):
            raise InvalidArgumentError("one signal probability per view required")
        if any(not (0.0 <= p <= 1.0) for p in self.signal_probs):
            raise InvalidArgumentError("signal probabilities must lie in [0, 1]")
        if any(m < 1 for m in self.view_sizes):
            raise InvalidArgumentError("view sizes must be >= 1")
        if isinstance(self.beta_magnitude, str) and self.beta_magnitude != INV_SQRT:
            raise InvalidArgumentError(f"unknown beta rule {self.beta_magnitude!r}")
        if self.replications < 1:
            raise InvalidArgumentError("replications must be >= 1")

    @property
    def n_views(self) -> int:
        return len(self.view_sizes)

    @property
    def total_features(self) -> int:
        return sum(self.view_sizes)


@dataclass(frozen=True)
class GroundTruth:
    """True coefficient vector (concatenated view order) and signal masks."""

    beta: np.ndarray
    signal_mask: np.ndarray
    view_has_signal: tuple[bool, ...]

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        mask = np.asarray(self.signal_mask, dtype=bool)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "signal_mask", mask)
        if beta.shape != mask.shape or not ((beta != 0) == mask).all():
            raise InvalidArgumentError("beta must be nonzero exactly on the signal mask")


def gen_block_gaussian(
    config: SimulationConfig,
    rng: np.random.Generator,
    n: int | None = None,
) -> list[np.ndarray]:
    """Draw block-correlated standard-normal views, columns standardized."""
    n = config.n if n is None else n
    sb = np.sqrt(config.rho_b)
    sv = np.sqrt(config.rho_w - config.rho_b)
    se = np.sqrt(1.0 - config.rho_w)
    g = rng.standard_normal((n, 1))
    views = []
    for m in config.view_sizes:
        h = rng.standard_normal((n, 1))
        e = rng.standard_normal((n, m))
        X = sb * g + sv * h + se * e
        X, _, _ = standardize_columns(X, allow_constant=True)
        views.append(X)
    return views


def draw_ground_truth(config: SimulationConfig, rng: np.random.Generator) -> GroundTruth:
    """Assign per-feature signal flags, sign flips, and magnitudes."""
    betas, masks, flags = [], [], []
    for m, pi in zip(config.view_sizes, config.signal_probs):
        mask = rng.random(m) < pi
        signs = np.where(rng.random(m) < 0.5, 1.0, -1.0)
        if config.beta_magnitude == INV_SQRT:
            mag = 1.0 / np.sqrt(m)
        else:
            mag = float(config.beta_magnitude)
        beta = np.where(mask, signs * mag, 0.0)
        mask = beta != 0.0  # magnitude 0 would make flagged features non-signal
        betas.append(beta)
        masks.append(mask)
        flags.append(bool(mask.any()))
    return GroundTruth(beta=np.concatenate(betas),
                       signal_mask=np.concatenate(masks),
                       view_has_signal=tuple(flags))


def outcome_from_truth(
    views: list[np.ndarray],
    truth: GroundTruth,
    beta0: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bernoulli outcomes from the logistic model defined by the ground truth."""
    X = np.hstack(views)
    eta = beta0 + X @ truth.beta
    p = 1.0 / (1.0 + np.exp(-eta))
    return (rng.random(len(p)) < p).astype(np.int64)


def gen_outcome(
    views: list[np.ndarray],
    config: SimulationConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, GroundTruth]:
    """Draw a fresh ground truth and matching Bernoulli outcomes."""
    truth = draw_ground_truth(config, rng)
    return outcome_from_truth(views, truth, config.beta0, rng), truth


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_CORRELATIONS = ((0.1, 0.0), (0.4, 0.0), (0.4, 0.2))
_MAIN_SIGNAL_PROBS = (1.0,) * 5 + (0.5,) * 5 + (0.0,) * 20


def _scaled(value: int, scale: float, floor: int) -> int:
    return max(floor, int(round(value * scale)))


def preset_configs(name: str, scale: float = 1.0, seed: int = 1) -> list[SimulationConfig]:
    """Named experiment grids.  ``scale`` < 1 shrinks replication counts (all
    presets) and view sizes (main and view_size_sweep) for desk-scale runs."""
    if scale <= 0:
        raise InvalidArgumentError("scale must be positive")
    reps = _scaled(100, scale, 1)
    configs = []
    if name == "main":
        for n in (200, 2000):
            for m in (250, 2500):
                for rw, rb in _CORRELATIONS:
                    configs.append(SimulationConfig(
                        name=f"main_n{n}_m{_scaled(m, scale, 2)}_rw{rw:g}_rb{rb:g}",
                        n=n, view_sizes=(_scaled(m, scale, 2),) * 30,
                        rho_w=rw, rho_b=rb, signal_probs=_MAIN_SIGNAL_PROBS,
                        beta_magnitude=0.04, seed=seed, replications=reps,
                        test_n=1000,
                    ))
    elif name == "sample_sweep":
        for rw, rb in _CORRELATIONS:
            for n in (50, 100, 200, 300, 500, 750, 1000, 2000, 5000, 10000):
                configs.append(SimulationConfig(
                    name=f"sweep_n{n}_rw{rw:g}_rb{rb:g}",
                    n=n, view_sizes=(25,) * 30, rho_w=rw, rho_b=rb,
                    signal_probs=_MAIN_SIGNAL_PROBS, beta_magnitude=0.12,
                    seed=seed, replications=reps,
                ))
    elif name == "view_size_sweep":
        sizes, probs = [], []
        for m in (10, 50, 250, 750, 2500):
            m = _scaled(m, scale, 2)
            sizes += [m] * 6
            probs += [1.0, 0.5, 0.0, 0.0, 0.0, 0.0]
        for rw, rb in _CORRELATIONS:
            configs.append(SimulationConfig(
                name=f"viewsize_rw{rw:g}_rb{rb:g}",
                n=2000, view_sizes=tuple(sizes), rho_w=rw, rho_b=rb,
                signal_probs=tuple(probs), beta_magnitude=INV_SQRT,
                seed=seed, replications=reps,
            ))
    else:
        raise InvalidArgumentError(f"unknown preset {name!r}")
    return configs


# ---------------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------------

GROUP_LASSO_SPEC = LearnerSpec(family="group_lasso", standardize=True)
META_NN_SPEC = LearnerSpec(family="lasso", nonnegative=True, standardize=False)
META_UNCONSTRAINED_SPEC = LearnerSpec(family="lasso", nonnegative=False,
                                      standardize=False)


def _base_row(config: SimulationConfig, cond_idx: int, rep: int, method: str) -> dict:
    return {
        "condition": config.name,
        "condition_index": cond_idx,
        "replication": rep,
        "method": method,
        "n": config.n,
        "rho_w": config.rho_w,
        "rho_b": config.rho_b,
        "n_views": config.n_views,
        "selected_views": "",
        "n_selected_views": 0,
        "n_selected_features": 0,
        "auc": "",
        "accuracy": "",
        "error": "",
        "fit_seconds": 0.0,
    }


def _evaluate(row: dict, scores: np.ndarray | None, y_test: np.ndarray | None) -> None:
    if scores is not None and y_test is not None:
        row["auc"] = auc(scores, y_test)
        row["accuracy"] = accuracy(scores, y_test)


def _staplr_features(model: StackedModel, chosen: set[int]) -> int:
    return int(sum(np.count_nonzero(model.base_models[v].coefficients) for v in chosen))


def run_replication(
    config: SimulationConfig,
    cond_idx: int,
    rep: int,
    methods: tuple[str, ...] = METHODS,
    k: int = 10,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> list[dict]:
    """Generate one dataset and fit every requested method on it."""
    for m in methods:
        if m not in METHODS:
            raise InvalidArgumentError(f"unknown method {m!r}")
    data_rng = derive_rng(config.seed, cond_idx, rep, 0)
    views = gen_block_gaussian(config, data_rng)
    y, truth = gen_outcome(views, config, data_rng)
    if y.min() == y.max():  # resample once; a one-class draw is astronomically rare
        y = outcome_from_truth(views, truth, config.beta0, data_rng)
    names = tuple(f"view{v}" for v in range(config.n_views))
    data = MultiViewDataset(views=tuple(views), outcomes=y, view_names=names)
    test_views = y_test = None
    if config.test_n:
        test_views = gen_block_gaussian(config, data_rng, n=config.test_n)
        y_test = outcome_from_truth(test_views, truth, config.beta0, data_rng)
    fit_seed = derive_seed(config.seed, cond_idx, rep, 1)
    rows = []

    staplr_methods = [m for m in methods if m.startswith("staplr")]
    if staplr_methods:
        t0 = time.perf_counter()
        try:
            base_models, Z, folds = fit_base_level(data, DEFAULT_BASE_SPEC, k,
                                                   derive_seed(fit_seed, 0))
            base_err = None
        except Exception as exc:
            base_models = Z = folds = None
            base_err = str(exc)
        base_seconds = time.perf_counter() - t0
        for method in staplr_methods:
            row = _base_row(config, cond_idx, rep, method)
            if base_err is not None:
                row["error"] = base_err
                rows.append(row)
                continue
            meta_spec = META_NN_SPEC if method == "staplr_nn" else META_UNCONSTRAINED_SPEC
            t0 = time.perf_counter()
            try:
                meta = fit_tuned(Z, y.astype(np.float64), meta_spec,
                                 derive_seed(fit_seed, 1), settings)
                model = StackedModel(
                    base_models=base_models, meta_model=meta, z_matrix=Z,
                    fold_partition=folds, base_spec=DEFAULT_BASE_SPEC,
                    meta_spec=meta_spec, view_names=names, seed=fit_seed,
                )
                chosen = selected_views(model)
                row["selected_views"] = "|".join(str(v) for v in sorted(chosen))
                row["n_selected_views"] = len(chosen)
                row["n_selected_features"] = _staplr_features(model, chosen)
                if test_views is not None:
                    test_data = MultiViewDataset(views=tuple(test_views),
                                                 outcomes=y_test, view_names=names)
                    _evaluate(row, predict_stacked(model, test_data), y_test)
            except Exception as exc:
                row["error"] = str(exc)
            row["fit_seconds"] = base_seconds + (time.perf_counter() - t0)
            rows.append(row)

    if "group_lasso" in methods:
        row = _base_row(config, cond_idx, rep, "group_lasso")
        t0 = time.perf_counter()
        try:
            structure = GroupStructure.from_sizes(config.view_sizes)
            X = np.hstack(views)
            model = fit_tuned(X, y.astype(np.float64), GROUP_LASSO_SPEC,
                              derive_seed(fit_seed, 2), settings, groups=structure)
            chosen = selected_groups(model, structure)
            row["selected_views"] = "|".join(str(v) for v in sorted(chosen))
            row["n_selected_views"] = len(chosen)
            row["n_selected_features"] = int(np.count_nonzero(model.coefficients))
            if test_views is not None:
                _evaluate(row, predict_proba(model, np.hstack(test_views)), y_test)
        except Exception as exc:
            row["error"] = str(exc)
        row["fit_seconds"] = time.perf_counter() - t0
        rows.append(row)
    return rows


def run_experiment(
    configs: list[SimulationConfig],
    methods: tuple[str, ...] = METHODS,
    workers: int = 1,
    k: int = 10,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> list[dict]:
    """All replications of all conditions; deterministic and worker-invariant.

    Each replication derives its own RNG sub-stream from
    (config.seed, condition index, replication), so results do not depend on
    scheduling or the worker count.
    """
    if not methods:
        raise InvalidArgumentError("at least one method required")
    tasks = [
        delayed(run_replication)(cfg, ci, rep, methods, k, settings)
        for ci, cfg in enumerate(configs)
        for rep in range(cfg.replications)
    ]
    chunks = Parallel(n_jobs=workers)(tasks)
    return [row for chunk in chunks for row in chunk]


def summarize_experiment(rows: list[dict], configs: list[SimulationConfig]) -> dict:
    """Per-condition, per-method inclusion probabilities grouped by signal
    probability, for the JSON summary artifact."""
    by_name = {cfg.name: cfg for cfg in configs}
    out = {"schema_version": 1, "conditions": {}}
    for name, cfg in by_name.items():
        cond = {}
        for method in sorted({r["method"] for r in rows if r["condition"] == name}):
            picks = [
                set(int(v) for v in r["selected_views"].split("|") if v != "")
                for r in rows
                if r["condition"] == name and r["method"] == method and not r["error"]
            ]
            cond[method] = selection_summary(picks, list(cfg.signal_probs))
        out["conditions"][name] = cond
    return out

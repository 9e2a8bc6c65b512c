"""CSV ingestion, result/model persistence, and the repeated-split protocol."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    InvalidArgumentError,
    MultiViewDataset,
    derive_rng,
    derive_seed,
)
from .cv import LearnerSpec, fit_tuned
from .grouplasso import GroupStructure, selected_groups
from .metrics import accuracy, auc
from .simulate import (
    GROUP_LASSO_SPEC,
    META_NN_SPEC,
    META_UNCONSTRAINED_SPEC,
)
from .solver import predict_proba
from .stacking import (
    DEFAULT_BASE_SPEC,
    SCHEMA_VERSION,
    StackedModel,
    fit_staplr,
    linear_model_from_dict,
    linear_model_to_dict,
    predict_stacked,
    selected_views,
    stacked_model_from_dict,
    stacked_model_to_dict,
)

__version__ = "0.1.0"


# ---------------------------------------------------------------------------
# Multi-view CSV ingestion
# ---------------------------------------------------------------------------


def _read_viewmap(path: str) -> list[tuple[str, str]]:
    pairs = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != 2:
                raise InvalidArgumentError(
                    f"{path}:{lineno}: expected 'feature,view', got {len(row)} fields"
                )
            feat, view = row[0].strip(), row[1].strip()
            if lineno == 1 and (feat.lower(), view.lower()) == ("feature", "view"):
                continue
            pairs.append((feat, view))
    if not pairs:
        raise InvalidArgumentError(f"{path}: empty view map")
    seen = set()
    for feat, _ in pairs:
        if feat in seen:
            raise InvalidArgumentError(f"{path}: feature {feat!r} mapped more than once")
        seen.add(feat)
    return pairs


def _read_labels(path: str) -> np.ndarray:
    values = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip() == "":
                continue
            token = row[0].strip()
            if lineno == 1 and token.lower() in ("label", "y", "outcome"):
                continue
            if token not in ("0", "1"):
                raise InvalidArgumentError(
                    f"{path}:{lineno}: non-binary label {token!r} (expected 0 or 1)"
                )
            values.append(int(token))
    return np.asarray(values, dtype=np.int64)


def load_multiview_csv(
    features_path: str,
    labels_path: str,
    viewmap_path: str,
    drop_unmapped: bool = False,
) -> MultiViewDataset:
    """Assemble a multi-view dataset from a features CSV (header row of
    feature names), a labels CSV (one 0/1 per row), and a feature->view map.

    Views appear in order of first appearance in the map; columns within a
    view follow map order.
    """
    with open(features_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidArgumentError(f"{features_path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(header):
                raise InvalidArgumentError(
                    f"{features_path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise InvalidArgumentError(f"{features_path}:{lineno}: {exc}") from None
    X = np.asarray(rows, dtype=np.float64)
    y = _read_labels(labels_path)
    if len(y) != X.shape[0]:
        raise InvalidArgumentError(
            f"row-count mismatch: {features_path} has {X.shape[0]} rows, "
            f"{labels_path} has {len(y)} labels"
        )
    pairs = _read_viewmap(viewmap_path)
    col_of = {name: j for j, name in enumerate(header)}
    mapped = {feat for feat, _ in pairs}
    unmapped = [name for name in header if name not in mapped]
    if unmapped and not drop_unmapped:
        raise InvalidArgumentError(
            f"{viewmap_path}: features {unmapped[:5]} not mapped to any view "
            "(pass drop_unmapped to discard them)"
        )
    view_order: list[str] = []
    view_cols: dict[str, list[int]] = {}
    for feat, view in pairs:
        if feat not in col_of:
            raise InvalidArgumentError(
                f"{viewmap_path}: mapped feature {feat!r} not present in {features_path}"
            )
        if view not in view_cols:
            view_cols[view] = []
            view_order.append(view)
        view_cols[view].append(col_of[feat])
    views = tuple(X[:, view_cols[v]] for v in view_order)
    return MultiViewDataset(views=views, outcomes=y, view_names=tuple(view_order))


def save_multiview_csv(
    data: MultiViewDataset,
    features_path: str,
    labels_path: str,
    viewmap_path: str,
) -> None:
    """Inverse of :func:`load_multiview_csv` (feature names are generated)."""
    names = []
    with open(viewmap_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature", "view"])
        for v, view in enumerate(data.view_names):
            for j in range(data.views[v].shape[1]):
                name = f"{view}_f{j}"
                names.append(name)
                w.writerow([name, view])
    X = np.hstack(data.views)
    with open(features_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in X:
            w.writerow([repr(float(x)) for x in row])
    with open(labels_path, "w", newline="") as fh:
        w = csv.writer(fh)
        for yi in data.outcomes:
            w.writerow([int(yi)])


# ---------------------------------------------------------------------------
# Fitted-model documents (stacked or group lasso) for the CLI
# ---------------------------------------------------------------------------


def save_fitted_model(path: str, model, view_names=None, view_sizes=None) -> None:
    """Persist either a StackedModel or a group-lasso FittedLinearModel."""
    if isinstance(model, StackedModel):
        doc = stacked_model_to_dict(model)
    else:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "group_lasso_model",
            "view_names": list(view_names or []),
            "view_sizes": list(view_sizes or []),
            "model": linear_model_to_dict(model),
        }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_fitted_model(path: str):
    """Load a model document; returns (kind, payload)."""
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "stacked_model":
        return kind, stacked_model_from_dict(doc)
    if kind == "group_lasso_model":
        return kind, {
            "model": linear_model_from_dict(doc["model"]),
            "view_names": doc["view_names"],
            "view_sizes": doc["view_sizes"],
        }
    raise InvalidArgumentError(f"{path}: unrecognized model document kind {kind!r}")


def predict_with_document(kind: str, payload, data: MultiViewDataset) -> np.ndarray:
    if kind == "stacked_model":
        return predict_stacked(payload, data)
    model = payload["model"]
    return predict_proba(model, np.hstack(data.views))


# ---------------------------------------------------------------------------
# Repeated stratified half-split evaluation
# ---------------------------------------------------------------------------

SPLIT_COLUMNS = [
    "repeat", "half", "method", "auc", "accuracy",
    "n_selected_views", "n_selected_features", "zero_views", "error",
]


def _halves(y: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split into two parts of roughly equal size."""
    part = np.zeros(len(y), dtype=np.int64)
    for cls in (0, 1):
        members = rng.permutation(np.flatnonzero(y == cls))
        part[members[: len(members) // 2]] = 1
    return np.flatnonzero(part == 0), np.flatnonzero(part == 1)


def _fit_method(method: str, train: MultiViewDataset, seed: int, k: int):
    """Returns (predict_fn, n_views_selected, n_features_selected)."""
    if method == "group_lasso":
        structure = GroupStructure.from_sizes(train.view_sizes)
        X = np.hstack(train.views)
        model = fit_tuned(X, train.outcomes.astype(np.float64), GROUP_LASSO_SPEC,
                          seed, groups=structure)
        chosen = selected_groups(model, structure)
        return (
            lambda d: predict_proba(model, np.hstack(d.views)),
            len(chosen),
            int(np.count_nonzero(model.coefficients)),
        )
    meta = META_NN_SPEC if method == "staplr_nn" else META_UNCONSTRAINED_SPEC
    stacked = fit_staplr(train, DEFAULT_BASE_SPEC, meta, k=k, seed=seed)
    chosen = selected_views(stacked)
    n_feat = int(sum(np.count_nonzero(stacked.base_models[v].coefficients)
                     for v in chosen))
    return lambda d: predict_stacked(stacked, d), len(chosen), n_feat


def repeated_split_protocol(
    data: MultiViewDataset,
    methods: tuple[str, ...] = ("staplr_nn", "staplr_unconstrained", "group_lasso"),
    repeats: int = 50,
    seed: int = 1,
    k: int = 10,
) -> list[dict]:
    """Repeat: split in two stratified halves, fit on each half, score the other.

    One output row per repeat x half x method, recording AUC, accuracy,
    selected view/feature counts, and whether the fit selected zero views.
    """
    y = data.outcomes
    if min((y == 0).sum(), (y == 1).sum()) < 2:
        raise InvalidArgumentError("each class needs at least 2 members to split")
    rows = []
    for rep in range(repeats):
        rng = derive_rng(seed, rep)
        idx_a, idx_b = _halves(y, rng)
        for half, (tr, te) in enumerate(((idx_a, idx_b), (idx_b, idx_a))):
            train, test = data.subset(tr), data.subset(te)
            for method in methods:
                row = {"repeat": rep, "half": half, "method": method,
                       "auc": "", "accuracy": "", "n_selected_views": 0,
                       "n_selected_features": 0, "zero_views": "", "error": ""}
                try:
                    predict, nv, nf = _fit_method(
                        method, train, derive_seed(seed, rep, half), k)
                    scores = predict(test)
                    row.update(
                        auc=auc(scores, test.outcomes),
                        accuracy=accuracy(scores, test.outcomes),
                        n_selected_views=nv, n_selected_features=nf,
                        zero_views=int(nv == 0),
                    )
                except Exception as exc:
                    row["error"] = str(exc)
                rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Tabular output and run manifests
# ---------------------------------------------------------------------------

EXPERIMENT_COLUMNS = [
    "condition", "condition_index", "replication", "method", "n", "rho_w",
    "rho_b", "n_views", "selected_views", "n_selected_views",
    "n_selected_features", "auc", "accuracy", "error",
]

TIMING_COLUMNS = ["condition", "condition_index", "replication", "method",
                  "fit_seconds"]


def write_rows_csv(path: str, rows: list[dict], columns: list[str]) -> None:
    """Write dict rows with a fixed column order (values via repr-stable str)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([row.get(c, "") for c in columns])


@dataclass(frozen=True)
class RunManifest:
    """Provenance record emitted next to every artifact.

    Timing and timestamps live here (and only here) so that result files stay
    byte-identical across reruns.
    """

    config_hash: str
    seed: int
    version: str
    started_at: float
    finished_at: float
    stage_seconds: dict


def config_hash(obj) -> str:
    """Stable hash of a JSON-serializable configuration."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(path: str, config_obj, seed: int, started_at: float,
                   stage_seconds: dict) -> RunManifest:
    manifest = RunManifest(
        config_hash=config_hash(config_obj), seed=int(seed), version=__version__,
        started_at=started_at, finished_at=time.time(),
        stage_seconds={k: float(v) for k, v in stage_seconds.items()},
    )
    with open(path, "w") as fh:
        json.dump({
            "schema_version": SCHEMA_VERSION,
            "kind": "run_manifest",
            "config_hash": manifest.config_hash,
            "seed": manifest.seed,
            "version": manifest.version,
            "started_at": manifest.started_at,
            "finished_at": manifest.finished_at,
            "stage_seconds": manifest.stage_seconds,
        }, fh, indent=2)
    return manifest

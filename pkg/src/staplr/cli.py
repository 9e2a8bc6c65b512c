"""Command-line surface: simulate, fit, predict, evaluate, experiment,
verify-lemmas, split-eval."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import dataio
from .core import InvalidArgumentError, MultiViewDataset, derive_rng
from .cv import LearnerSpec, binomial_deviance, fit_tuned
from .grouplasso import GroupStructure, selected_groups
from .lemmas import verify_lemmas
from .metrics import accuracy, auc
from .simulate import (
    METHODS,
    SimulationConfig,
    gen_block_gaussian,
    gen_outcome,
    preset_configs,
    run_experiment,
    summarize_experiment,
)
from .stacking import fit_staplr, selected_views


def _fail(message: str, code: int = 1) -> int:
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    return code


def _load_configs(args) -> list[SimulationConfig]:
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        if isinstance(raw, dict):
            raw = [raw]
        return [SimulationConfig(**{**c, "view_sizes": tuple(c["view_sizes"]),
                                    "signal_probs": tuple(c["signal_probs"])})
                for c in raw]
    return preset_configs(args.preset, scale=args.scale, seed=args.seed)


def _cmd_simulate(args) -> int:
    configs = _load_configs(args)
    config = configs[args.condition]
    rng = derive_rng(config.seed, args.condition, args.replication, 0)
    views = gen_block_gaussian(config, rng)
    y, truth = gen_outcome(views, config, rng)
    names = tuple(f"view{v}" for v in range(config.n_views))
    data = MultiViewDataset(views=tuple(views), outcomes=y, view_names=names)
    os.makedirs(args.out_dir, exist_ok=True)
    started = time.time()
    dataio.save_multiview_csv(
        data,
        os.path.join(args.out_dir, "features.csv"),
        os.path.join(args.out_dir, "labels.csv"),
        os.path.join(args.out_dir, "viewmap.csv"),
    )
    with open(os.path.join(args.out_dir, "ground_truth.json"), "w") as fh:
        json.dump({
            "schema_version": 1,
            "condition": config.name,
            "replication": args.replication,
            "beta": truth.beta.tolist(),
            "view_has_signal": list(truth.view_has_signal),
        }, fh)
    dataio.write_manifest(
        os.path.join(args.out_dir, "manifest.json"),
        {"command": "simulate", "condition": config.name,
         "replication": args.replication},
        config.seed, started, {"simulate": time.time() - started},
    )
    return 0


def _cmd_fit(args) -> int:
    started = time.time()
    data = dataio.load_multiview_csv(args.features, args.labels, args.viewmap,
                                     drop_unmapped=args.drop_unmapped)
    t0 = time.time()
    if args.method == "group_lasso":
        structure = GroupStructure.from_sizes(data.view_sizes)
        spec = LearnerSpec(family="group_lasso", standardize=True,
                           n_lambda=args.n_lambda, k=args.k_folds)
        model = fit_tuned(np.hstack(data.views), data.outcomes.astype(np.float64),
                          spec, args.seed, groups=structure)
        dataio.save_fitted_model(args.out, model, view_names=data.view_names,
                                 view_sizes=data.view_sizes)
        n_views = len(selected_groups(model, structure))
    elif args.method == "staplr":
        base = LearnerSpec(family="ridge", standardize=True,
                           n_lambda=args.n_lambda, k=args.k_folds)
        meta = LearnerSpec(family="lasso", nonnegative=args.nonneg,
                           standardize=False, n_lambda=args.n_lambda,
                           k=args.k_folds)
        model = fit_staplr(data, base, meta, k=args.k_folds, seed=args.seed,
                           n_jobs=args.threads)
        dataio.save_fitted_model(args.out, model)
        n_views = len(selected_views(model))
    else:
        return _fail(f"unknown method {args.method!r}", 2)
    if args.manifest:
        dataio.write_manifest(
            args.manifest,
            {"command": "fit", "method": args.method, "nonneg": args.nonneg,
             "k_folds": args.k_folds, "n_lambda": args.n_lambda},
            args.seed, started, {"fit": time.time() - t0},
        )
    print(json.dumps({"model": args.out, "selected_views": n_views}))
    return 0


def _cmd_predict(args) -> int:
    kind, payload = dataio.load_fitted_model(args.model)
    if args.labels:
        data = dataio.load_multiview_csv(args.features, args.labels, args.viewmap)
    else:
        data = dataio.load_multiview_csv(args.features, _dummy_labels(args.features),
                                         args.viewmap)
    probs = dataio.predict_with_document(kind, payload, data)
    with open(args.out, "w") as fh:
        fh.write("probability\n")
        for p in probs:
            fh.write(f"{float(p)!r}\n")
    return 0


def _dummy_labels(features_path: str) -> str:
    """Temporary all-zero labels file matching the features row count."""
    import csv as _csv
    import tempfile

    with open(features_path, newline="") as fh:
        n = sum(1 for row in _csv.reader(fh) if row) - 1
    tmp = tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False)
    for _ in range(n):
        tmp.write("0\n")
    tmp.close()
    return tmp.name


def _read_single_column(path: str, skip_header_tokens: tuple[str, ...]) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.strip().split(",")[0]
            if token == "":
                continue
            if lineno == 1 and token.lower() in skip_header_tokens:
                continue
            values.append(float(token))
    return np.asarray(values)


def _cmd_evaluate(args) -> int:
    scores = _read_single_column(args.scores, ("probability", "score"))
    labels = _read_single_column(args.labels, ("label", "y", "outcome")).astype(np.int64)
    metrics = {
        "auc": auc(scores, labels),
        "accuracy": accuracy(scores, labels, cutoff=args.cutoff),
        "binomial_deviance": binomial_deviance(np.clip(scores, 0.0, 1.0),
                                               labels.astype(np.float64)),
        "n": int(len(labels)),
    }
    out = json.dumps(metrics, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    print(out)
    return 0


def _cmd_experiment(args) -> int:
    started = time.time()
    configs = _load_configs(args)
    if args.replications:
        from dataclasses import replace

        configs = [replace(c, replications=args.replications) for c in configs]
    methods = tuple(args.methods.split(","))
    t0 = time.time()
    rows = run_experiment(configs, methods=methods, workers=args.threads)
    run_seconds = time.time() - t0
    os.makedirs(args.out_dir, exist_ok=True)
    dataio.write_rows_csv(os.path.join(args.out_dir, "results.csv"), rows,
                          dataio.EXPERIMENT_COLUMNS)
    dataio.write_rows_csv(os.path.join(args.out_dir, "timings.csv"), rows,
                          dataio.TIMING_COLUMNS)
    with open(os.path.join(args.out_dir, "summary.json"), "w") as fh:
        json.dump(summarize_experiment(rows, configs), fh, indent=2, sort_keys=True)
    dataio.write_manifest(
        os.path.join(args.out_dir, "manifest.json"),
        {"command": "experiment", "preset": args.preset, "scale": args.scale,
         "methods": list(methods),
         "conditions": [c.name for c in configs]},
        args.seed, started, {"experiment": run_seconds},
    )
    return 0


def _cmd_verify_lemmas(args) -> int:
    rows = verify_lemmas(trials=args.trials, seed=args.seed)
    width = max(len(r["check"]) for r in rows)
    ok = True
    for r in rows:
        status = "pass" if r["passed"] else "FAIL"
        ok = ok and r["passed"]
        print(f"{r['check']:<{width}}  worst={r['worst_error']:.3e}  "
              f"tol={r['tolerance']:.0e}  {status}")
    return 0 if ok else 1


def _cmd_split_eval(args) -> int:
    data = dataio.load_multiview_csv(args.features, args.labels, args.viewmap,
                                     drop_unmapped=args.drop_unmapped)
    methods = tuple(args.methods.split(","))
    rows = dataio.repeated_split_protocol(data, methods=methods,
                                          repeats=args.repeats, seed=args.seed,
                                          k=args.k_folds)
    dataio.write_rows_csv(args.out, rows, dataio.SPLIT_COLUMNS)
    return 0


def _add_csv_inputs(p, labels_required=True):
    p.add_argument("--features", required=True, help="features CSV (header row)")
    if labels_required:
        p.add_argument("--labels", required=True, help="labels CSV (one 0/1 per row)")
    else:
        p.add_argument("--labels", default=None)
    p.add_argument("--viewmap", required=True, help="feature,view mapping CSV")
    p.add_argument("--drop-unmapped", action="store_true",
                   help="drop features absent from the view map")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="staplr",
        description="Multi-view stacking with penalized logistic learners, "
                    "plus a logistic group lasso baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit one synthetic dataset as CSV")
    p.add_argument("--preset", default="sample_sweep",
                   choices=("main", "sample_sweep", "view_size_sweep"))
    p.add_argument("--config", default=None, help="JSON file of condition configs")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--condition", type=int, default=0)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a model on CSV inputs")
    _add_csv_inputs(p)
    p.add_argument("--method", default="staplr", choices=("staplr", "group_lasso"))
    nn = p.add_mutually_exclusive_group()
    nn.add_argument("--nonneg", dest="nonneg", action="store_true", default=True)
    nn.add_argument("--no-nonneg", dest="nonneg", action="store_false")
    p.add_argument("--k-folds", type=int, default=10)
    p.add_argument("--n-lambda", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True, help="model JSON output path")
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="predict probabilities with a saved model")
    _add_csv_inputs(p, labels_required=False)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--cutoff", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run a simulation experiment grid")
    p.add_argument("--preset", default="main",
                   choices=("main", "sample_sweep", "view_size_sweep"))
    p.add_argument("--config", default=None, help="JSON file of condition configs")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--replications", type=int, default=None,
                   help="override replication count per condition")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("verify-lemmas",
                       help="randomized checks of the closed-form oracles")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_verify_lemmas)

    p = sub.add_parser("split-eval",
                       help="repeated stratified half-split evaluation")
    _add_csv_inputs(p)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--repeats", type=int, default=50)
    p.add_argument("--k-folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        return _fail(str(exc), 2)
    except Exception as exc:  # pragma: no cover - defensive
        return _fail(f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())

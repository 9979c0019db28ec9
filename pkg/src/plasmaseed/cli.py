"""Command line workflow driver.

Settings resolve as flags > config file > defaults; the config file is a
flat JSON object whose allowed keys are listed in docs/config.md. Every
command records a run in the tracking store (root from --store-root,
else the PLASMASEED_RUN_STORE environment variable, else ./runs).

Exit codes: 0 success, 2 config error, 3 data error, 4 model error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bundle import ServingBundle
from .data import load_csv, write_csv
from .errors import ConfigError, DataError, ModelError, TrackingError
from .evaluate import describe, grid_table_csv
from .preprocess import StageFlags
from .synthetic import hormetic_benchmark
from . import tracking
from .workflow import (
    DEFAULT_SPLIT_RATIO,
    DEFAULT_SPLIT_SEED,
    KNOWN_MODELS,
    REDUCE_THRESHOLD,
    evaluate_workflow,
    explain_workflow,
    external_validate_workflow,
    loco_workflow,
    pdp_workflow,
    train_workflow,
    tune_workflow,
)

STORE_ENV_VAR = "PLASMASEED_RUN_STORE"
DEFAULT_STORE_ROOT = "runs"

# every key a config file may set; flags with the same name win
CONFIG_KEYS = {
    "csv": str, "model": str, "seed": int, "split": float, "k": int,
    "params": dict, "grid": dict, "out": str, "bundle": str,
    "store_root": str, "host": str, "port": int, "experiment": str,
    "filter": str, "x": str, "y": str, "res": int, "n": int,
    "sigma": float, "row": int, "threshold": float, "ui": str,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a flat JSON object")
    for key, value in doc.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        expected = CONFIG_KEYS[key]
        if expected in (int, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {key!r} must be a number")
        elif not isinstance(value, expected):
            raise ConfigError(
                f"config key {key!r} must be a {expected.__name__}")
    return doc


def _setting(args, config: dict, name: str, default):
    """flags > config file > defaults."""
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    if name in config:
        return config[name]
    return default


def _parse_json_flag(text, what: str) -> dict:
    if text is None or isinstance(text, dict):
        return text or {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--{what} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"--{what} must be a JSON object")
    return doc


def _stages(args) -> StageFlags:
    return StageFlags.none() if getattr(args, "no_preprocess", False) else StageFlags()


def _load_dataset(args, config):
    csv = _setting(args, config, "csv", None)
    if csv is None:
        raise ConfigError("a dataset is required: pass --csv PATH")
    return load_csv(csv)


def _load_bundle(args, config) -> ServingBundle:
    path = _setting(args, config, "bundle", None)
    if path is None:
        raise ConfigError("a saved bundle is required: pass --bundle PATH")
    return ServingBundle.load(path)


def _open_store(args, config) -> tracking.RunStore:
    root = _setting(args, config, "store_root",
                    os.environ.get(STORE_ENV_VAR, DEFAULT_STORE_ROOT))
    return tracking.RunStore(root)


def _jsonable(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, indent=2, default=_jsonable)
    sys.stdout.write("\n")


class _TrackedRun:
    """Start a run for a command; finish as failed if the command throws."""

    def __init__(self, store, command: str, params: dict):
        self.store = store
        self.command = command
        self.params = params
        self.run = None

    def __enter__(self):
        self.run = tracking.start_run(self.store, self.command, self.params)
        return self.run

    def __exit__(self, exc_type, exc, tb):
        if self.run is not None and self.run.status == tracking.RUNNING:
            tracking.finish_run(
                self.run,
                tracking.FINISHED if exc_type is None else tracking.FAILED)
        return False


def cmd_ingest(args, config, store) -> dict:
    ds = _load_dataset(args, config)
    stats = describe(ds)
    with _TrackedRun(store, "ingest",
                     {"csv": _setting(args, config, "csv", ""),
                      "fingerprint": ds.fingerprint}) as run:
        tracking.log_metric(run, "rows", ds.n_rows)
        out = {
            "rows": ds.n_rows,
            "fingerprint": ds.fingerprint,
            "species": len(set(ds.species)),
            "cultivars": len(set(ds.cultivar)),
            "missing_counts": {k: v for k, v in ds.missing_counts.items() if v},
            "columns": stats,
            "run_id": run.run_id,
        }
    return out


def cmd_train(args, config, store) -> dict:
    ds = _load_dataset(args, config)
    model = _setting(args, config, "model", "et")
    seed = _setting(args, config, "seed", DEFAULT_SPLIT_SEED)
    split = _setting(args, config, "split", DEFAULT_SPLIT_RATIO)
    params = _parse_json_flag(_setting(args, config, "params", None), "params")
    out_path = _setting(args, config, "out", "bundle.json")
    threshold = _setting(args, config, "threshold", REDUCE_THRESHOLD)
    run_params = {
        "csv": _setting(args, config, "csv", ""), "model": model,
        "seed": seed, "split": split, "params": json.dumps(params),
        "reduced_features": args.reduced_features,
        "no_preprocess": args.no_preprocess, "stratify": args.stratify,
        "fingerprint": ds.fingerprint,
    }
    with _TrackedRun(store, "train", run_params) as run:
        result = train_workflow(
            ds, model=model, params=params, seed=seed, ratio=split,
            stages=_stages(args), reduced_features=args.reduced_features,
            reduce_threshold=threshold, stratify=args.stratify)
        tracking.log_metric(run, "rmse", result.test_metrics.rmse)
        tracking.log_metric(run, "mae", result.test_metrics.mae)
        if result.test_metrics.r2 is not None:
            tracking.log_metric(run, "r2", result.test_metrics.r2)
        saved = result.bundle.save(out_path)
        tracking.log_artifact(run, saved)
        doc = result.to_doc()
        doc["bundle_path"] = str(saved)
        doc["run_id"] = run.run_id
    return doc


def cmd_tune(args, config, store) -> dict:
    ds = _load_dataset(args, config)
    model = _setting(args, config, "model", "et")
    seed = _setting(args, config, "seed", DEFAULT_SPLIT_SEED)
    k = _setting(args, config, "k", 5)
    grid = _parse_json_flag(_setting(args, config, "grid", None), "grid") or None
    with _TrackedRun(store, "tune",
                     {"csv": _setting(args, config, "csv", ""),
                      "model": model, "seed": seed, "k": k,
                      "fingerprint": ds.fingerprint}) as run:
        result = tune_workflow(ds, model, param_grid=grid, k=k, seed=seed,
                               stages=_stages(args))
        tracking.log_metric(run, "best_cv_rmse", result.best_rmse)
        table_out = _setting(args, config, "out", None)
        if table_out:
            grid_table_csv(result, table_out)
            tracking.log_artifact(run, table_out)
        doc = result.to_doc()
        doc["run_id"] = run.run_id
    return doc


def cmd_evaluate(args, config, store) -> dict:
    ds = _load_dataset(args, config)
    bundle = _load_bundle(args, config)
    with _TrackedRun(store, "evaluate",
                     {"csv": _setting(args, config, "csv", ""),
                      "bundle": bundle.version,
                      "fingerprint": ds.fingerprint}) as run:
        out = evaluate_workflow(bundle, ds)
        tracking.log_metric(run, "rmse", out["replayed"].rmse)
        doc = {
            "replayed": out["replayed"].to_doc(),
            "logged": out["logged"],
            "fingerprint_match": out["fingerprint_match"],
            "matches_train_time": out["matches_train_time"],
            "run_id": run.run_id,
        }
    return doc


def cmd_loco(args, config, store) -> dict:
    ds = _load_dataset(args, config)
    model = _setting(args, config, "model", "et")
    seed = _setting(args, config, "seed", DEFAULT_SPLIT_SEED)
    params = _parse_json_flag(_setting(args, config, "params", None), "params")
    with _TrackedRun(store, "loco",
                     {"csv": _setting(args, config, "csv", ""),
                      "model": model, "seed": seed,
                      "fingerprint": ds.fingerprint}) as run:
        report = loco_workflow(ds, model=model, params=params, seed=seed,
                               stages=_stages(args))
        if report.overall.r2 is not None:
            tracking.log_metric(run, "pooled_r2", report.overall.r2)
        tracking.log_metric(run, "pooled_rmse", report.overall.rmse)
        doc = report.to_doc()
        doc["run_id"] = run.run_id
    return doc


def cmd_external_validate(args, config, store) -> dict:
    ds = _load_dataset(args, config)
    bundle = _load_bundle(args, config)
    with _TrackedRun(store, "external-validate",
                     {"csv": _setting(args, config, "csv", ""),
                      "bundle": bundle.version,
                      "fingerprint": ds.fingerprint}) as run:
        out = external_validate_workflow(bundle, ds)
        tracking.log_metric(run, "rmse", out["metrics"].rmse)
        doc = {
            "metrics": out["metrics"].to_doc(),
            "n_rows": out["n_rows"],
            "bundle_version": out["bundle_version"],
            "run_id": run.run_id,
        }
    return doc


def cmd_explain(args, config, store) -> dict:
    ds = _load_dataset(args, config)
    bundle = _load_bundle(args, config)
    row = _setting(args, config, "row", 0)
    from .data import encode_features, impute_within_species
    encoded = encode_features(impute_within_species(ds))
    if not (0 <= row < encoded.n_rows):
        raise ConfigError(f"--row {row} outside 0..{encoded.n_rows - 1}")
    with _TrackedRun(store, "explain",
                     {"csv": _setting(args, config, "csv", ""),
                      "bundle": bundle.version, "row": row}) as run:
        sm = explain_workflow(bundle, encoded.features[row:row + 1])
        prediction = float(bundle.predict_raw(encoded.features[row:row + 1])[0])
        doc = {
            "row": row,
            "prediction": prediction,
            "base_value": float(sm.base_value),
            "attributions": {name: float(v) for name, v
                             in zip(sm.feature_names, sm.values[0])},
            "actual": float(encoded.y[row]),
            "run_id": run.run_id,
        }
    return doc


def cmd_pdp(args, config, store) -> dict:
    bundle = _load_bundle(args, config)
    x = _setting(args, config, "x", None)
    if x is None:
        raise ConfigError("pdp needs --x AXIS")
    y = _setting(args, config, "y", None)
    res = _setting(args, config, "res", 20)
    axes = [x] if y is None else [x, y]
    with _TrackedRun(store, "pdp",
                     {"bundle": bundle.version, "x": x, "y": y or "",
                      "res": res}) as run:
        grid = pdp_workflow(bundle, axes, resolution=res)
        out_path = _setting(args, config, "out", None)
        if out_path:
            grid.to_csv(out_path)
            tracking.log_artifact(run, out_path)
        doc = grid.to_doc()
        doc["run_id"] = run.run_id
    return doc


def cmd_runs(args, config, store) -> dict:
    experiment = _setting(args, config, "experiment", None)
    filter_expr = _setting(args, config, "filter", "")
    return {"runs": tracking.query_runs(store, experiment, filter_expr)}


def cmd_synth(args, config, store) -> dict:
    n = _setting(args, config, "n", 500)
    seed = _setting(args, config, "seed", 0)
    sigma = _setting(args, config, "sigma", 2.0)
    out_path = _setting(args, config, "out", "benchmark.csv")
    with _TrackedRun(store, "synth",
                     {"n": n, "seed": seed, "sigma": sigma}) as run:
        ds, truth = hormetic_benchmark(n=n, seed=seed, noise_sigma=sigma)
        write_csv(ds, out_path)
        tracking.log_artifact(run, out_path)
        doc = {
            "path": str(out_path),
            "rows": ds.n_rows,
            "fingerprint": ds.fingerprint,
            "truth": truth.to_doc(),
            "run_id": run.run_id,
        }
    return doc


def cmd_serve(args, config, store) -> dict:
    import uvicorn
    from .service import create_app

    bundle = _load_bundle(args, config)
    host = _setting(args, config, "host", "127.0.0.1")
    port = _setting(args, config, "port", 8000)
    ui = _setting(args, config, "ui", None)
    if ui is None and Path("frontend/dist").is_dir():
        ui = "frontend/dist"
    with _TrackedRun(store, "serve",
                     {"bundle": bundle.version, "host": host,
                      "port": port}) as run:
        run_id = run.run_id
    app = create_app(bundle=bundle, store=store, ui_dir=ui)
    suffix = f" (ui: {ui})" if ui else ""
    print(f"serving bundle {bundle.version} on http://{host}:{port} "
          f"(run {run_id}){suffix}", file=sys.stderr)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return {"run_id": run_id}


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "loco": cmd_loco,
    "external-validate": cmd_external_validate,
    "explain": cmd_explain,
    "pdp": cmd_pdp,
    "runs": cmd_runs,
    "synth": cmd_synth,
    "serve": cmd_serve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plasmaseed",
        description="Predict cold-plasma seed germination uplift: train, "
                    "evaluate, explain, and serve models over treatment CSVs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON config file; flags win")
        p.add_argument("--store-root", dest="store_root",
                       help=f"run store directory (or ${STORE_ENV_VAR})")

    p = sub.add_parser("ingest", help="validate a CSV and report its shape")
    common(p)
    p.add_argument("--csv")

    p = sub.add_parser("train", help="fit a model and save a serving bundle")
    common(p)
    p.add_argument("--csv")
    p.add_argument("--model", choices=KNOWN_MODELS)
    p.add_argument("--seed", type=int)
    p.add_argument("--split", type=float, help="train fraction, default 0.7")
    p.add_argument("--params", help="hyperparameters as a JSON object")
    p.add_argument("--out", help="bundle output path, default bundle.json")
    p.add_argument("--reduced-features", action="store_true",
                   help="keep the importance prefix covering the share "
                        "threshold and refit")
    p.add_argument("--threshold", type=float,
                   help="importance share the kept prefix must cover, "
                        "default 0.95")
    p.add_argument("--no-preprocess", action="store_true",
                   help="skip transform, polynomial, and scaling stages")
    p.add_argument("--stratify", action="store_true",
                   help="split within each species")

    p = sub.add_parser("tune", help="grid search with k-fold CV")
    common(p)
    p.add_argument("--csv")
    p.add_argument("--model", choices=["et", "gb", "xgb"])
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--grid", help="param grid as a JSON object of lists")
    p.add_argument("--out", help="write the full CV table as CSV here")
    p.add_argument("--no-preprocess", action="store_true")

    p = sub.add_parser("evaluate", help="replay a bundle's split and compare")
    common(p)
    p.add_argument("--csv")
    p.add_argument("--bundle")

    p = sub.add_parser("loco", help="leave-one-cultivar-out validation")
    common(p)
    p.add_argument("--csv")
    p.add_argument("--model", choices=["et", "gb", "xgb"])
    p.add_argument("--seed", type=int)
    p.add_argument("--params")
    p.add_argument("--no-preprocess", action="store_true")

    p = sub.add_parser("external-validate",
                       help="score a saved bundle on a new CSV")
    common(p)
    p.add_argument("--csv")
    p.add_argument("--bundle")

    p = sub.add_parser("explain", help="per-feature attribution for one row")
    common(p)
    p.add_argument("--csv")
    p.add_argument("--bundle")
    p.add_argument("--row", type=int)

    p = sub.add_parser("pdp", help="partial dependence grid from a bundle")
    common(p)
    p.add_argument("--bundle")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--res", type=int)
    p.add_argument("--out", help="write the grid as CSV here")

    p = sub.add_parser("runs", help="query tracked runs")
    common(p)
    p.add_argument("--experiment")
    p.add_argument("--filter", help="e.g. \"rmse < 4 and params.model = et\"")

    p = sub.add_parser("synth", help="generate the hormetic benchmark CSV")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--out")

    p = sub.add_parser("serve", help="serve predictions over HTTP")
    common(p)
    p.add_argument("--bundle")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--ui", help="built UI directory to serve at / "
                                "(default: frontend/dist when present)")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(getattr(args, "config", None))
        store = _open_store(args, config)
        doc = COMMANDS[args.command](args, config, store)
        _emit(doc)
        return 0
    except (ConfigError, TrackingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

"""Metrics, cross-validation, grid search, LOCO validation, and
descriptive statistics.

Scoring follows one rule everywhere: RMSE is the optimization criterion
(CV model selection, grid search), while rankings order by R^2 with
RMSE/MAE tie-breaks. Pooled CV metrics are computed over concatenated
out-of-fold predictions (micro-averaged).
"""

from __future__ import annotations

import csv
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, encode_features, kfold_indices
from .errors import DataValidationError, DegenerateTargetError
from .models import ModelConfig, fit_model
from .preprocess import StageFlags, apply_pipeline, fit_pipeline
from .rng import Rng


def _check_pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise DataValidationError("y and yhat must be equal-length vectors")
    if y.size == 0:
        raise DataValidationError("metrics need at least one sample")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(y, yhat) -> float:
    y, yhat = _check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def r2(y, yhat) -> float:
    y, yhat = _check_pair(y, yhat)
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise DegenerateTargetError(
            "target is constant (zero variance); r2 is undefined")
    sse = float(((y - yhat) ** 2).sum())
    return 1.0 - sse / sst


def mape(y, yhat) -> float:
    """Mean absolute percentage error over rows with nonzero truth."""
    y, yhat = _check_pair(y, yhat)
    nz = y != 0
    if not nz.any():
        raise DegenerateTargetError("all targets are zero; mape is undefined")
    return float(np.mean(np.abs((y[nz] - yhat[nz]) / y[nz])) * 100.0)


@dataclass(frozen=True)
class Metrics:
    rmse: float
    mae: float
    r2: float | None
    mape: float | None = None
    n: int = 0

    def to_doc(self) -> dict:
        doc = {"rmse": self.rmse, "mae": self.mae, "r2": self.r2, "n": self.n}
        if self.mape is not None:
            doc["mape"] = self.mape
        return doc


def compute_metrics(y, yhat, include_mape: bool = False) -> Metrics:
    """Standard metric triple; r2 is None when the slice target is constant
    (single-group breakdowns), the scalar r2() raises instead."""
    y, yhat = _check_pair(y, yhat)
    try:
        r2_val = r2(y, yhat)
    except DegenerateTargetError:
        r2_val = None
    mape_val = None
    if include_mape and (y != 0).any():
        mape_val = mape(y, yhat)
    return Metrics(rmse=rmse(y, yhat), mae=mae(y, yhat), r2=r2_val,
                   mape=mape_val, n=int(y.size))


@dataclass
class EvalReport:
    label: str
    metrics: Metrics
    fold_metrics: list[Metrics] = field(default_factory=list)
    group_metrics: dict = field(default_factory=dict)
    # residual pairs (truth, prediction) for scatter/residual plotting
    pairs: np.ndarray | None = None

    def to_doc(self) -> dict:
        doc = {
            "label": self.label,
            "metrics": self.metrics.to_doc(),
            "fold_metrics": [m.to_doc() for m in self.fold_metrics],
            "group_metrics": {
                group: {name: m.to_doc() for name, m in table.items()}
                for group, table in self.group_metrics.items()
            },
        }
        if self.pairs is not None:
            doc["pairs"] = self.pairs.tolist()
        return doc


def group_breakdown(y, yhat, labels) -> dict:
    """Per-group metrics keyed by label, in first-appearance order."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    labels = list(labels)
    table = {}
    for name in dict.fromkeys(labels):
        rows = np.array([i for i, g in enumerate(labels) if g == name])
        table[name] = compute_metrics(y[rows], yhat[rows])
    return table


def kfold_cv(X, y, config: ModelConfig, k: int = 5, seed: int = 0) -> EvalReport:
    """Seeded k-fold CV; per-fold and pooled out-of-fold metrics.

    Model seeds depend on (seed, fold) only, not on the config, so two
    identical configs score identically, so grid-search ties are exact.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    folds = kfold_indices(n, k, Rng(seed).derive("cv"))
    all_rows = np.arange(n)
    oof = np.empty(n)
    fold_metrics = []
    for f, val in enumerate(folds):
        train = np.setdiff1d(all_rows, val)
        model = fit_model(config, X[train], y[train],
                          Rng(seed).derive("cv", "fold", f).key)
        pred = model.predict(X[val])
        oof[val] = pred
        fold_metrics.append(compute_metrics(y[val], pred))
    return EvalReport(
        label=f"{k}-fold cv",
        metrics=compute_metrics(y, oof),
        fold_metrics=fold_metrics,
        pairs=np.column_stack([y, oof]),
    )


@dataclass(frozen=True)
class GridSpec:
    """Cartesian hyperparameter grid for one model family; key order is
    the declared order and fixes tie-breaking."""

    family: str
    param_grid: dict

    def configs(self) -> list[ModelConfig]:
        keys = list(self.param_grid)
        if not keys:
            return [ModelConfig(self.family, {})]
        combos = itertools.product(*(tuple(self.param_grid[k]) for k in keys))
        return [ModelConfig(self.family, dict(zip(keys, c))) for c in combos]


@dataclass
class GridSearchResult:
    best_config: ModelConfig
    best_rmse: float
    table: list  # one row per config x fold
    summaries: list  # one row per config with mean CV RMSE

    def to_doc(self) -> dict:
        return {
            "best": {"family": self.best_config.family,
                     "params": dict(self.best_config.params)},
            "best_rmse": self.best_rmse,
            "summaries": self.summaries,
            "table": self.table,
        }


def grid_search(X, y, grid: GridSpec, k: int = 5, seed: int = 0) -> GridSearchResult:
    """Full-grid search scored by mean k-fold CV RMSE; ties keep the
    lexicographically first config in declared key order."""
    configs = grid.configs()
    if not configs:
        raise DataValidationError("hyperparameter grid is empty")
    table = []
    summaries = []
    best = None
    for ci, config in enumerate(configs):
        report = kfold_cv(X, y, config, k=k, seed=seed)
        fold_rmses = [m.rmse for m in report.fold_metrics]
        mean_rmse = float(np.mean(fold_rmses))
        for f, m in enumerate(report.fold_metrics):
            table.append({"config_index": ci, "family": config.family,
                          "params": dict(config.params), "fold": f,
                          "rmse": m.rmse, "mae": m.mae, "r2": m.r2})
        summaries.append({"config_index": ci, "family": config.family,
                          "params": dict(config.params),
                          "mean_cv_rmse": mean_rmse})
        if best is None or mean_rmse < best[0]:
            best = (mean_rmse, ci)
    return GridSearchResult(best_config=configs[best[1]], best_rmse=best[0],
                            table=table, summaries=summaries)


def grid_table_csv(result: GridSearchResult, path) -> None:
    """Flat CSV, one row per config x fold."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config_index", "family", "params", "fold",
                         "rmse", "mae", "r2"])
        for row in result.table:
            params = ";".join(f"{k}={v}" for k, v in row["params"].items())
            writer.writerow([row["config_index"], row["family"], params,
                             row["fold"], row["rmse"], row["mae"], row["r2"]])


@dataclass
class LocoReport:
    per_cultivar: dict
    overall: Metrics
    counts: dict
    pairs: np.ndarray  # (truth, prediction) over all held-out rows

    def to_doc(self) -> dict:
        return {
            "per_cultivar": {c: m.to_doc() for c, m in self.per_cultivar.items()},
            "overall": self.overall.to_doc(),
            "counts": dict(self.counts),
            "pairs": self.pairs.tolist(),
        }


def loco_cv(ds: Dataset, config: ModelConfig, seed: int = 0,
            stages: StageFlags | None = None) -> LocoReport:
    """Leave-one-cultivar-out validation.

    One fold per cultivar; the preprocessing pipeline is refit on each
    fold's training cultivars so the held-out cultivar leaks nothing into
    scaling or transform parameters. Hyperparameters stay fixed.
    """
    cultivars = list(dict.fromkeys(ds.cultivar))
    if len(cultivars) < 2:
        raise DataValidationError("LOCO needs at least 2 cultivars")
    encoded = encode_features(ds)
    X, names = encoded.features, encoded.feature_names
    if not np.isfinite(X).all():
        raise DataValidationError(
            "dataset has missing feature values; impute before LOCO")
    y = ds.y
    stages = StageFlags() if stages is None else stages
    labels = np.asarray(ds.cultivar)

    per_cultivar = {}
    counts = {}
    truths, preds = [], []
    for cultivar in cultivars:
        val = np.nonzero(labels == cultivar)[0]
        if val.size == 0:
            warnings.warn(f"cultivar {cultivar!r} has no rows; skipped",
                          stacklevel=2)
            continue
        train = np.nonzero(labels != cultivar)[0]
        pipeline = fit_pipeline(X[train], names, stages)
        model = fit_model(config, pipeline.transform(X[train]), y[train],
                          Rng(seed).derive("loco", cultivar).key)
        pred = model.predict(pipeline.transform(X[val]))
        per_cultivar[cultivar] = compute_metrics(y[val], pred)
        counts[cultivar] = int(val.size)
        truths.append(y[val])
        preds.append(pred)

    y_all = np.concatenate(truths)
    p_all = np.concatenate(preds)
    return LocoReport(
        per_cultivar=per_cultivar,
        overall=compute_metrics(y_all, p_all),
        counts=counts,
        pairs=np.column_stack([y_all, p_all]),
    )


def describe(ds: Dataset) -> dict:
    """Per-column mean, population sd, min, max, moment skewness, and
    excess kurtosis; missing cells excluded; degenerate cases flagged."""
    out = {}
    for name, column in ds.columns.items():
        finite = column[np.isfinite(column)]
        if finite.size == 0:
            out[name] = {"n": 0, "flag": "all missing"}
            continue
        mean = float(finite.mean())
        sd = float(finite.std())  # population
        entry = {"n": int(finite.size), "mean": mean, "sd": sd,
                 "min": float(finite.min()), "max": float(finite.max())}
        if sd == 0.0:
            entry["skewness"] = None
            entry["kurtosis"] = None
            entry["flag"] = "constant"
        else:
            z = (finite - mean) / sd
            entry["skewness"] = float(np.mean(z ** 3))
            entry["kurtosis"] = float(np.mean(z ** 4) - 3.0)
        out[name] = entry
    return out


def univariate_fits(ds: Dataset, target: str | None = None) -> dict:
    """Per-feature OLS line against the target with its r2.

    Skips features without two distinct finite x values (noted), matching
    the single-variable regression panel view.
    """
    from .data import TARGET_COLUMN
    target = TARGET_COLUMN if target is None else target
    y_col = ds.columns[target]
    out = {}
    for name, column in ds.columns.items():
        if name == target:
            continue
        ok = np.isfinite(column) & np.isfinite(y_col)
        x, yv = column[ok], y_col[ok]
        if x.size < 2 or np.unique(x).size < 2:
            out[name] = {"note": "degenerate feature; skipped"}
            continue
        mx, my = x.mean(), yv.mean()
        slope = float(((x - mx) * (yv - my)).sum() / ((x - mx) ** 2).sum())
        intercept = float(my - slope * mx)
        sst = float(((yv - my) ** 2).sum())
        if sst == 0.0:
            out[name] = {"note": "constant target in overlap; skipped"}
            continue
        sse = float(((yv - (slope * x + intercept)) ** 2).sum())
        out[name] = {"slope": slope, "intercept": intercept,
                     "r2": 1.0 - sse / sst, "n": int(x.size)}
    return out


def rank_models(entries) -> list:
    """Order (name, Metrics) items: descending r2, then ascending rmse,
    then ascending mae. Undefined r2 sorts last."""
    def sort_key(item):
        name, m = item
        r2_key = -m.r2 if m.r2 is not None else np.inf
        return (r2_key, m.rmse, m.mae)
    return sorted(entries, key=sort_key)

"""End-to-end flows shared by the CLI and the service.

Each function takes a loaded Dataset (or a saved bundle) and drives
impute -> encode -> split -> pipeline -> model -> metrics, returning
plain result objects the callers log and print. Nothing here touches
argv or HTTP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import (
    Dataset,
    NUMERIC_FEATURES,
    encode_features,
    impute_within_species,
    train_test_split,
)
from .ensemble import HYBRID_STACKS, StackingModel, fit_stacking
from .errors import ConfigError
from .evaluate import (
    GridSearchResult,
    GridSpec,
    LocoReport,
    Metrics,
    compute_metrics,
    grid_search,
    loco_cv,
)
from .bundle import ServingBundle
from .interpret import (
    ImportanceReport,
    PDPGrid,
    ShapMatrix,
    partial_dependence,
    permutation_importance,
    select_top_features,
    tree_shap,
)
from .models import MODEL_FAMILIES, ModelConfig, fit_model
from .preprocess import StageFlags, fit_pipeline
from .rng import Rng

# model names the operator can ask for: single families plus the
# two- and three-member stacking hybrids
KNOWN_MODELS = tuple(sorted((set(MODEL_FAMILIES) - {"mean"})
                            | set(HYBRID_STACKS)))

# request fields an operator must always supply; everything else is a
# seed/environment trait imputable from stored species means
REQUIRED_PREDICT_FIELDS = ("species", "gas_type", "voltage_kv", "power_w",
                           "plasma_time_s")

DEFAULT_SPLIT_RATIO = 0.7
DEFAULT_SPLIT_SEED = 3
REDUCE_THRESHOLD = 0.95

# modest per-family tuning grids for the `tune` command; callers can
# pass their own
DEFAULT_GRIDS = {
    "et": {"n_estimators": [200, 400], "min_samples_leaf": [1, 2, 4],
           "min_samples_split": [2, 4]},
    "gb": {"n_estimators": [250, 500], "learning_rate": [0.01, 0.05],
           "min_samples_leaf": [2, 6]},
    "xgb": {"n_estimators": [150, 300], "learning_rate": [0.05, 0.1],
            "subsample": [0.4, 0.8]},
}


def _check_model_name(name: str) -> str:
    if name not in KNOWN_MODELS:
        raise ConfigError(
            f"unknown model {name!r}; choose one of {', '.join(KNOWN_MODELS)}")
    return name


def _species_means(ds: Dataset, rows: np.ndarray) -> dict:
    """Per-species raw trait means over the training rows, plus a global
    fallback under the empty key."""
    means: dict = {"": {}}
    sub_species = np.asarray([ds.species[i] for i in rows])
    for col in NUMERIC_FEATURES:
        values = ds.columns[col][rows]
        means[""][col] = float(np.nanmean(values))
    for sp in dict.fromkeys(sub_species.tolist()):
        mask = sub_species == sp
        means[sp] = {}
        for col in NUMERIC_FEATURES:
            values = ds.columns[col][rows][mask]
            observed = values[~np.isnan(values)]
            means[sp][col] = (float(observed.mean()) if observed.size
                              else means[""][col])
    return means


def _fit_named_model(name: str, X: np.ndarray, y: np.ndarray,
                     params: dict | None, seed: int):
    if name in HYBRID_STACKS:
        if params:
            raise ConfigError(
                f"hybrid {name!r} takes its base settings from the tuned "
                "defaults; per-model params are not accepted")
        configs = [ModelConfig(f, {}) for f in HYBRID_STACKS[name]]
        return fit_stacking(X, y, configs, seed=seed)
    return fit_model(ModelConfig(name, dict(params or {})), X, y, seed=seed)


@dataclass
class TrainResult:
    bundle: ServingBundle
    train_metrics: Metrics
    test_metrics: Metrics
    full_test_metrics: Metrics | None = None  # pre-reduction, when reduced
    importance: ImportanceReport | None = None
    selected: tuple = ()
    n_train: int = 0
    n_test: int = 0

    def to_doc(self) -> dict:
        doc = {
            "bundle_version": self.bundle.version,
            "train": self.train_metrics.to_doc(),
            "test": self.test_metrics.to_doc(),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "selected_features": list(self.selected),
        }
        if self.full_test_metrics is not None:
            doc["test_before_reduction"] = self.full_test_metrics.to_doc()
        return doc


def train_workflow(ds: Dataset, model: str = "et", params: dict | None = None,
                   seed: int = DEFAULT_SPLIT_SEED,
                   ratio: float = DEFAULT_SPLIT_RATIO,
                   stages: StageFlags | None = None,
                   reduced_features: bool = False,
                   reduce_threshold: float = REDUCE_THRESHOLD,
                   stratify: bool = False) -> TrainResult:
    """Impute, encode, split, fit pipeline and model, score, bundle."""
    _check_model_name(model)
    if reduced_features and model in HYBRID_STACKS:
        raise ConfigError(
            "feature reduction applies to single model families, not hybrids")
    stages = StageFlags() if stages is None else stages
    ds = impute_within_species(ds)
    ds = encode_features(ds)
    split = train_test_split(ds, ratio=ratio, seed=seed,
                             stratify_by_species=stratify)
    tr = np.asarray(split.train, dtype=np.intp)
    te = np.asarray(split.test, dtype=np.intp)
    X_raw, y = ds.features, ds.y

    pipe = fit_pipeline(X_raw[tr], ds.feature_names, stages)
    Xtr = pipe.transform(X_raw[tr])
    Xte = pipe.transform(X_raw[te])
    names_out = pipe.feature_names_out

    model_seed = Rng(seed).derive("train", model).key
    fitted = _fit_named_model(model, Xtr, y[tr], params, model_seed)

    test_metrics = compute_metrics(y[te], fitted.predict(Xte))
    train_metrics = compute_metrics(y[tr], fitted.predict(Xtr))

    full_test_metrics = None
    importance = None
    selected = tuple(names_out)
    selected_idx = tuple(range(len(names_out)))
    if reduced_features:
        importance = permutation_importance(
            fitted, Xte, y[te], names_out, repeats=5,
            seed=Rng(seed).derive("reduce").key)
        kept = select_top_features(importance, reduce_threshold)
        keep_idx = tuple(names_out.index(k) for k in kept)
        reduced = _fit_named_model(model, Xtr[:, list(keep_idx)], y[tr],
                                   params, model_seed)
        full_test_metrics = test_metrics
        test_metrics = compute_metrics(y[te], reduced.predict(Xte[:, list(keep_idx)]))
        train_metrics = compute_metrics(y[tr], reduced.predict(Xtr[:, list(keep_idx)]))
        fitted = reduced
        selected = tuple(kept)
        selected_idx = keep_idx

    bundle = ServingBundle(
        pipeline=pipe,
        model=fitted,
        model_family=model,
        selected_features=selected,
        selected_idx=selected_idx,
        background_raw=np.asarray(X_raw[tr], dtype=np.float64),
        species_means=_species_means(ds, tr),
        dataset_fingerprint=ds.fingerprint,
        split_seed=seed,
        split_ratio=ratio,
        train_metrics={"train": train_metrics.to_doc(),
                       "test": test_metrics.to_doc()},
        metadata={
            "model": model,
            "params": dict(params or {}),
            "stages": {"yeo_johnson": stages.yeo_johnson,
                       "polynomial": stages.polynomial,
                       "standardize": stages.standardize},
            "reduced_features": reduced_features,
            "n_train": int(tr.size),
            "n_test": int(te.size),
        },
    )
    return TrainResult(
        bundle=bundle, train_metrics=train_metrics, test_metrics=test_metrics,
        full_test_metrics=full_test_metrics, importance=importance,
        selected=selected, n_train=int(tr.size), n_test=int(te.size))


def tune_workflow(ds: Dataset, model: str, param_grid: dict | None = None,
                  k: int = 5, seed: int = DEFAULT_SPLIT_SEED,
                  ratio: float = DEFAULT_SPLIT_RATIO,
                  stages: StageFlags | None = None) -> GridSearchResult:
    """Grid search with k-fold CV on the training partition."""
    _check_model_name(model)
    if model in HYBRID_STACKS:
        raise ConfigError("tune operates on single model families")
    if param_grid is None:
        param_grid = DEFAULT_GRIDS[model]
    stages = StageFlags() if stages is None else stages
    ds = impute_within_species(ds)
    ds = encode_features(ds)
    split = train_test_split(ds, ratio=ratio, seed=seed)
    tr = np.asarray(split.train, dtype=np.intp)
    pipe = fit_pipeline(ds.features[tr], ds.feature_names, stages)
    Xtr = pipe.transform(ds.features[tr])
    return grid_search(Xtr, ds.y[tr], GridSpec(model, param_grid), k=k,
                       seed=Rng(seed).derive("tune", model).key)


def evaluate_workflow(bundle: ServingBundle, ds: Dataset) -> dict:
    """Replay the bundled split on a dataset and compare with the metrics
    recorded at train time."""
    ds = impute_within_species(ds)
    ds = encode_features(ds)
    split = train_test_split(ds, ratio=bundle.split_ratio,
                             seed=bundle.split_seed)
    te = np.asarray(split.test, dtype=np.intp)
    pred = bundle.predict_raw(ds.features[te])
    replayed = compute_metrics(ds.y[te], pred)
    logged = bundle.train_metrics.get("test", {})
    fingerprint_match = (ds.fingerprint == bundle.dataset_fingerprint)
    matches = bool(
        fingerprint_match
        and logged
        and abs(replayed.rmse - logged["rmse"]) <= 1e-9
        and abs(replayed.mae - logged["mae"]) <= 1e-9)
    return {
        "replayed": replayed,
        "logged": logged,
        "fingerprint_match": fingerprint_match,
        "matches_train_time": matches,
        "n_test": int(te.size),
    }


def external_validate_workflow(bundle: ServingBundle, ds: Dataset) -> dict:
    """Score a saved bundle on every row of a new dataset."""
    ds = impute_within_species(ds)
    ds = encode_features(ds)
    pred = bundle.predict_raw(ds.features)
    return {
        "metrics": compute_metrics(ds.y, pred),
        "n_rows": ds.n_rows,
        "dataset_fingerprint": ds.fingerprint,
        "bundle_version": bundle.version,
    }


def loco_workflow(ds: Dataset, model: str = "et", params: dict | None = None,
                  seed: int = DEFAULT_SPLIT_SEED,
                  stages: StageFlags | None = None) -> LocoReport:
    _check_model_name(model)
    if model in HYBRID_STACKS:
        raise ConfigError(
            "leave-one-cultivar-out runs on single model families")
    ds = impute_within_species(ds)
    return loco_cv(ds, ModelConfig(model, dict(params or {})), seed=seed,
                   stages=stages)


def explain_workflow(bundle: ServingBundle, X_raw: np.ndarray) -> ShapMatrix:
    """Attributions for raw-unit encoded rows against the bundle's
    training background."""
    X_sel = bundle.transform_select(X_raw)
    background = bundle.background_transformed()
    return tree_shap(bundle.model, X_sel, background,
                     feature_names=bundle.selected_features)


class _SelectedModel:
    """Predict-only view of a model that consumes a column subset."""

    def __init__(self, model, idx):
        self.model = model
        self.idx = list(idx)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict(np.asarray(X)[:, self.idx])


def pdp_workflow(bundle: ServingBundle, axes, resolution: int = 20) -> PDPGrid:
    """Partial dependence over the bundle's stored training background."""
    view = _SelectedModel(bundle.model, bundle.selected_idx)
    return partial_dependence(
        view, bundle.pipeline, list(axes), resolution,
        bundle.background_raw, bundle.pipeline.feature_names_in)

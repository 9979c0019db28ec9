"""Read-only prediction service over a frozen serving bundle.

Requests carry raw physical units and pass through the stored pipeline;
the service never trains, never mutates runs, and keeps the bundle as
immutable shared state (reload = atomic reference swap).
"""

from __future__ import annotations

import math
from collections import OrderedDict
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.staticfiles import StaticFiles

from .bundle import ServingBundle
from .data import GAS_LABELS, LABEL_COLUMNS, NUMERIC_FEATURES
from .errors import ConfigError, FilterSyntaxError
from .interpret import partial_dependence
from .preprocess import INDICATOR_PREFIX
from .tracking import RunStore, query_runs
from .workflow import REQUIRED_PREDICT_FIELDS, _SelectedModel, explain_workflow

import numpy as np

_KNOWN_FIELDS = set(NUMERIC_FEATURES) | set(LABEL_COLUMNS)
_MAX_PDP_RES = 40
_PDP_CACHE_SLOTS = 32


def _bad_request(message: str, key: str | None = None):
    detail = {"error": message}
    if key is not None:
        detail["key"] = key
    return HTTPException(status_code=400, detail=detail)


def _require_bundle(app: FastAPI) -> ServingBundle:
    bundle = app.state.bundle
    if bundle is None:
        raise HTTPException(status_code=503,
                            detail={"error": "no serving bundle loaded"})
    return bundle


def _encode_request(bundle: ServingBundle, body: dict):
    """Validate a raw-unit request and build one encoded feature row.

    Returns (row, imputed field names).
    """
    if not isinstance(body, dict):
        raise _bad_request("request body must be a JSON object")
    for key in body:
        if key not in _KNOWN_FIELDS:
            raise _bad_request(f"unknown feature {key!r}", key=key)
    for key in REQUIRED_PREDICT_FIELDS:
        if key not in body:
            raise _bad_request(f"missing required field {key!r}", key=key)

    gas = body["gas_type"]
    if gas not in GAS_LABELS:
        raise _bad_request(
            f"gas_type {gas!r} not in {list(GAS_LABELS)}", key="gas_type")
    species = body["species"]
    if not isinstance(species, str) or not species:
        raise _bad_request("species must be a non-empty string", key="species")

    means = bundle.species_means.get(species, bundle.species_means[""])
    values = {}
    imputed = []
    for name in NUMERIC_FEATURES:
        if name in body:
            value = body[name]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise _bad_request(f"{name!r} must be a number", key=name)
            value = float(value)
            if not math.isfinite(value):
                raise _bad_request(f"{name!r} must be finite", key=name)
            values[name] = value
        else:
            values[name] = float(means[name])
            imputed.append(name)

    row = []
    for name in bundle.pipeline.feature_names_in:
        if name.startswith(INDICATOR_PREFIX):
            row.append(1.0 if name == INDICATOR_PREFIX + gas else 0.0)
        else:
            row.append(values[name])
    return np.asarray([row], dtype=np.float64), imputed


def create_app(bundle: ServingBundle | None = None,
               store: RunStore | None = None,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="seed uplift service", docs_url=None, redoc_url=None)
    app.state.bundle = bundle
    app.state.store = store
    app.state.pdp_cache = OrderedDict()

    def set_bundle(new_bundle: ServingBundle | None) -> None:
        # atomic reference swap; in-flight requests keep the old object
        app.state.bundle = new_bundle
        app.state.pdp_cache = OrderedDict()

    app.state.set_bundle = set_bundle

    @app.get("/healthz")
    def healthz():
        return {"status": "ok",
                "bundle_loaded": app.state.bundle is not None}

    @app.get("/model/info")
    def model_info():
        bundle = _require_bundle(app)
        return {
            "bundle_version": bundle.version,
            "created_at": bundle.created_at,
            "model_family": bundle.model_family,
            "dataset_fingerprint": bundle.dataset_fingerprint,
            "train_metrics": bundle.train_metrics,
            "selected_features": list(bundle.selected_features),
            "feature_names": list(bundle.pipeline.feature_names_in),
            "numeric_features": list(NUMERIC_FEATURES),
            "required_fields": list(REQUIRED_PREDICT_FIELDS),
            "gas_labels": list(GAS_LABELS),
            "species": sorted(k for k in bundle.species_means if k),
            "species_means": bundle.species_means,
            "metadata": bundle.metadata,
        }

    async def _read_json(request: Request) -> dict:
        try:
            return await request.json()
        except Exception:
            raise _bad_request("request body is not valid JSON")

    @app.post("/predict")
    async def predict(request: Request):
        bundle = _require_bundle(app)
        body = await _read_json(request)
        row, imputed = _encode_request(bundle, body)
        value = float(bundle.predict_raw(row)[0])
        return {"uplift_pct": value, "bundle_version": bundle.version,
                "imputed": imputed}

    @app.post("/predict/explain")
    async def predict_explain(request: Request):
        bundle = _require_bundle(app)
        body = await _read_json(request)
        row, imputed = _encode_request(bundle, body)
        value = float(bundle.predict_raw(row)[0])
        sm = explain_workflow(bundle, row)
        attributions = [
            {"feature": name, "value": float(phi)}
            for name, phi in zip(sm.feature_names, sm.values[0])
        ]
        return {
            "uplift_pct": value,
            "base_value": float(sm.base_value),
            "attributions": attributions,
            "bundle_version": bundle.version,
            "imputed": imputed,
        }

    @app.get("/pdp")
    def pdp(x: str, y: str | None = None, res: int = 20):
        bundle = _require_bundle(app)
        if not (2 <= res <= _MAX_PDP_RES):
            raise _bad_request(f"res must be in [2, {_MAX_PDP_RES}]", key="res")
        axes = [x] if y is None else [x, y]
        for axis in axes:
            if axis not in bundle.pipeline.feature_names_in:
                raise _bad_request(f"unknown axis {axis!r}", key=axis)
        cache = app.state.pdp_cache
        cache_key = (bundle.version, x, y, res)
        if cache_key in cache:
            cache.move_to_end(cache_key)
            return cache[cache_key]
        view = _SelectedModel(bundle.model, bundle.selected_idx)
        grid = partial_dependence(
            view, bundle.pipeline, axes, res,
            bundle.background_raw, bundle.pipeline.feature_names_in)
        payload = {
            "x": x,
            "y": y,
            "res": res,
            "ticks_x": [float(t) for t in grid.ticks[0]],
            "ticks_y": [float(t) for t in grid.ticks[1]] if y is not None else None,
            "values": (grid.values.tolist() if y is not None
                       else [float(v) for v in grid.values]),
            "bundle_version": bundle.version,
        }
        cache[cache_key] = payload
        while len(cache) > _PDP_CACHE_SLOTS:
            cache.popitem(last=False)
        return payload

    @app.get("/runs")
    def runs(experiment: str | None = None, filter: str = ""):
        store = app.state.store
        if store is None:
            return {"runs": []}
        try:
            summaries = query_runs(store, experiment, filter)
        except FilterSyntaxError as exc:
            raise _bad_request(str(exc), key="filter")
        return {"runs": summaries}

    if ui_dir is not None:
        # registered last so the API routes above keep precedence
        if not Path(ui_dir).is_dir():
            raise ConfigError(f"ui directory {ui_dir} does not exist")
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app

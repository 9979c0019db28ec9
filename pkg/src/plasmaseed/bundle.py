"""Serving bundle: everything the prediction service needs in one file.

A bundle freezes the fitted pipeline, the model, the post-transform
feature selection, a raw-unit background matrix (for dependence plots
and attribution baselines), per-species trait means (for imputing
optional request fields), and the metrics measured at train time so a
later evaluation can be replayed and compared.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import StackingModel
from .errors import ConfigError, ModelError
from .models import model_from_doc
from .preprocess import FittedPipeline

BUNDLE_FORMAT = 1


def _model_to_doc(model) -> dict:
    if isinstance(model, StackingModel):
        return {"kind": "stack", "doc": model.to_doc()}
    return {"kind": "single", "doc": model.to_doc()}


def _model_from_doc(wrapped: dict):
    kind = wrapped.get("kind")
    if kind == "stack":
        return StackingModel.from_doc(wrapped["doc"])
    if kind == "single":
        return model_from_doc(wrapped["doc"])
    raise ModelError(f"unknown serialized model kind {kind!r}")


@dataclass
class ServingBundle:
    pipeline: FittedPipeline
    model: object
    model_family: str
    selected_features: tuple  # post-transform names the model consumes
    selected_idx: tuple  # their positions in pipeline.feature_names_out
    background_raw: np.ndarray  # encoded raw-unit training matrix
    species_means: dict  # species -> {column: mean}; "" key = global
    dataset_fingerprint: str = ""
    split_seed: int = 0
    split_ratio: float = 0.7
    train_metrics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    created_at: str = ""
    bundle_format: int = BUNDLE_FORMAT
    bundle_id: str = ""

    def __post_init__(self):
        if not self.created_at:
            self.created_at = _dt.datetime.now(_dt.timezone.utc).isoformat(
                timespec="seconds")
        width_in = len(self.pipeline.feature_names_in)
        if self.background_raw.ndim != 2 or self.background_raw.shape[1] != width_in:
            raise ConfigError(
                f"background matrix width {self.background_raw.shape} does not "
                f"match pipeline input width {width_in}")
        out_names = self.pipeline.feature_names_out
        for name, j in zip(self.selected_features, self.selected_idx):
            if not (0 <= j < len(out_names)) or out_names[j] != name:
                raise ConfigError(
                    f"selected feature {name!r} does not sit at pipeline "
                    f"output column {j}")
        expected = getattr(self.model, "n_features_", len(self.selected_idx))
        if expected != len(self.selected_idx):
            raise ConfigError(
                f"model expects {expected} columns, selection has "
                f"{len(self.selected_idx)}")
        if not self.bundle_id:
            self.bundle_id = self._digest()

    def _digest(self) -> str:
        payload = json.dumps(
            {"pipeline": self.pipeline.to_doc(),
             "model": _model_to_doc(self.model),
             "selected": list(self.selected_features),
             "fingerprint": self.dataset_fingerprint,
             "created_at": self.created_at},
            sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:12]

    @property
    def version(self) -> str:
        """Identity string the service and UI show as the bundle version."""
        return f"{self.bundle_format}.{self.bundle_id}"

    def transform_select(self, X_raw: np.ndarray) -> np.ndarray:
        X = self.pipeline.transform(np.asarray(X_raw, dtype=np.float64))
        return X[:, list(self.selected_idx)]

    def predict_raw(self, X_raw: np.ndarray) -> np.ndarray:
        """Raw-unit encoded rows -> predicted uplift."""
        return self.model.predict(self.transform_select(X_raw))

    def background_transformed(self) -> np.ndarray:
        return self.transform_select(self.background_raw)

    def to_doc(self) -> dict:
        return {
            "bundle_format": self.bundle_format,
            "bundle_id": self.bundle_id,
            "created_at": self.created_at,
            "dataset_fingerprint": self.dataset_fingerprint,
            "split_seed": self.split_seed,
            "split_ratio": self.split_ratio,
            "model_family": self.model_family,
            "pipeline": self.pipeline.to_doc(),
            "model": _model_to_doc(self.model),
            "selected_features": list(self.selected_features),
            "selected_idx": list(self.selected_idx),
            "background_raw": self.background_raw.tolist(),
            "species_means": self.species_means,
            "train_metrics": self.train_metrics,
            "metadata": self.metadata,
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_doc()) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_doc(cls, doc: dict) -> "ServingBundle":
        fmt = doc.get("bundle_format")
        if fmt != BUNDLE_FORMAT:
            raise ConfigError(
                f"bundle format {fmt!r} is not supported (expected {BUNDLE_FORMAT})")
        return cls(
            pipeline=FittedPipeline.from_doc(doc["pipeline"]),
            model=_model_from_doc(doc["model"]),
            model_family=doc["model_family"],
            selected_features=tuple(doc["selected_features"]),
            selected_idx=tuple(int(i) for i in doc["selected_idx"]),
            background_raw=np.asarray(doc["background_raw"], dtype=np.float64),
            species_means={k: dict(v) for k, v in doc["species_means"].items()},
            dataset_fingerprint=doc.get("dataset_fingerprint", ""),
            split_seed=int(doc.get("split_seed", 0)),
            split_ratio=float(doc.get("split_ratio", 0.7)),
            train_metrics=dict(doc.get("train_metrics", {})),
            metadata=dict(doc.get("metadata", {})),
            created_at=doc.get("created_at", ""),
            bundle_format=fmt,
            bundle_id=doc.get("bundle_id", ""),
        )

    @classmethod
    def load(cls, path) -> "ServingBundle":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"bundle file {path} does not exist")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bundle file {path} is not valid JSON: {exc}")
        return cls.from_doc(doc)

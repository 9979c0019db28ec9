"""Stacked generalization with a ridge meta-learner.

Level-2 features are 5-fold out-of-fold predictions from the base models,
so the meta-learner never sees a base prediction made by a model that was
trained on that row. Base models are refit on the full training set for
serving; the fold assignment is retained so the anti-leakage property can
be audited after the fact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import kfold_indices
from .errors import ModelError, NotFittedError
from .models import ModelConfig, fit_model, model_from_doc
from .rng import Rng

DEFAULT_ALPHA_GRID = (0.1, 1.0, 10.0, 100.0)

# the four hybrid configurations: pairs and the full trio of base families
HYBRID_STACKS = {
    "et+gb": ("et", "gb"),
    "et+xgb": ("et", "xgb"),
    "gb+xgb": ("gb", "xgb"),
    "et+gb+xgb": ("et", "gb", "xgb"),
}


@dataclass
class RidgeModel:
    """Closed-form ridge on centered features; intercept unpenalized."""

    weights: np.ndarray
    intercept: float
    alpha: float

    def predict(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z.reshape(1, -1)
        if Z.shape[1] != self.weights.size:
            raise ModelError(
                f"feature width {Z.shape[1]} does not match fit width {self.weights.size}")
        return Z @ self.weights + self.intercept

    def to_doc(self) -> dict:
        return {"weights": self.weights.tolist(), "intercept": self.intercept,
                "alpha": self.alpha}

    @classmethod
    def from_doc(cls, doc: dict) -> "RidgeModel":
        return cls(np.asarray(doc["weights"], dtype=np.float64),
                   float(doc["intercept"]), float(doc["alpha"]))


def fit_ridge(Z, y, alpha: float) -> RidgeModel:
    """Solve (Zc'Zc + alpha*I) w = Zc'y on centered features exactly."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Z.ndim != 2:
        raise ModelError("Z must be a 2-D matrix")
    if Z.shape[0] != y.size:
        raise ModelError("Z and y row counts differ")
    if Z.shape[0] < 2:
        raise ModelError("ridge needs at least 2 rows")
    if alpha < 0:
        raise ModelError("alpha must be >= 0")
    mz = Z.mean(axis=0)
    my = float(y.mean())
    Zc = Z - mz
    yc = y - my
    A = Zc.T @ Zc + alpha * np.eye(Z.shape[1])
    b = Zc.T @ yc
    singular_msg = ("normal equations are singular; "
                    "use alpha > 0 to regularize")
    try:
        w = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise ModelError(singular_msg) from None
    residual = A @ w - b
    scale = max(1.0, float(np.linalg.norm(b)))
    if not np.isfinite(w).all() or np.linalg.norm(residual) > 1e-8 * scale:
        raise ModelError(singular_msg)
    intercept = my - float(mz @ w)
    return RidgeModel(weights=w, intercept=intercept, alpha=float(alpha))


def select_alpha(Z, y, grid=DEFAULT_ALPHA_GRID, k: int = 5, seed: int = 0) -> float:
    """Grid alpha minimizing mean k-fold CV RMSE; ties pick the smaller."""
    grid = tuple(grid)
    if not grid:
        raise ModelError("alpha grid is empty")
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    folds = kfold_indices(y.size, k, Rng(seed).derive("alpha"))
    all_rows = np.arange(y.size)
    best = None
    for alpha in grid:
        fold_rmse = []
        for val in folds:
            train = np.setdiff1d(all_rows, val)
            model = fit_ridge(Z[train], y[train], alpha)
            err = model.predict(Z[val]) - y[val]
            fold_rmse.append(float(np.sqrt(np.mean(err ** 2))))
        score = float(np.mean(fold_rmse))
        if best is None or (score, alpha) < best:
            best = (score, alpha)
    return best[1]


@dataclass
class StackingModel:
    """Base models plus ridge meta-learner over their predictions."""

    base_configs: list[ModelConfig]
    refit_base_models: list
    meta: RidgeModel
    oof_matrix: np.ndarray
    fold_assignment: np.ndarray
    alpha_grid: tuple
    chosen_alpha: float
    seed: int
    # per-fold training/validation row indices kept for the leakage audit
    fold_train_rows: list = field(default_factory=list)
    fold_val_rows: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        if not self.refit_base_models:
            raise NotFittedError("stacking model has no fitted bases")
        level2 = np.column_stack([m.predict(X) for m in self.refit_base_models])
        return self.meta.predict(level2)

    def to_doc(self) -> dict:
        return {
            "version": 1,
            "base_configs": [{"family": c.family, "params": dict(c.params)}
                             for c in self.base_configs],
            "bases": [m.to_doc() for m in self.refit_base_models],
            "meta": self.meta.to_doc(),
            "oof_matrix": self.oof_matrix.tolist(),
            "fold_assignment": self.fold_assignment.tolist(),
            "alpha_grid": list(self.alpha_grid),
            "chosen_alpha": self.chosen_alpha,
            "seed": self.seed,
            "fold_train_rows": [r.tolist() for r in self.fold_train_rows],
            "fold_val_rows": [r.tolist() for r in self.fold_val_rows],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "StackingModel":
        return cls(
            base_configs=[ModelConfig(c["family"], c["params"])
                          for c in doc["base_configs"]],
            refit_base_models=[model_from_doc(d) for d in doc["bases"]],
            meta=RidgeModel.from_doc(doc["meta"]),
            oof_matrix=np.asarray(doc["oof_matrix"], dtype=np.float64),
            fold_assignment=np.asarray(doc["fold_assignment"], dtype=np.int64),
            alpha_grid=tuple(doc["alpha_grid"]),
            chosen_alpha=float(doc["chosen_alpha"]),
            seed=int(doc["seed"]),
            fold_train_rows=[np.asarray(r, dtype=np.intp)
                             for r in doc["fold_train_rows"]],
            fold_val_rows=[np.asarray(r, dtype=np.intp)
                           for r in doc["fold_val_rows"]],
        )


def base_seed(master_seed: int, fold: int | str, base_index: int) -> int:
    """Seed for the base model of one (fold, base) cell; fold "refit" is
    the full-data serving fit."""
    return Rng(master_seed).derive("stack", "fold", fold, "base", base_index).key


def fit_stacking(X, y, base_configs, seed: int,
                 alpha_grid=DEFAULT_ALPHA_GRID, n_folds: int = 5) -> StackingModel:
    """5-fold out-of-fold stacking with a CV-selected ridge meta-learner."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    base_configs = list(base_configs)
    if not base_configs:
        raise ModelError("stacking needs at least one base config")
    n = y.size
    if n < 10:
        raise ModelError(f"stacking needs at least 10 rows, got {n}")

    folds = kfold_indices(n, n_folds, Rng(seed).derive("stack"))
    fold_assignment = np.empty(n, dtype=np.int64)
    for f, val in enumerate(folds):
        fold_assignment[val] = f

    all_rows = np.arange(n)
    oof = np.full((n, len(base_configs)), np.nan)
    fold_train_rows, fold_val_rows = [], []
    for f, val in enumerate(folds):
        if val.size < 1:
            raise ModelError(f"fold {f} is empty")
        train = np.setdiff1d(all_rows, val)
        fold_train_rows.append(train)
        fold_val_rows.append(val)
        for b, config in enumerate(base_configs):
            model = fit_model(config, X[train], y[train], base_seed(seed, f, b))
            oof[val, b] = model.predict(X[val])

    chosen = select_alpha(oof, y, alpha_grid, k=n_folds,
                          seed=Rng(seed).derive("stack", "alpha").key)
    meta = fit_ridge(oof, y, chosen)
    refit = [fit_model(config, X, y, base_seed(seed, "refit", b))
             for b, config in enumerate(base_configs)]
    return StackingModel(
        base_configs=base_configs,
        refit_base_models=refit,
        meta=meta,
        oof_matrix=oof,
        fold_assignment=fold_assignment,
        alpha_grid=tuple(alpha_grid),
        chosen_alpha=chosen,
        seed=seed,
        fold_train_rows=fold_train_rows,
        fold_val_rows=fold_val_rows,
    )


def predict_stacking(model: StackingModel, X) -> np.ndarray:
    return model.predict(X)


def audit_oof(model: StackingModel, X, y) -> dict:
    """Structural anti-leakage audit of a fitted stacking model.

    Confirms the folds partition the rows exactly, that no fold's training
    rows intersect its validation rows, and that every OOF entry is
    byte-identical to the prediction of a base model refit (same derived
    seed) on the recorded training rows, i.e. a model that never saw the
    row it predicts.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    seen = np.concatenate(model.fold_val_rows)
    partition_ok = (seen.size == n and np.array_equal(np.sort(seen), np.arange(n)))
    disjoint_ok = all(
        np.intersect1d(tr, va).size == 0
        for tr, va in zip(model.fold_train_rows, model.fold_val_rows))
    replay_ok = True
    for f, (train, val) in enumerate(zip(model.fold_train_rows, model.fold_val_rows)):
        for b, config in enumerate(model.base_configs):
            replay = fit_model(config, X[train], y[train], base_seed(model.seed, f, b))
            if not np.array_equal(replay.predict(X[val]), model.oof_matrix[val, b]):
                replay_ok = False
    return {"partition_ok": partition_ok, "disjoint_ok": disjoint_ok,
            "replay_ok": replay_ok,
            "ok": partition_ok and disjoint_ok and replay_ok}

"""Model interpretation: permutation importance, cumulative-importance
feature selection, exact per-tree Shapley attribution, partial dependence
grids, and empirical response surfaces.

Attribution uses the polynomial-time path algorithm with path-dependent
weighting. Node covers are counted by routing the background sample, so
the reported base value is exactly the mean model output over the
background; a node the background never reaches falls back to the
training-time sample ratio. The brute-force oracle enumerates coalitions
against the identical value function, which is what makes "matches within
1e-6" a well-posed claim.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, ModelError
from .evaluate import rmse
from .models import (
    ExtraTreesModel,
    GradientBoostingModel,
    RegularizedBoostingModel,
    TreeArrays,
)
from .rng import Rng

# ---------------------------------------------------------------------------
# permutation importance


@dataclass
class ImportanceReport:
    feature_names: tuple
    mean_importance: np.ndarray  # aligned to feature index; may be negative
    raw: np.ndarray  # repeats x features
    order: np.ndarray  # feature indices, descending mean (ties: lower index)
    shares: np.ndarray  # non-negative, sum 1 (all zero if nothing positive)

    def ordered_names(self) -> list:
        return [self.feature_names[i] for i in self.order]

    def to_doc(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean_importance": self.mean_importance.tolist(),
            "raw": self.raw.tolist(),
            "order": self.order.tolist(),
            "shares": self.shares.tolist(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ImportanceReport":
        return cls(
            feature_names=tuple(doc["feature_names"]),
            mean_importance=np.asarray(doc["mean_importance"], dtype=np.float64),
            raw=np.asarray(doc["raw"], dtype=np.float64),
            order=np.asarray(doc["order"], dtype=np.int64),
            shares=np.asarray(doc["shares"], dtype=np.float64),
        )


def permutation_importance(model, X_val, y_val, feature_names,
                           repeats: int = 5, seed: int = 0) -> ImportanceReport:
    """RMSE increase when one feature column is shuffled, averaged over
    seeded repeats. Negative means are kept in the report (a useful noise
    diagnostic) and clipped to zero only for the share computation."""
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    feature_names = tuple(feature_names)
    if repeats < 1:
        raise DataValidationError("repeats must be >= 1")
    if X_val.shape[1] != len(feature_names):
        raise DataValidationError("feature_names width does not match X")
    n, p = X_val.shape
    baseline = rmse(y_val, model.predict(X_val))
    raw = np.empty((repeats, p))
    for j in range(p):
        for r in range(repeats):
            perm = Rng(seed).derive("pi", feature_names[j], "rep", r).permutation(n)
            shuffled = X_val.copy()
            shuffled[:, j] = X_val[perm, j]
            raw[r, j] = rmse(y_val, model.predict(shuffled)) - baseline
    mean = raw.mean(axis=0)
    # descending mean; equal means resolve to the lower feature index
    order = np.lexsort((np.arange(p), -mean))
    clipped = np.clip(mean, 0.0, None)
    total = clipped.sum()
    shares = clipped / total if total > 0 else np.zeros(p)
    return ImportanceReport(feature_names=feature_names, mean_importance=mean,
                            raw=raw, order=order, shares=shares)


def select_top_features(report: ImportanceReport, threshold: float) -> list:
    """Smallest prefix of the importance ordering whose cumulative share
    reaches the threshold; returns feature names in importance order."""
    if not (0.0 < threshold <= 1.0):
        raise DataValidationError("threshold must be in (0, 1]")
    chosen = []
    cum = 0.0
    for idx in report.order:
        if cum >= threshold - 1e-9:
            break
        chosen.append(report.feature_names[idx])
        cum += report.shares[idx]
    return chosen


# ---------------------------------------------------------------------------
# Shapley attribution for tree ensembles


@dataclass
class _ExplainTree:
    """One tree prepared for attribution: local-index arrays plus the
    background cover of every node."""

    tree: TreeArrays
    cover: np.ndarray  # background rows through each node (float64)

    def fractions(self, node: int) -> tuple:
        """(left, right) conditional probabilities at an internal node,
        from background covers, falling back to the training-time ratio
        when the background never reaches the node."""
        t = self.tree
        lo, hi = t.left[node], t.right[node]
        if self.cover[node] > 0:
            return (self.cover[lo] / self.cover[node],
                    self.cover[hi] / self.cover[node])
        return (t.n_samples[lo] / t.n_samples[node],
                t.n_samples[hi] / t.n_samples[node])


def _route_counts(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    cover = np.zeros(tree.n_nodes)
    stack = [(0, np.arange(X.shape[0], dtype=np.intp))]
    while stack:
        node, rows = stack.pop()
        cover[node] = rows.size
        if tree.feature[node] < 0 or rows.size == 0:
            if tree.feature[node] >= 0 and rows.size == 0:
                # still record zero cover below so fractions() can fall back
                stack.append((tree.left[node], rows))
                stack.append((tree.right[node], rows))
            continue
        go_left = X[rows, tree.feature[node]] <= tree.threshold[node]
        stack.append((tree.left[node], rows[go_left]))
        stack.append((tree.right[node], rows[~go_left]))
    return cover


def _model_explainers(model, background: np.ndarray):
    """(explain trees, per-tree scale, constant offset) for a tree model."""
    if isinstance(model, ExtraTreesModel):
        scale = 1.0 / model.trees.n_trees
        offset = 0.0
    elif isinstance(model, (GradientBoostingModel, RegularizedBoostingModel)):
        scale = model.learning_rate
        offset = model.base_prediction_
    else:
        raise ModelError(
            f"{type(model).__name__} is not a tree model; attribution "
            "supports the tree families and stacks of them")
    views = [model.trees.tree_view(t) for t in range(model.trees.n_trees)]
    trees = [_ExplainTree(v, _route_counts(v, background)) for v in views]
    return trees, scale, offset


class _Path:
    """Unique-feature decision path with Shapley permutation weights."""

    __slots__ = ("d", "z", "o", "w")

    def __init__(self):
        self.d = []  # feature index per path element (-1 for the root)
        self.z = []  # fraction of zero (feature-hidden) paths that flow on
        self.o = []  # fraction of one (feature-shown) paths that flow on
        self.w = []  # permutation weights

    def copy(self) -> "_Path":
        c = _Path.__new__(_Path)
        c.d = self.d.copy()
        c.z = self.z.copy()
        c.o = self.o.copy()
        c.w = self.w.copy()
        return c

    def extend(self, pz: float, po: float, pi: int) -> None:
        l = len(self.d)
        self.d.append(pi)
        self.z.append(pz)
        self.o.append(po)
        self.w.append(1.0 if l == 0 else 0.0)
        for i in range(l - 1, -1, -1):
            self.w[i + 1] += po * self.w[i] * (i + 1) / (l + 1)
            self.w[i] = pz * self.w[i] * (l - i) / (l + 1)

    def unwind(self, i: int) -> None:
        l = len(self.d) - 1
        one = self.o[i]
        zero = self.z[i]
        carry = self.w[l]
        for j in range(l - 1, -1, -1):
            if one != 0:
                keep = self.w[j]
                self.w[j] = carry * (l + 1) / ((j + 1) * one)
                carry = keep - self.w[j] * zero * (l - j) / (l + 1)
            else:
                self.w[j] = self.w[j] * (l + 1) / (zero * (l - j))
        del self.d[i], self.z[i], self.o[i], self.w[l]

    def unwound_sum(self, i: int) -> float:
        l = len(self.d) - 1
        one = self.o[i]
        zero = self.z[i]
        carry = self.w[l]
        total = 0.0
        for j in range(l - 1, -1, -1):
            if one != 0:
                part = carry * (l + 1) / ((j + 1) * one)
                total += part
                carry = self.w[j] - part * zero * (l - j) / (l + 1)
            else:
                total += self.w[j] * (l + 1) / (zero * (l - j))
        return total

    def find(self, feature: int) -> int:
        for i, d in enumerate(self.d):
            if d == feature:
                return i
        return -1


def _shap_one_tree(ex: _ExplainTree, x: np.ndarray, phi: np.ndarray,
                   scale: float) -> None:
    tree = ex.tree

    def recurse(node: int, path: _Path, pz: float, po: float, pi: int) -> None:
        if pz == 0.0 and po == 0.0:
            # no permutation mass reaches this subtree (empty background
            # cover on a cold branch); its contribution is exactly zero
            return
        path = path.copy()
        path.extend(pz, po, pi)
        f = tree.feature[node]
        if f < 0:
            for i in range(1, len(path.d)):
                w = path.unwound_sum(i)
                phi[path.d[i]] += (w * (path.o[i] - path.z[i])
                                   * tree.value[node] * scale)
            return
        frac_left, frac_right = ex.fractions(node)
        if x[f] <= tree.threshold[node]:
            hot, cold = tree.left[node], tree.right[node]
            hot_frac, cold_frac = frac_left, frac_right
        else:
            hot, cold = tree.right[node], tree.left[node]
            hot_frac, cold_frac = frac_right, frac_left
        iz = io = 1.0
        k = path.find(f)
        if k >= 0:
            iz, io = path.z[k], path.o[k]
            path.unwind(k)
        recurse(hot, path, iz * hot_frac, io, f)
        recurse(cold, path, iz * cold_frac, 0.0, f)

    recurse(0, _Path(), 1.0, 1.0, -1)


@dataclass
class ShapMatrix:
    values: np.ndarray  # n x p attributions
    base_value: float  # expected model output over the background
    feature_names: tuple = ()

    def to_doc(self) -> dict:
        return {"values": self.values.tolist(), "base_value": self.base_value,
                "feature_names": list(self.feature_names)}


def _stack_components(model):
    """Meta weight and tree-model pairs for a stacking model, or None."""
    from .ensemble import StackingModel
    if not isinstance(model, StackingModel):
        return None
    return list(zip(model.meta.weights, model.refit_base_models)), model.meta.intercept


def tree_shap(model, X, background, feature_names=()) -> ShapMatrix:
    """Exact path-dependent Shapley values per row, summed across trees.

    For a stacking model the ridge meta-learner is linear, so attributions
    combine as the weighted sum of the base models' attributions and local
    accuracy is preserved exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise ModelError("background sample must be a non-empty matrix")

    stacked = _stack_components(model)
    if stacked is not None:
        pairs, intercept = stacked
        values = np.zeros(X.shape)
        base = intercept
        for weight, base_model in pairs:
            part = tree_shap(base_model, X, background)
            values += weight * part.values
            base += weight * part.base_value
        return ShapMatrix(values=values, base_value=float(base),
                          feature_names=tuple(feature_names))

    trees, scale, _ = _model_explainers(model, background)
    values = np.zeros(X.shape)
    for row in range(X.shape[0]):
        phi = np.zeros(X.shape[1])
        for ex in trees:
            _shap_one_tree(ex, X[row], phi, scale)
        values[row] = phi
    base = float(np.mean(model.predict(background)))
    return ShapMatrix(values=values, base_value=base,
                      feature_names=tuple(feature_names))


def _tree_coalition_value(ex: _ExplainTree, x: np.ndarray, mask: int) -> float:
    """Conditional expectation of one tree given the coalition bitmask,
    following x on coalition features and cover-weighting the rest."""
    tree = ex.tree

    def walk(node: int) -> float:
        f = tree.feature[node]
        if f < 0:
            return float(tree.value[node])
        if mask >> int(f) & 1:
            nxt = tree.left[node] if x[f] <= tree.threshold[node] else tree.right[node]
            return walk(nxt)
        frac_left, frac_right = ex.fractions(node)
        return frac_left * walk(tree.left[node]) + frac_right * walk(tree.right[node])

    return walk(0)


def brute_force_shapley(model, x, background, max_features: int = 12):
    """Exhaustive-coalition Shapley attribution (test oracle).

    Uses the identical per-tree value function as tree_shap. Refuses more
    than `max_features` features: the 2^p coalition sweep is the point,
    and the cost guard keeps it honest.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    p = x.size
    if p > max_features:
        raise ModelError(
            f"brute force over {p} features exceeds the {max_features}-feature guard")
    background = np.asarray(background, dtype=np.float64)

    stacked = _stack_components(model)
    if stacked is not None:
        pairs, _ = stacked
        phi = np.zeros(p)
        for weight, base_model in pairs:
            phi += weight * brute_force_shapley(base_model, x, background,
                                                max_features)
        return phi

    trees, scale, offset = _model_explainers(model, background)

    def value(mask: int) -> float:
        return offset + scale * sum(
            _tree_coalition_value(ex, x, mask) for ex in trees)

    cache = {mask: value(mask) for mask in range(1 << p)}
    fact = [math.factorial(i) for i in range(p + 1)]
    phi = np.zeros(p)
    full = (1 << p) - 1
    for j in range(p):
        others = full & ~(1 << j)
        mask = others
        while True:
            s = bin(mask).count("1")
            weight = fact[s] * fact[p - s - 1] / fact[p]
            phi[j] += weight * (cache[mask | (1 << j)] - cache[mask])
            if mask == 0:
                break
            mask = (mask - 1) & others
    return phi


# ---------------------------------------------------------------------------
# partial dependence and empirical response surface


@dataclass
class PDPGrid:
    axes: tuple
    ticks: list  # one array of raw-unit tick values per axis
    values: np.ndarray  # (res,) for 1-D, (res_x, res_y) for 2-D

    def to_doc(self) -> dict:
        return {"axes": list(self.axes),
                "ticks": [t.tolist() for t in self.ticks],
                "values": self.values.tolist()}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if len(self.axes) == 1:
                writer.writerow([self.axes[0], "value"])
                for tick, val in zip(self.ticks[0], self.values):
                    writer.writerow([tick, val])
            else:
                writer.writerow([self.axes[0], self.axes[1], "value"])
                for i, tx in enumerate(self.ticks[0]):
                    for j, ty in enumerate(self.ticks[1]):
                        writer.writerow([tx, ty, self.values[i, j]])


def partial_dependence(model, pipeline, axes, resolution: int,
                       X_raw, feature_names) -> PDPGrid:
    """Average model response over the data with 1 or 2 raw-unit features
    overridden on a grid.

    Overrides happen before the pipeline so transformed bases and
    polynomial interaction terms update consistently with the override.
    """
    axes = tuple(axes)
    feature_names = tuple(feature_names)
    if len(axes) not in (1, 2):
        raise DataValidationError("partial dependence supports 1 or 2 axes")
    if resolution < 2:
        raise DataValidationError("resolution must be >= 2")
    for axis in axes:
        if axis not in feature_names:
            raise DataValidationError(f"axis {axis!r} is not a schema feature")
    X_raw = np.asarray(X_raw, dtype=np.float64)
    cols = [feature_names.index(a) for a in axes]
    ticks = [np.linspace(X_raw[:, c].min(), X_raw[:, c].max(), resolution)
             for c in cols]

    if len(axes) == 1:
        combos = ticks[0].reshape(-1, 1)
    else:
        gx, gy = np.meshgrid(ticks[0], ticks[1], indexing="ij")
        combos = np.column_stack([gx.ravel(), gy.ravel()])

    n = X_raw.shape[0]
    cells = combos.shape[0]
    # chunk the override grid so the routing buffer stays modest
    per_chunk = max(1, 500_000 // max(1, n))
    means = np.empty(cells)
    for start in range(0, cells, per_chunk):
        chunk = combos[start:start + per_chunk]
        tiled = np.tile(X_raw, (chunk.shape[0], 1))
        for k, c in enumerate(cols):
            tiled[:, c] = np.repeat(chunk[:, k], n)
        transformed = tiled if pipeline is None else pipeline.transform(tiled)
        preds = model.predict(transformed).reshape(chunk.shape[0], n)
        means[start:start + chunk.shape[0]] = preds.mean(axis=1)
    values = means if len(axes) == 1 else means.reshape(resolution, resolution)
    return PDPGrid(axes=axes, ticks=ticks, values=values)


@dataclass
class SurfaceGrid:
    voltage_edges: np.ndarray
    time_edges: np.ndarray
    mean_uplift: np.ndarray  # NaN where a bin is empty
    counts: np.ndarray

    def argmax_cell(self) -> tuple:
        """(voltage bin, time bin) of the best populated cell."""
        masked = np.where(self.counts > 0, self.mean_uplift, -np.inf)
        flat = int(np.argmax(masked))
        return np.unravel_index(flat, masked.shape)

    def to_doc(self) -> dict:
        return {"voltage_edges": self.voltage_edges.tolist(),
                "time_edges": self.time_edges.tolist(),
                "mean_uplift": [[None if not np.isfinite(v) else v for v in row]
                                for row in self.mean_uplift],
                "counts": self.counts.tolist()}


def response_surface(ds, voltage_bins=6, time_bins=6) -> SurfaceGrid:
    """Empirical mean uplift per (voltage, time) bin with counts; model-free
    view of where treatment conditions actually paid off."""
    voltage = ds.columns["voltage_kv"]
    time_s = ds.columns["plasma_time_s"]
    y = ds.y
    ok = np.isfinite(voltage) & np.isfinite(time_s) & np.isfinite(y)
    voltage, time_s, y = voltage[ok], time_s[ok], y[ok]
    if voltage.size == 0:
        raise DataValidationError("no rows with voltage, time, and uplift")

    v_edges = (np.asarray(voltage_bins, dtype=np.float64)
               if np.ndim(voltage_bins) else
               np.linspace(voltage.min(), voltage.max(), int(voltage_bins) + 1))
    t_edges = (np.asarray(time_bins, dtype=np.float64)
               if np.ndim(time_bins) else
               np.linspace(time_s.min(), time_s.max(), int(time_bins) + 1))

    nv, nt = v_edges.size - 1, t_edges.size - 1
    vi = np.clip(np.digitize(voltage, v_edges) - 1, 0, nv - 1)
    ti = np.clip(np.digitize(time_s, t_edges) - 1, 0, nt - 1)
    sums = np.zeros((nv, nt))
    counts = np.zeros((nv, nt), dtype=np.int64)
    np.add.at(sums, (vi, ti), y)
    np.add.at(counts, (vi, ti), 1)
    with np.errstate(invalid="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return SurfaceGrid(voltage_edges=v_edges, time_edges=t_edges,
                       mean_uplift=mean, counts=counts)

"""Regression tree ensembles built from scratch on numpy.

Three families share one flat-array tree representation:

* extra trees: no bootstrap, one uniform-random threshold per candidate
  feature per node, pick the candidate with the lowest child variance;
* gradient boosting: stagewise trees fitted to residuals by exhaustive
  variance-minimizing splits, shrunk by a learning rate;
* regularized boosting: second-order boosting for squared loss with a
  split-gain threshold (gamma), leaf L2 penalty, minimum child weight,
  and row/column subsampling.

Determinism contract: fits are byte-identical across worker counts and
across training row order. Rows are put into a canonical lexicographic
order at fit time and every per-tree random stream is derived from
(master seed, tree index), never from shared mutable state.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, NotFittedError
from .rng import Rng

_LEAF = -1


@dataclass
class TreeArrays:
    """One binary regression tree as parallel arrays.

    feature[i] == -1 marks a leaf; routing is "left iff x[feature] <=
    threshold". n_samples counts the training rows that reached each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size


class _TreeBuilder:
    """Accumulates nodes during a depth-first grow."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.n_samples: list[int] = []

    def add_node(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append(0.0)
        self.n_samples.append(0)
        return len(self.feature) - 1

    def finish(self) -> TreeArrays:
        return TreeArrays(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            n_samples=np.asarray(self.n_samples, dtype=np.int32),
        )


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lexicographic row order over (features, target).

    Makes fits independent of the incoming row order: duplicate rows are
    interchangeable and everything else gets a unique slot.
    """
    keys = (y,) + tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


def _build_extra_tree(X, y, rng: Rng, min_samples_split: int,
                      min_samples_leaf: int, max_features: int) -> TreeArrays:
    out = _TreeBuilder()
    p = X.shape[1]
    root = out.add_node()
    stack = [(np.arange(X.shape[0], dtype=np.intp), root)]
    while stack:
        idx, node = stack.pop()
        yn = y[idx]
        m = idx.size
        out.n_samples[node] = m
        out.value[node] = float(yn.mean())
        if m < min_samples_split or yn.max() == yn.min():
            continue
        feats = (np.arange(p, dtype=np.intp) if max_features >= p
                 else rng.choice_without_replacement(p, max_features))
        Xn = X[np.ix_(idx, feats)]
        lo = Xn.min(axis=0)
        hi = Xn.max(axis=0)
        spread = hi > lo
        if not spread.any():
            continue  # all candidate features constant in this node
        u = rng.uniforms(feats.size)
        thr = lo + u * (hi - lo)
        # open interval (lo, hi): a draw landing exactly on lo is nudged up
        on_lo = spread & (thr <= lo)
        if on_lo.any():
            thr[on_lo] = np.nextafter(lo[on_lo], hi[on_lo])

        mask = Xn <= thr  # m x K, True routes left
        left_cnt = mask.sum(axis=0)
        right_cnt = m - left_cnt
        valid = spread & (left_cnt >= min_samples_leaf) & (right_cnt >= min_samples_leaf)
        if not valid.any():
            continue
        left_sum = yn @ mask
        left_sq = (yn * yn) @ mask
        tot_sum = float(yn.sum())
        tot_sq = float((yn * yn).sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            sse = (left_sq - left_sum ** 2 / left_cnt
                   + (tot_sq - left_sq) - (tot_sum - left_sum) ** 2 / right_cnt)
        sse = np.where(valid, sse, np.inf)
        k = int(np.argmin(sse))  # ties resolve to the lowest feature index
        if not np.isfinite(sse[k]):
            continue

        go_left = mask[:, k]
        left_id = out.add_node()
        right_id = out.add_node()
        out.feature[node] = int(feats[k])
        out.threshold[node] = float(thr[k])
        out.left[node] = left_id
        out.right[node] = right_id
        stack.append((idx[~go_left], right_id))
        stack.append((idx[go_left], left_id))  # left grown first
    return out.finish()


def _best_exhaustive_split(Xn, yn, min_samples_leaf):
    """Greedy CART split: minimize total child SSE over all features and
    all midpoints between adjacent distinct values.

    Returns (feature_local_index, threshold, left_mask) or None.
    """
    m, k = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = yn[order]
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    tot_sum = csum[-1]
    tot_sq = csq[-1]

    cnt_left = np.arange(1, m, dtype=np.float64)[:, None]
    cnt_right = m - cnt_left
    sum_left = csum[:-1]
    sq_left = csq[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sse = (sq_left - sum_left ** 2 / cnt_left
               + (tot_sq - sq_left) - (tot_sum - sum_left) ** 2 / cnt_right)
    distinct = xs[1:] > xs[:-1]
    valid = distinct & (cnt_left >= min_samples_leaf) & (cnt_right >= min_samples_leaf)
    sse = np.where(valid, sse, np.inf)
    if not np.isfinite(sse).any():
        return None
    # first flat-argmin in (position, feature) order; transpose so ties
    # resolve by lowest feature index, then by lowest threshold
    flat = int(np.argmin(sse.T))
    f = flat // (m - 1)
    pos = flat % (m - 1)
    thr = 0.5 * (xs[pos, f] + xs[pos + 1, f])
    return f, float(thr), Xn[:, f] <= thr


def _build_cart_tree(X, y, min_samples_split, min_samples_leaf) -> TreeArrays:
    """Variance-minimizing regression tree on residuals (boosting stage)."""
    out = _TreeBuilder()
    root = out.add_node()
    stack = [(np.arange(X.shape[0], dtype=np.intp), root)]
    while stack:
        idx, node = stack.pop()
        yn = y[idx]
        m = idx.size
        out.n_samples[node] = m
        out.value[node] = float(yn.mean())
        if m < min_samples_split or m < 2 * min_samples_leaf or yn.max() == yn.min():
            continue
        found = _best_exhaustive_split(X[idx], yn, min_samples_leaf)
        if found is None:
            continue
        f, thr, go_left = found
        left_id = out.add_node()
        right_id = out.add_node()
        out.feature[node] = int(f)
        out.threshold[node] = thr
        out.left[node] = left_id
        out.right[node] = right_id
        stack.append((idx[~go_left], right_id))
        stack.append((idx[go_left], left_id))
    return out.finish()


def _best_gain_split(Xn, g, lam, gamma, min_child_weight):
    """Second-order split search: gain = half the sum-of-squares improvement
    of -G^2/(H+lam), minus gamma. Hessians are 1 under squared loss, so H
    is the child count."""
    m, k = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    gs = g[order]
    gsum = np.cumsum(gs, axis=0)
    g_tot = gsum[-1]

    h_left = np.arange(1, m, dtype=np.float64)[:, None]
    h_right = m - h_left
    g_left = gsum[:-1]
    g_right = g_tot - g_left
    parent = g_tot ** 2 / (m + lam)
    gain = 0.5 * (g_left ** 2 / (h_left + lam)
                  + g_right ** 2 / (h_right + lam) - parent) - gamma
    distinct = xs[1:] > xs[:-1]
    valid = distinct & (h_left >= min_child_weight) & (h_right >= min_child_weight)
    gain = np.where(valid, gain, -np.inf)
    best = float(np.max(gain))
    if best <= 0.0:
        return None
    flat = int(np.argmax(gain.T == best))  # ties: lowest feature, then threshold
    f = flat // (m - 1)
    pos = flat % (m - 1)
    thr = 0.5 * (xs[pos, f] + xs[pos + 1, f])
    return f, float(thr), Xn[:, f] <= thr


def _build_gain_tree(X, g, feats, lam, gamma, min_child_weight) -> TreeArrays:
    """Regularized boosting stage tree; leaf value is -G/(H+lam).

    `feats` is the column-subsampled candidate set (global indices).
    """
    out = _TreeBuilder()
    root = out.add_node()
    stack = [(np.arange(X.shape[0], dtype=np.intp), root)]
    while stack:
        idx, node = stack.pop()
        gn = g[idx]
        m = idx.size
        out.n_samples[node] = m
        out.value[node] = float(-gn.sum() / (m + lam))
        if m < 2 or m < 2 * min_child_weight:
            continue
        found = _best_gain_split(X[np.ix_(idx, feats)], gn, lam, gamma, min_child_weight)
        if found is None:
            continue
        f, thr, go_left = found
        left_id = out.add_node()
        right_id = out.add_node()
        out.feature[node] = int(feats[f])
        out.threshold[node] = thr
        out.left[node] = left_id
        out.right[node] = right_id
        stack.append((idx[~go_left], right_id))
        stack.append((idx[go_left], left_id))
    return out.finish()


class PackedTrees:
    """All trees of an ensemble concatenated for vectorized routing."""

    def __init__(self, trees: list[TreeArrays]):
        offsets = np.zeros(len(trees) + 1, dtype=np.int64)
        for i, t in enumerate(trees):
            offsets[i + 1] = offsets[i] + t.n_nodes
        self.offsets = offsets
        self.feature = np.concatenate([t.feature for t in trees])
        self.threshold = np.concatenate([t.threshold for t in trees])
        self.value = np.concatenate([t.value for t in trees])
        self.n_samples = np.concatenate([t.n_samples for t in trees])
        # children as absolute node ids; leaves keep -1
        lefts, rights = [], []
        for i, t in enumerate(trees):
            off = offsets[i]
            lefts.append(np.where(t.left >= 0, t.left + off, _LEAF))
            rights.append(np.where(t.right >= 0, t.right + off, _LEAF))
        self.left = np.concatenate(lefts).astype(np.int64)
        self.right = np.concatenate(rights).astype(np.int64)

    @property
    def n_trees(self) -> int:
        return self.offsets.size - 1

    def tree_view(self, t: int) -> TreeArrays:
        """Tree t with node ids local to the tree."""
        a, b = self.offsets[t], self.offsets[t + 1]
        return TreeArrays(
            feature=self.feature[a:b],
            threshold=self.threshold[a:b],
            left=np.where(self.left[a:b] >= 0, self.left[a:b] - a, _LEAF),
            right=np.where(self.right[a:b] >= 0, self.right[a:b] - a, _LEAF),
            value=self.value[a:b],
            n_samples=self.n_samples[a:b],
        )

    def leaf_values(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        """Route every row through every tree; returns (n_rows, n_trees)."""
        T = self.n_trees if n_trees is None else n_trees
        n = X.shape[0]
        cur = np.tile(self.offsets[:T], n)
        rows = np.repeat(np.arange(n, dtype=np.int64), T)
        active = np.nonzero(self.feature[cur] >= 0)[0]
        while active.size:
            nodes = cur[active]
            f = self.feature[nodes]
            xv = X[rows[active], f]
            go_left = xv <= self.threshold[nodes]
            cur[active] = np.where(go_left, self.left[nodes], self.right[nodes])
            still = self.feature[cur[active]] >= 0
            active = active[still]
        return self.value[cur].reshape(n, T)

    def to_doc(self) -> dict:
        return {
            "offsets": self.offsets.tolist(),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "PackedTrees":
        obj = cls.__new__(cls)
        obj.offsets = np.asarray(doc["offsets"], dtype=np.int64)
        obj.feature = np.asarray(doc["feature"], dtype=np.int32)
        obj.threshold = np.asarray(doc["threshold"], dtype=np.float64)
        obj.left = np.asarray(doc["left"], dtype=np.int64)
        obj.right = np.asarray(doc["right"], dtype=np.int64)
        obj.value = np.asarray(doc["value"], dtype=np.float64)
        obj.n_samples = np.asarray(doc["n_samples"], dtype=np.int32)
        return obj


def _check_fit_inputs(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ModelError("X must be a 2-D matrix")
    if X.shape[0] != y.shape[0]:
        raise ModelError("X and y row counts differ")
    if X.shape[0] == 0:
        raise ModelError("cannot fit on an empty dataset")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ModelError("X and y must be finite")
    return X, y


class _BaseTreeModel:
    """Shared prediction/serialization surface for the three families."""

    family = ""

    def __init__(self):
        self.trees: PackedTrees | None = None
        self.n_features_: int | None = None

    def _check_predict(self, X) -> np.ndarray:
        if self.trees is None:
            raise NotFittedError(f"{type(self).__name__} is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_:
            raise ModelError(
                f"feature width {X.shape[1]} does not match fit width {self.n_features_}")
        return X

    def get_params(self) -> dict:
        raise NotImplementedError

    def to_doc(self) -> dict:
        return {
            "family": self.family,
            "params": self.get_params(),
            "n_features": self.n_features_,
            "trees": self.trees.to_doc(),
            "extra": self._extra_state(),
        }

    def _extra_state(self) -> dict:
        return {}

    @staticmethod
    def from_doc(doc: dict) -> "_BaseTreeModel":
        family = doc["family"]
        cls = MODEL_FAMILIES[family]
        model = cls(**doc["params"])
        model.trees = PackedTrees.from_doc(doc["trees"])
        model.n_features_ = doc["n_features"]
        model._restore_state(doc.get("extra", {}))
        return model

    def _restore_state(self, extra: dict) -> None:
        pass


class ExtraTreesModel(_BaseTreeModel):
    """Averaged ensemble of fully grown randomized trees, no bootstrap."""

    family = "et"

    def __init__(self, n_estimators: int = 400, min_samples_split: int = 4,
                 min_samples_leaf: int = 2, max_features: int | None = None,
                 seed: int = 0, n_jobs: int = 1):
        super().__init__()
        if n_estimators < 1:
            raise ModelError("n_estimators must be >= 1")
        self.n_estimators = int(n_estimators)
        self.min_samples_split = int(min_samples_split)
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_features = max_features
        self.seed = int(seed)
        self.n_jobs = int(n_jobs)

    def get_params(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "seed": self.seed,
        }

    def fit(self, X, y) -> "ExtraTreesModel":
        X, y = _check_fit_inputs(X, y)
        order = _canonical_order(X, y)
        Xc, yc = X[order], y[order]
        self.n_features_ = X.shape[1]
        p = X.shape[1]
        k = p if self.max_features is None else self.max_features
        if k > p:
            warnings.warn(f"max_features={k} clamped to feature count {p}", stacklevel=2)
            k = p
        master = Rng(self.seed)

        def grow(i: int) -> TreeArrays:
            return _build_extra_tree(Xc, yc, master.derive("tree", i),
                                     self.min_samples_split,
                                     self.min_samples_leaf, k)

        if self.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
                trees = list(pool.map(grow, range(self.n_estimators)))
        else:
            trees = [grow(i) for i in range(self.n_estimators)]
        self.trees = PackedTrees(trees)
        return self

    def predict(self, X) -> np.ndarray:
        X = self._check_predict(X)
        return self.trees.leaf_values(X).mean(axis=1)


class GradientBoostingModel(_BaseTreeModel):
    """Classic stagewise boosting: each tree fits the current residuals,
    contributions shrunk by the learning rate."""

    family = "gb"

    def __init__(self, n_estimators: int = 500, learning_rate: float = 0.01,
                 min_samples_split: int = 2, min_samples_leaf: int = 6,
                 seed: int = 0, n_jobs: int = 1):
        super().__init__()
        self.n_estimators = int(n_estimators)
        self.learning_rate = float(learning_rate)
        self.min_samples_split = int(min_samples_split)
        self.min_samples_leaf = int(min_samples_leaf)
        self.seed = int(seed)
        self.n_jobs = int(n_jobs)  # stages are sequential; kept for interface parity
        self.base_prediction_: float | None = None

    def get_params(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "learning_rate": self.learning_rate,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "seed": self.seed,
        }

    def _extra_state(self) -> dict:
        return {"base_prediction": self.base_prediction_}

    def _restore_state(self, extra: dict) -> None:
        self.base_prediction_ = extra["base_prediction"]

    def fit(self, X, y) -> "GradientBoostingModel":
        X, y = _check_fit_inputs(X, y)
        if X.shape[0] < 2:
            raise ModelError("boosting needs at least 2 rows")
        order = _canonical_order(X, y)
        Xc, yc = X[order], y[order]
        self.n_features_ = X.shape[1]
        self.base_prediction_ = float(yc.mean())
        pred = np.full(yc.shape, self.base_prediction_)
        trees = []
        for _ in range(self.n_estimators):
            residual = yc - pred
            tree = _build_cart_tree(Xc, residual, self.min_samples_split,
                                    self.min_samples_leaf)
            trees.append(tree)
            pred += self.learning_rate * PackedTrees([tree]).leaf_values(Xc)[:, 0]
        self.trees = PackedTrees(trees)
        return self

    def predict(self, X, n_stages: int | None = None) -> np.ndarray:
        X = self._check_predict(X)
        return _staged_sum(self.trees, X, self.base_prediction_,
                           self.learning_rate, n_stages)


class RegularizedBoostingModel(_BaseTreeModel):
    """Second-order boosting for squared loss: split gain thresholded by
    gamma, leaf values -G/(H+lambda), per-stage row subsample and per-tree
    column subsample."""

    family = "xgb"

    def __init__(self, n_estimators: int = 300, learning_rate: float = 0.05,
                 gamma: float = 5.0, min_child_weight: float = 2.0,
                 subsample: float = 0.4, colsample_bytree: float = 1.0,
                 l2_leaf: float = 1.0, seed: int = 0, n_jobs: int = 1):
        super().__init__()
        if not (0.0 < subsample <= 1.0):
            raise ModelError("subsample must be in (0, 1]")
        if not (0.0 < colsample_bytree <= 1.0):
            raise ModelError("colsample_bytree must be in (0, 1]")
        self.n_estimators = int(n_estimators)
        self.learning_rate = float(learning_rate)
        self.gamma = float(gamma)
        self.min_child_weight = float(min_child_weight)
        self.subsample = float(subsample)
        self.colsample_bytree = float(colsample_bytree)
        self.l2_leaf = float(l2_leaf)
        self.seed = int(seed)
        self.n_jobs = int(n_jobs)
        self.base_prediction_: float | None = None

    def get_params(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "learning_rate": self.learning_rate,
            "gamma": self.gamma,
            "min_child_weight": self.min_child_weight,
            "subsample": self.subsample,
            "colsample_bytree": self.colsample_bytree,
            "l2_leaf": self.l2_leaf,
            "seed": self.seed,
        }

    def _extra_state(self) -> dict:
        return {"base_prediction": self.base_prediction_}

    def _restore_state(self, extra: dict) -> None:
        self.base_prediction_ = extra["base_prediction"]

    def fit(self, X, y) -> "RegularizedBoostingModel":
        X, y = _check_fit_inputs(X, y)
        n, p = X.shape
        if n < 2:
            raise ModelError("boosting needs at least 2 rows")
        order = _canonical_order(X, y)
        Xc, yc = X[order], y[order]
        self.n_features_ = p
        self.base_prediction_ = float(yc.mean())
        pred = np.full(yc.shape, self.base_prediction_)
        master = Rng(self.seed)
        n_rows = max(1, int(round(self.subsample * n)))
        n_cols = max(1, int(round(self.colsample_bytree * p)))
        trees = []
        for stage in range(self.n_estimators):
            rng = master.derive("stage", stage)
            rows = (np.arange(n, dtype=np.intp) if n_rows >= n
                    else rng.choice_without_replacement(n, n_rows))
            feats = (np.arange(p, dtype=np.intp) if n_cols >= p
                     else rng.choice_without_replacement(p, n_cols))
            grad = pred[rows] - yc[rows]
            tree = _build_gain_tree(Xc[rows], grad, feats, self.l2_leaf,
                                    self.gamma, self.min_child_weight)
            trees.append(tree)
            pred += self.learning_rate * PackedTrees([tree]).leaf_values(Xc)[:, 0]
        self.trees = PackedTrees(trees)
        return self

    def predict(self, X, n_stages: int | None = None) -> np.ndarray:
        X = self._check_predict(X)
        return _staged_sum(self.trees, X, self.base_prediction_,
                           self.learning_rate, n_stages)


def _staged_sum(trees: PackedTrees, X, base: float, lr: float,
                n_stages: int | None) -> np.ndarray:
    """base + lr*tree_1 + ... + lr*tree_k accumulated stage by stage, so
    the k-stage prediction is exactly the (k-1)-stage prediction plus the
    k-th contribution (the telescoping contract)."""
    k = trees.n_trees if n_stages is None else n_stages
    pred = np.full(X.shape[0], base)
    if k == 0:
        return pred
    vals = trees.leaf_values(X, n_trees=k)
    for t in range(k):
        pred = pred + lr * vals[:, t]
    return pred


class MeanModel:
    """Constant-mean baseline; useful as a floor in comparisons and as a
    degenerate stacking base."""

    family = "mean"

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.mean_: float | None = None
        self.n_features_: int | None = None

    def get_params(self) -> dict:
        return {"seed": self.seed}

    def fit(self, X, y) -> "MeanModel":
        X, y = _check_fit_inputs(X, y)
        self.mean_ = float(y.mean())
        self.n_features_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        if self.mean_ is None:
            raise NotFittedError("MeanModel is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_:
            raise ModelError(
                f"feature width {X.shape[1]} does not match fit width {self.n_features_}")
        return np.full(X.shape[0], self.mean_)

    def to_doc(self) -> dict:
        return {"family": "mean", "params": self.get_params(),
                "n_features": self.n_features_, "mean": self.mean_}


MODEL_FAMILIES = {
    "et": ExtraTreesModel,
    "gb": GradientBoostingModel,
    "xgb": RegularizedBoostingModel,
    "mean": MeanModel,
}


def model_from_doc(doc: dict):
    """Rebuild any fitted model from its serialized form."""
    if doc["family"] == "mean":
        model = MeanModel(**doc["params"])
        model.mean_ = doc["mean"]
        model.n_features_ = doc["n_features"]
        return model
    return _BaseTreeModel.from_doc(doc)


@dataclass(frozen=True)
class ModelConfig:
    """A model family plus its hyperparameters, the unit grid search and
    cross-validation work with."""

    family: str
    params: dict = field(default_factory=dict)

    def build(self, seed: int):
        if self.family not in MODEL_FAMILIES:
            raise ModelError(f"unknown model family {self.family!r}")
        return MODEL_FAMILIES[self.family](seed=seed, **self.params)


def fit_model(config: ModelConfig, X, y, seed: int):
    """Construct and fit a model for the given config."""
    model = config.build(seed)
    return model.fit(X, y)


def fit_extra_trees(X, y, seed: int = 0, **params) -> ExtraTreesModel:
    return ExtraTreesModel(seed=seed, **params).fit(X, y)


def fit_gradient_boosting(X, y, seed: int = 0, **params) -> GradientBoostingModel:
    return GradientBoostingModel(seed=seed, **params).fit(X, y)


def fit_regularized_boosting(X, y, seed: int = 0, **params) -> RegularizedBoostingModel:
    return RegularizedBoostingModel(seed=seed, **params).fit(X, y)

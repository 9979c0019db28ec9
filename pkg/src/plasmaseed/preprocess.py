"""Fit-on-train-only preprocessing.

Stage order is fixed: per-feature Yeo-Johnson power transform (maximum
likelihood lambda), degree-2 polynomial expansion of the three discharge
drivers (computed on the transformed base features), then standardization
of every output column. Each stage can be disabled for ablation runs.
Also houses the Shapiro-Wilk normality diagnostic used to check that the
power transform actually improved normality.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .errors import ConfigError, DataValidationError, NotFittedError

POLY_BASE_FEATURES = ("power_w", "plasma_time_s", "voltage_kv")

# Columns that are one-hot indicators keep their 0/1 coding through the
# power transform stage (standardization still applies to them).
INDICATOR_PREFIX = "gas_"

LAMBDA_SEARCH_RANGE = (-5.0, 5.0)
LAMBDA_GRID_STEP = 0.01


class ConstantColumnWarning(UserWarning):
    """A column had zero variance; the transform fell back to identity."""


def yeo_johnson(x, lam: float):
    """Yeo-Johnson transform, vectorized over x.

    x >= 0: ((x+1)^lam - 1)/lam, or ln(x+1) when lam == 0.
    x <  0: -(((-x+1)^(2-lam) - 1)/(2-lam)), or -ln(-x+1) when lam == 2.
    Strictly increasing in x for every lam, and maps 0 to 0.
    """
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    if lam == 0.0:
        out[pos] = np.log1p(arr[pos])
    else:
        out[pos] = (np.power(arr[pos] + 1.0, lam) - 1.0) / lam
    neg = ~pos
    if neg.any():
        if lam == 2.0:
            out[neg] = -np.log1p(-arr[neg])
        else:
            out[neg] = -(np.power(-arr[neg] + 1.0, 2.0 - lam) - 1.0) / (2.0 - lam)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def yeo_johnson_log_likelihood(column: np.ndarray, lam: float) -> float:
    """Profile log-likelihood: Gaussian fit of the transformed data plus
    the log-Jacobian of the transform."""
    z = yeo_johnson(column, lam)
    var = float(np.var(z))
    if var <= 0.0:
        return -math.inf
    n = column.size
    jacobian = (lam - 1.0) * float(np.sum(np.sign(column) * np.log1p(np.abs(column))))
    return -0.5 * n * math.log(var) + jacobian


def fit_yeo_johnson(column: np.ndarray) -> float:
    """Maximum-likelihood lambda over [-5, 5].

    Dense grid (step 0.01) followed by golden-section refinement around the
    best grid point; the profile likelihood is unimodal in practice. A
    constant column gets lambda = 1 (identity) with a warning.
    """
    column = np.asarray(column, dtype=np.float64)
    finite = column[np.isfinite(column)]
    if finite.size < 3:
        raise DataValidationError("need at least 3 finite values to fit lambda")
    if np.ptp(finite) == 0.0:
        # var() can land a few ulps above zero on repeated non-dyadic values
        warnings.warn("constant column, using identity lambda=1",
                      ConstantColumnWarning, stacklevel=2)
        return 1.0

    lo, hi = LAMBDA_SEARCH_RANGE
    grid = np.arange(lo, hi + LAMBDA_GRID_STEP / 2, LAMBDA_GRID_STEP)
    scores = [yeo_johnson_log_likelihood(finite, lam) for lam in grid]
    best = int(np.argmax(scores))

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    return _golden_section_max(
        lambda lam: yeo_johnson_log_likelihood(finite, lam), a, b)


def _golden_section_max(f, a: float, b: float, tol: float = 1e-8) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def shapiro_wilk_w(sample: np.ndarray) -> float:
    """Shapiro-Wilk W statistic via the standard large-sample approximation
    (normal scores with polynomial-corrected extreme weights), valid for
    3 <= n <= 5000. W near 1 indicates normality.
    """
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n < 3 or n > 5000:
        raise DataValidationError(f"Shapiro-Wilk needs 3 <= n <= 5000, got {n}")
    sse = float(np.sum((x - x.mean()) ** 2))
    if np.ptp(x) == 0.0 or sse <= 0.0:
        raise DataValidationError("Shapiro-Wilk undefined for zero-variance sample")

    inv_cdf = NormalDist().inv_cdf
    m = np.array([inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    msq = float(np.dot(m, m))

    a = np.empty(n)
    if n == 3:
        a[0], a[1], a[2] = -math.sqrt(0.5), 0.0, math.sqrt(0.5)
    else:
        u = 1.0 / math.sqrt(n)
        c = m / math.sqrt(msq)
        a_n = (c[-1] + 0.221157 * u - 0.147981 * u ** 2 - 2.071190 * u ** 3
               + 4.434685 * u ** 4 - 2.706056 * u ** 5)
        if n <= 5:
            phi = (msq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n ** 2)
            a[1:-1] = m[1:-1] / math.sqrt(phi)
        else:
            a_n1 = (c[-2] + 0.042981 * u - 0.293762 * u ** 2 - 1.752461 * u ** 3
                    + 5.682633 * u ** 4 - 3.582633 * u ** 5)
            phi = ((msq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2)
                   / (1.0 - 2.0 * a_n ** 2 - 2.0 * a_n1 ** 2))
            a[2:-2] = m[2:-2] / math.sqrt(phi)
            a[-2], a[1] = a_n1, -a_n1
        a[-1], a[0] = a_n, -a_n

    w = float(np.dot(a, x)) ** 2 / sse
    return min(w, 1.0)


def expand_polynomial(power: np.ndarray, time: np.ndarray, voltage: np.ndarray) -> np.ndarray:
    """Degree-2 terms of the discharge drivers, fixed order:
    P^2, t^2, V^2, P*t, V*t, P*V."""
    p = np.asarray(power, dtype=np.float64)
    t = np.asarray(time, dtype=np.float64)
    v = np.asarray(voltage, dtype=np.float64)
    return np.column_stack([p * p, t * t, v * v, p * t, v * t, p * v])


def standardize(x, mean: float, std: float):
    """(x - mean)/std; a zero-spread column maps to 0 instead of dividing."""
    if std == 0.0:
        return np.zeros_like(np.asarray(x, dtype=np.float64)) if np.ndim(x) else 0.0
    return (np.asarray(x, dtype=np.float64) - mean) / std


@dataclass(frozen=True)
class StageFlags:
    """Which preprocessing stages are active (ablation support)."""

    yeo_johnson: bool = True
    polynomial: bool = True
    standardize: bool = True

    @classmethod
    def none(cls) -> "StageFlags":
        return cls(False, False, False)


@dataclass(frozen=True)
class PolySpec:
    base_features: tuple[str, ...] = POLY_BASE_FEATURES

    @property
    def term_names(self) -> tuple[str, ...]:
        p, t, v = self.base_features
        return (f"{p}^2", f"{t}^2", f"{v}^2", f"{p}*{t}", f"{v}*{t}", f"{p}*{v}")


@dataclass
class FittedPipeline:
    """Frozen preprocessing state: the unit of persistence and serving.

    Fit only ever sees the training partition; apply is pure and safe to
    share across workers.
    """

    stages: StageFlags
    feature_names_in: tuple[str, ...]
    feature_names_out: tuple[str, ...]
    lambdas: dict = field(default_factory=dict)   # feature name -> lambda
    poly: PolySpec = PolySpec()
    means: np.ndarray | None = None
    stds: np.ndarray | None = None
    fitted: bool = False

    def transform(self, X: np.ndarray) -> np.ndarray:
        if not self.fitted:
            raise NotFittedError("pipeline has not been fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != len(self.feature_names_in):
            raise DataValidationError(
                f"expected {len(self.feature_names_in)} input columns, got {X.shape[1]}")
        cols = {name: X[:, j].copy() for j, name in enumerate(self.feature_names_in)}
        if self.stages.yeo_johnson:
            for name, lam in self.lambdas.items():
                cols[name] = yeo_johnson(cols[name], lam)
        out = [cols[name] for name in self.feature_names_in]
        if self.stages.polynomial:
            p, t, v = (cols[b] for b in self.poly.base_features)
            terms = expand_polynomial(p, t, v)
            out.extend(terms[:, k] for k in range(terms.shape[1]))
        Z = np.column_stack(out)
        if self.stages.standardize:
            sd = np.where(self.stds == 0.0, 1.0, self.stds)
            Z = (Z - self.means) / sd
            Z[:, self.stds == 0.0] = 0.0
        return Z

    def to_doc(self) -> dict:
        return {
            "version": 1,
            "stages": {
                "yeo_johnson": self.stages.yeo_johnson,
                "polynomial": self.stages.polynomial,
                "standardize": self.stages.standardize,
            },
            "feature_names_in": list(self.feature_names_in),
            "feature_names_out": list(self.feature_names_out),
            "lambdas": dict(self.lambdas),
            "poly_base_features": list(self.poly.base_features),
            "means": None if self.means is None else [float(v) for v in self.means],
            "stds": None if self.stds is None else [float(v) for v in self.stds],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FittedPipeline":
        if doc.get("version") != 1:
            raise ConfigError(f"unsupported pipeline document version {doc.get('version')!r}")
        stages = StageFlags(**doc["stages"])
        return cls(
            stages=stages,
            feature_names_in=tuple(doc["feature_names_in"]),
            feature_names_out=tuple(doc["feature_names_out"]),
            lambdas={k: float(v) for k, v in doc["lambdas"].items()},
            poly=PolySpec(tuple(doc["poly_base_features"])),
            means=None if doc["means"] is None else np.asarray(doc["means"]),
            stds=None if doc["stds"] is None else np.asarray(doc["stds"]),
            fitted=True,
        )


def fit_pipeline(X_train: np.ndarray, feature_names: tuple[str, ...],
                 stages: StageFlags = StageFlags()) -> FittedPipeline:
    """Fit all enabled stages on the training matrix only."""
    X = np.asarray(X_train, dtype=np.float64)
    names = tuple(feature_names)
    if X.ndim != 2 or X.shape[1] != len(names):
        raise DataValidationError("feature matrix width does not match names")

    poly = PolySpec()
    if stages.polynomial:
        for base in poly.base_features:
            if base not in names:
                raise DataValidationError(
                    f"polynomial stage needs feature {base!r} in the schema")

    lambdas: dict[str, float] = {}
    cols = {name: X[:, j].copy() for j, name in enumerate(names)}
    if stages.yeo_johnson:
        for name in names:
            if name.startswith(INDICATOR_PREFIX):
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConstantColumnWarning)
                lambdas[name] = float(fit_yeo_johnson(cols[name]))
            cols[name] = yeo_johnson(cols[name], lambdas[name])

    out_cols = [cols[name] for name in names]
    out_names = list(names)
    if stages.polynomial:
        p, t, v = (cols[b] for b in poly.base_features)
        terms = expand_polynomial(p, t, v)
        out_cols.extend(terms[:, k] for k in range(terms.shape[1]))
        out_names.extend(poly.term_names)
    Z = np.column_stack(out_cols)

    means = Z.mean(axis=0) if stages.standardize else None
    stds = Z.std(axis=0) if stages.standardize else None  # population sigma
    if stds is not None:
        # snap ulp-level sigma on constant columns to the exact-zero guard
        stds[np.ptp(Z, axis=0) == 0.0] = 0.0

    return FittedPipeline(
        stages=stages,
        feature_names_in=names,
        feature_names_out=tuple(out_names),
        lambdas=lambdas,
        poly=poly,
        means=means,
        stds=stds,
        fitted=True,
    )


def apply_pipeline(pipeline: FittedPipeline, X: np.ndarray) -> np.ndarray:
    return pipeline.transform(X)

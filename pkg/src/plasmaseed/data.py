"""Dataset loading, validation, target construction, imputation, encoding, splitting.

The cross-crop germination table is a plain CSV (UTF-8, comma separated,
header row). Canonical column names are listed in `DEFAULT_SCHEMA` and
documented in docs/schema.md. Empty cells and "NA" are treated as missing.
Datasets are immutable column stores; every operation returns a new value.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DataValidationError,
    DomainError,
    ParseError,
    SchemaError,
    UnimputableColumnError,
)
from .rng import Rng

GAS_LABELS = ("Ar", "He", "O2", "air")

# Numeric feature columns in canonical order: seed traits, discharge
# parameters, growth environment.
NUMERIC_FEATURES = (
    "seed_size_mm",
    "seed_weight_g",
    "baseline_sod",
    "baseline_germination_pct",
    "germination_potential_pct",
    "germination_index",
    "germination_days",
    "plate_length_cm",
    "plate_width_cm",
    "plate_thickness_cm",
    "plasma_temp_c",
    "electrode_distance_cm",
    "voltage_kv",
    "frequency_khz",
    "power_w",
    "pressure_kpa",
    "gas_flow_lpm",
    "plasma_time_s",
    "growing_temp_c",
    "water_per_seed",
)

LABEL_COLUMNS = ("species", "cultivar", "gas_type")
TARGET_COLUMN = "uplift_pct"
TREATED_COLUMN = "treated_germination_pct"
BASELINE_COLUMN = "baseline_germination_pct"

# Columns that must be non-negative by physics.
_NON_NEGATIVE = ("plasma_time_s", "power_w", "voltage_kv", "frequency_khz")

MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class FeatureSchema:
    """Column names and admissible categorical labels for the input CSV."""

    numeric: tuple[str, ...] = NUMERIC_FEATURES
    labels: tuple[str, ...] = LABEL_COLUMNS
    target: str = TARGET_COLUMN
    treated: str = TREATED_COLUMN
    gas_labels: tuple[str, ...] = GAS_LABELS

    def all_columns(self) -> tuple[str, ...]:
        return self.labels + self.numeric + (self.treated, self.target)


DEFAULT_SCHEMA = FeatureSchema()


@dataclass(frozen=True)
class SeedRecord:
    """One experimental observation in raw units."""

    species: str
    cultivar: str
    gas_type: str
    values: dict  # numeric column -> float (NaN when missing)
    uplift_pct: float

    def __getitem__(self, key: str) -> float:
        return self.values[key]


@dataclass(frozen=True)
class Dataset:
    """Immutable column store for seed/plasma records.

    `columns` holds every numeric column (including the target) as float64
    with NaN as the missing marker; label columns are tuples of strings.
    After `encode_features` the model matrix and its column names are
    attached; species/cultivar stay as grouping labels only.
    """

    columns: dict
    species: tuple[str, ...]
    cultivar: tuple[str, ...]
    gas_type: tuple[str, ...]
    fingerprint: str = ""
    missing_counts: dict = field(default_factory=dict)
    feature_names: tuple[str, ...] = ()
    features: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return len(self.species)

    @property
    def y(self) -> np.ndarray:
        return self.columns[TARGET_COLUMN]

    def record(self, i: int) -> SeedRecord:
        values = {name: float(col[i]) for name, col in self.columns.items()
                  if name != TARGET_COLUMN}
        return SeedRecord(self.species[i], self.cultivar[i], self.gas_type[i],
                          values, float(self.y[i]))

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        columns = {k: _frozen(v[idx]) for k, v in self.columns.items()}
        return replace(
            self,
            columns=columns,
            species=tuple(self.species[i] for i in idx),
            cultivar=tuple(self.cultivar[i] for i in idx),
            gas_type=tuple(self.gas_type[i] for i in idx),
            features=None if self.features is None else _frozen(self.features[idx]),
        )


@dataclass(frozen=True)
class SplitIndices:
    train: tuple[int, ...]
    test: tuple[int, ...]
    seed: int
    ratio: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _parse_cell(text: str, row: int, column: str) -> float:
    text = text.strip()
    if text in MISSING_TOKENS:
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column}: cannot parse {text!r} as a number",
            row=row, column=column,
        ) from None


def compute_uplift(treated: float, baseline: float) -> float:
    """Germination uplift: treated minus baseline rate, both percentages.

    Negative results are meaningful (treatment can reduce germination).
    """
    for name, value in (("treated", treated), ("baseline", baseline)):
        if not (0.0 <= value <= 100.0):
            raise DomainError(f"{name} germination rate {value} outside [0, 100]")
    return treated - baseline


def load_csv(path: str | Path, schema: FeatureSchema = DEFAULT_SCHEMA) -> Dataset:
    """Load and validate a germination CSV.

    Raises SchemaError for unknown or missing columns, ParseError for
    malformed numbers (with 1-based data row numbers), DataValidationError
    for bad labels, out-of-range percentages, and target inconsistencies.
    The target column may be absent if it can be derived from treated and
    baseline germination rates.
    """
    path = Path(path)
    raw = path.read_bytes()
    fingerprint = hashlib.sha256(raw).hexdigest()

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        known = set(schema.all_columns())
        for col in header:
            if col not in known:
                raise SchemaError(f"unknown column {col!r}")
        seen = set(header)
        required = set(schema.labels) | set(schema.numeric)
        for col in sorted(required - seen):
            raise SchemaError(f"missing required column {col!r}")
        has_target = schema.target in seen
        has_treated = schema.treated in seen
        if not has_target and not has_treated:
            raise SchemaError(
                f"need either {schema.target!r} or {schema.treated!r} to build the target")

        col_pos = {c: i for i, c in enumerate(header)}
        labels: dict[str, list[str]] = {c: [] for c in schema.labels}
        numeric: dict[str, list[float]] = {c: [] for c in schema.numeric}
        treated_vals: list[float] = []
        target_vals: list[float] = []

        for row_num, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"row {row_num}: expected {len(header)} cells, got {len(row)}",
                    row=row_num)
            for c in schema.labels:
                labels[c].append(row[col_pos[c]].strip())
            for c in schema.numeric:
                numeric[c].append(_parse_cell(row[col_pos[c]], row_num, c))
            treated_vals.append(
                _parse_cell(row[col_pos[schema.treated]], row_num, schema.treated)
                if has_treated else math.nan)
            target_vals.append(
                _parse_cell(row[col_pos[schema.target]], row_num, schema.target)
                if has_target else math.nan)

    n = len(target_vals)
    if n == 0:
        raise DataValidationError(f"{path}: no data rows")

    for i, gas in enumerate(labels["gas_type"], start=1):
        if gas not in schema.gas_labels:
            raise DataValidationError(
                f"row {i}: unknown gas_type {gas!r}, expected one of {schema.gas_labels}")
    for c in ("species", "cultivar"):
        for i, v in enumerate(labels[c], start=1):
            if not v:
                raise DataValidationError(f"row {i}: empty {c} label")

    columns = {c: np.asarray(v, dtype=np.float64) for c, v in numeric.items()}
    treated = np.asarray(treated_vals, dtype=np.float64)
    target = np.asarray(target_vals, dtype=np.float64)

    for c in (BASELINE_COLUMN,):
        bad = np.where((columns[c] < 0) | (columns[c] > 100))[0]
        if bad.size:
            raise DataValidationError(
                f"row {bad[0] + 1}: {c} = {columns[c][bad[0]]} outside [0, 100]")
    bad = np.where((treated < 0) | (treated > 100))[0]
    if bad.size:
        raise DataValidationError(
            f"row {bad[0] + 1}: {TREATED_COLUMN} = {treated[bad[0]]} outside [0, 100]")
    for c in _NON_NEGATIVE:
        bad = np.where(columns[c] < 0)[0]
        if bad.size:
            raise DataValidationError(
                f"row {bad[0] + 1}: {c} = {columns[c][bad[0]]} must be non-negative")

    # Target construction: derive where absent, verify exactness where both
    # sources are present.
    baseline = columns[BASELINE_COLUMN]
    both = ~np.isnan(treated) & ~np.isnan(baseline)
    derived = treated - baseline
    have_target = ~np.isnan(target)
    mismatch = np.where(both & have_target & (target != derived))[0]
    if mismatch.size:
        i = mismatch[0]
        raise DataValidationError(
            f"row {i + 1}: {TARGET_COLUMN} = {target[i]} does not equal "
            f"treated - baseline = {derived[i]}")
    target = np.where(have_target, target, derived)
    still_missing = np.where(np.isnan(target))[0]
    if still_missing.size:
        raise DataValidationError(
            f"row {still_missing[0] + 1}: target is missing and cannot be derived")

    columns[TREATED_COLUMN] = treated
    columns[TARGET_COLUMN] = target
    missing_counts = {c: int(np.isnan(columns[c]).sum()) for c in schema.numeric}

    return Dataset(
        columns={k: _frozen(v) for k, v in columns.items()},
        species=tuple(labels["species"]),
        cultivar=tuple(labels["cultivar"]),
        gas_type=tuple(labels["gas_type"]),
        fingerprint=fingerprint,
        missing_counts=missing_counts,
    )


def write_csv(ds: Dataset, path: str | Path,
              schema: FeatureSchema = DEFAULT_SCHEMA) -> Path:
    """Write a dataset back out in the canonical column order.

    Floats are written with repr so a load round-trips bit-exactly;
    missing cells become "NA".
    """
    path = Path(path)
    ordered = schema.all_columns()
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ordered)
        labels = {"species": ds.species, "cultivar": ds.cultivar,
                  "gas_type": ds.gas_type}
        for i in range(ds.n_rows):
            row = []
            for col in ordered:
                if col in labels:
                    row.append(labels[col][i])
                else:
                    value = float(ds.columns[col][i])
                    row.append("NA" if math.isnan(value) else repr(value))
            writer.writerow(row)
    return path


def impute_within_species(ds: Dataset, schema: FeatureSchema = DEFAULT_SCHEMA) -> Dataset:
    """Replace missing numeric cells by within-species means.

    A species with no observed value for a column falls back to the global
    column mean. A column with no observed value anywhere is unimputable.
    Observed cells are never changed, so the operation is idempotent.
    """
    species = np.asarray(ds.species)
    out = {}
    for name, col in ds.columns.items():
        if name in (TARGET_COLUMN, TREATED_COLUMN):
            # target is always present after load; treated is a source
            # column, filling it in would fabricate measurements
            out[name] = col
            continue
        missing = np.isnan(col)
        if not missing.any():
            out[name] = col
            continue
        if missing.all():
            raise UnimputableColumnError(
                f"column {name!r} has no observed values to impute from")
        global_mean = float(np.nanmean(col))
        filled = col.copy()
        for sp in dict.fromkeys(ds.species):  # first-appearance order
            mask = (species == sp) & missing
            if not mask.any():
                continue
            observed = col[(species == sp) & ~missing]
            fill = float(observed.mean()) if observed.size else global_mean
            filled[mask] = fill
        out[name] = _frozen(filled)
    return replace(ds, columns=out, features=None, feature_names=())


def encode_features(ds: Dataset, schema: FeatureSchema = DEFAULT_SCHEMA) -> Dataset:
    """Attach the numeric model matrix: numeric traits plus one-hot gas type.

    Species and cultivar stay out of the matrix; they are grouping labels
    for imputation and per-group evaluation only.
    """
    cols = [ds.columns[c] for c in schema.numeric]
    names = list(schema.numeric)
    gas = np.asarray(ds.gas_type)
    for label in schema.gas_labels:
        cols.append((gas == label).astype(np.float64))
        names.append(f"gas_{label}")
    X = np.column_stack(cols)
    return replace(ds, features=_frozen(X), feature_names=tuple(names))


def decode_gas(ds: Dataset, schema: FeatureSchema = DEFAULT_SCHEMA) -> tuple[str, ...]:
    """Recover gas labels from the one-hot block (encoding round-trip)."""
    if ds.features is None:
        raise DataValidationError("dataset has no encoded features")
    idx = [ds.feature_names.index(f"gas_{g}") for g in schema.gas_labels]
    block = ds.features[:, idx]
    return tuple(schema.gas_labels[int(i)] for i in np.argmax(block, axis=1))


def train_test_split(ds: Dataset, ratio: float, seed: int,
                     stratify_by_species: bool = False) -> SplitIndices:
    """Deterministic shuffled split; |train| = round(ratio * n).

    The shuffle is a Fisher-Yates pass keyed by the 64-bit seed, so the
    same (dataset, ratio, seed) always yields the same membership. Indices
    within each partition are ascending.
    """
    n = ds.n_rows
    if not (0.0 < ratio < 1.0):
        raise DomainError(f"split ratio {ratio} outside (0, 1)")
    if n < 2:
        raise DataValidationError("need at least 2 rows to split")

    def _cut(indices: list[int], rng: Rng, r: float) -> tuple[list[int], list[int]]:
        rng.shuffle(indices)
        k = int(math.floor(r * len(indices) + 0.5))  # round half up
        return indices[:k], indices[k:]

    if stratify_by_species:
        train: list[int] = []
        test: list[int] = []
        rng = Rng(seed)
        for sp in dict.fromkeys(ds.species):
            group = [i for i, s in enumerate(ds.species) if s == sp]
            tr, te = _cut(group, rng.derive("species", sp), ratio)
            train.extend(tr)
            test.extend(te)
    else:
        train, test = _cut(list(range(n)), Rng(seed), ratio)

    if not train or not test:
        raise DataValidationError(
            f"ratio {ratio} with n={n} leaves an empty partition")
    return SplitIndices(tuple(sorted(train)), tuple(sorted(test)), seed, ratio)


def kfold_indices(n: int, k: int, rng: Rng) -> list[np.ndarray]:
    """Partition range(n) into k near-equal validation folds.

    Same Fisher-Yates shuffler as train_test_split; the first n % k folds
    take the extra row (n=196, k=5 -> sizes 40,39,39,39,39). Each fold is
    returned ascending.
    """
    if k < 2:
        raise DataValidationError(f"need at least 2 folds, got {k}")
    if n < k:
        raise DataValidationError(f"cannot make {k} folds from {n} rows")
    order = rng.permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        folds.append(np.sort(order[start:start + size]))
        start += size
    return folds

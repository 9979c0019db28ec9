"""Shared fixtures: small full-schema datasets with a known signal."""

import numpy as np
import pytest

from plasmaseed.data import Dataset, GAS_LABELS, NUMERIC_FEATURES

_SPECIES = ("Glycine max", "Raphanus sativus", "Triticum aestivum")


def build_dataset(n: int = 120, seed: int = 0, n_cultivars: int = 6,
                  missing: dict | None = None) -> Dataset:
    """Synthetic dataset over the full CSV schema.

    Uplift responds to voltage (bell around 11 kV), plasma time (bell
    around 350 s), and power (saturating), plus a small cultivar offset.
    `missing` maps column name -> count of NaN cells to plant.
    """
    rng = np.random.default_rng(seed)
    cultivars = tuple(f"cv{i}" for i in range(n_cultivars))
    cult_idx = rng.integers(0, n_cultivars, n)
    cultivar = tuple(cultivars[i] for i in cult_idx)
    species = tuple(_SPECIES[i % len(_SPECIES)] for i in cult_idx)
    gas = tuple(GAS_LABELS[i] for i in rng.integers(0, len(GAS_LABELS), n))

    cols = {
        "seed_size_mm": rng.uniform(2, 9, n),
        "seed_weight_g": rng.uniform(0.02, 0.3, n),
        "baseline_sod": rng.uniform(10, 60, n),
        "baseline_germination_pct": rng.uniform(40, 80, n),
        "germination_potential_pct": rng.uniform(50, 90, n),
        "germination_index": rng.uniform(5, 30, n),
        "germination_days": rng.uniform(3, 10, n),
        "plate_length_cm": rng.uniform(8, 14, n),
        "plate_width_cm": rng.uniform(8, 14, n),
        "plate_thickness_cm": rng.uniform(0.5, 2, n),
        "plasma_temp_c": rng.uniform(20, 45, n),
        "electrode_distance_cm": rng.uniform(0.5, 4, n),
        "voltage_kv": rng.uniform(5, 25, n),
        "frequency_khz": rng.uniform(5, 50, n),
        "power_w": rng.uniform(40, 200, n),
        "pressure_kpa": rng.uniform(90, 110, n),
        "gas_flow_lpm": rng.uniform(0.5, 5, n),
        "plasma_time_s": rng.uniform(60, 900, n),
        "growing_temp_c": rng.uniform(18, 30, n),
        "water_per_seed": rng.uniform(0.5, 3, n),
    }
    v, t, p = cols["voltage_kv"], cols["plasma_time_s"], cols["power_w"]
    uplift = (8.0 * np.exp(-(((v - 11.0) / 4.0) ** 2))
              + 6.0 * np.exp(-(((t - 350.0) / 150.0) ** 2))
              + 4.0 * (1.0 - np.exp(-p / 80.0))
              + 0.4 * cult_idx
              + rng.normal(0, 0.5, n))
    treated = np.clip(cols["baseline_germination_pct"] + uplift, 0, 100)
    cols["treated_germination_pct"] = treated
    # store the recomputed difference so treated - baseline is bit-exact
    cols["uplift_pct"] = treated - cols["baseline_germination_pct"]

    if missing:
        for name, count in missing.items():
            col = cols[name].copy()
            col[rng.choice(n, count, replace=False)] = np.nan
            cols[name] = col

    assert set(NUMERIC_FEATURES) <= set(cols)
    return Dataset(columns={k: np.asarray(v, dtype=np.float64)
                            for k, v in cols.items()},
                   species=species, cultivar=cultivar, gas_type=gas,
                   fingerprint=f"synthetic-fixture-{seed}")


@pytest.fixture(scope="session")
def dataset_factory():
    return build_dataset


@pytest.fixture(scope="session")
def small_dataset():
    return build_dataset(n=120, seed=0)

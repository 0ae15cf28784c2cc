import numpy as np
import pandas as pd
import pytest

from mdrobustness.checks_loaders_and_exporters.checks import FEATURE_TABLE_COLUMNS
from mdrobustness.signal_chain.features import FEATURE_NAMES
from mdrobustness.signal_chain.ingest import synth_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """Six measurements per class, enough for a 20% holdout and five folds."""
    return synth_dataset(6, seed=42)


def make_feature_table(labels: dict, values: dict | None = None, seed: int = 0) -> pd.DataFrame:
    """
    Feature table with random descriptor values, overridden column by column
    from ``values``.
    """
    rng = np.random.default_rng(seed)
    ids = sorted(labels)
    table = pd.DataFrame(
        {
            "measurement_id": ids,
            "label": [labels[i] for i in ids],
            "noise_mode": "raw",
            "noise_param": "",
        }
    )
    for name in FEATURE_NAMES:
        table[name] = rng.uniform(0.1, 0.9, len(ids))
    for name, column in (values or {}).items():
        table[name] = np.asarray(column, dtype=np.float64)
    table["flags"] = ""
    return table[list(FEATURE_TABLE_COLUMNS)]


@pytest.fixture
def balanced_labels():
    return {f"{c}_{i:02d}": c for c in ("bird", "drone", "reflector") for i in range(10)}


@pytest.fixture
def make_table():
    return make_feature_table

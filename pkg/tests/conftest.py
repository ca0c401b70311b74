import json

import numpy as np
import pandas as pd
import pytest

from dataio.dataset import Dataset

TOY_X = [0.0, 0.1, 5.0, 5.1]


def toy_dataset(sens=None) -> Dataset:
    """The four-point 1-D example, optionally with one binary sensitive column."""
    num = np.array(TOY_X).reshape(-1, 1)
    return Dataset.from_arrays(num=num, sens=None if sens is None else np.array(sens).reshape(-1, 1))


def random_mixed(
    rng: np.random.Generator,
    n: int | None = None,
    max_numeric: int = 4,
    max_categorical: int = 3,
    max_categories: int = 5,
    n_attributes: int | None = None,
    labels: bool = False,
) -> Dataset:
    """Small random dataset with numerical, categorical and sensitive columns."""
    n = n if n is not None else int(rng.integers(2, 31))
    d_n = int(rng.integers(0, max_numeric + 1))
    d_c = int(rng.integers(0 if d_n else 1, max_categorical + 1))
    u = n_attributes if n_attributes is not None else int(rng.integers(0, 3))
    # a coarse grid makes duplicate values and exact ties common
    num = rng.integers(0, 6, size=(n, d_n)) * 0.5 if rng.random() < 0.5 else rng.normal(size=(n, d_n))
    cat = np.column_stack([rng.integers(0, int(rng.integers(1, max_categories + 1)), size=n) for _ in range(d_c)]) if d_c else None
    sens = np.column_stack([rng.integers(0, int(rng.integers(2, 4)), size=n) for _ in range(u)]) if u else None
    return Dataset.from_arrays(
        num=num if d_n else None,
        cat=cat,
        sens=sens,
        labels=rng.integers(0, 3, size=n) if labels else None,
    )


@pytest.fixture
def toy():
    return toy_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def write_table(tmp_path):
    """Write a CSV (from a dict of columns or raw text) and its schema; returns both paths."""

    def _write(columns, schema: dict[str, str], name: str = "data"):
        csv_path = tmp_path / f"{name}.csv"
        if isinstance(columns, str):
            csv_path.write_text(columns, encoding="utf-8")
        else:
            pd.DataFrame(columns).to_csv(csv_path, index=False)
        schema_path = tmp_path / f"{name}.schema.json"
        schema_path.write_text(json.dumps(schema), encoding="utf-8")
        return csv_path, schema_path

    return _write

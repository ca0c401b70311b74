import logging
import os
import sys

import numpy as np
import pandas as pd

from clustering.tree import ClusteringTree
from dataio.dataset import Dataset, read_table
from utils.errors import DataError, RoutingError
from utils.pathfinder import output_path

logger = logging.getLogger(__name__)

CLUSTER_COLUMN = "cluster"


def predict_batch(model: ClusteringTree, csv_path: str | os.PathLike, permissive: bool = False) -> pd.DataFrame:
    """
    Route every row of a CSV file through the tree.

    Returns the input rows with a trailing `cluster` column.
    """
    try:
        with open(csv_path, "rb") as f:
            raw = f.read()
    except FileNotFoundError:
        raise DataError(f"data file not found: {csv_path}") from None
    frame = read_table(raw, source=str(csv_path))
    clusters = model.predict_frame(frame, permissive=permissive)
    if CLUSTER_COLUMN in frame.columns:
        logger.warning("Input already has a '%s' column; it is replaced", CLUSTER_COLUMN)
        frame = frame.drop(columns=[CLUSTER_COLUMN])
    frame[CLUSTER_COLUMN] = clusters
    return frame


def encode_dataset(model: ClusteringTree, ds: Dataset, permissive: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """
    Feature arrays of a dataset loaded independently of the model, laid out
    and scaled the way the tree routes them.

    Columns are matched by name and category ids are translated through their
    tokens, since a fresh load numbers categories by its own first appearance.
    """
    fs = model.features
    num_pos = {name: i for i, name in enumerate(ds.features.num_names)}
    cat_pos = {name: i for i, name in enumerate(ds.features.cat_names)}
    missing = [c for c in fs.num_names if c not in num_pos] + [c for c in fs.cat_names if c not in cat_pos]
    if missing:
        raise RoutingError(f"missing feature column(s): {', '.join(missing)}")
    num = ds.num[:, [num_pos[name] for name in fs.num_names]] if fs.num_names else np.empty((ds.n, 0))
    cat = np.empty((ds.n, len(fs.cat_names)), dtype=np.int64)
    for j, name in enumerate(fs.cat_names):
        source = cat_pos[name]
        lookup = {token: i for i, token in enumerate(fs.cat_tokens[j])}
        table = np.array([lookup.get(token, -1) for token in ds.features.cat_tokens[source]], dtype=np.int64)
        codes = table[ds.cat[:, source]]
        unknown = codes < 0
        if unknown.any() and not permissive:
            row = int(np.flatnonzero(unknown)[0])
            token = ds.features.cat_tokens[source][ds.cat[row, source]]
            raise RoutingError(f"unknown category '{token}'", row=row, column=name)
        cat[:, j] = codes
    return fs.to_model_units(num), cat


def assign_dataset(model: ClusteringTree, ds: Dataset, permissive: bool = False) -> np.ndarray:
    """Cluster id per sample of a dataset loaded independently of the model."""
    return model.assign(*encode_dataset(model, ds, permissive))


def write_predictions(frame: pd.DataFrame, out: str | os.PathLike | None = None) -> None:
    if out is None:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")
    else:
        frame.to_csv(output_path(out), index=False, lineterminator="\n")

"""
Synthetic benchmark data: 2-D Gaussian blobs with a random binary sensitive
attribute drawn independently per sample, the usual protocol for clustering
benchmarks that ship without protected groups.
"""

import hashlib
import os
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.datasets import make_blobs

from dataio.dataset import Dataset, FeatureSpace
from dataio.schema import Role, Schema, save_schema
from utils.errors import ConfigError
from utils.pathfinder import output_path

NUM_NAMES = ("x0", "x1")
SENSITIVE_NAME = "group"
LABEL_NAME = "label"


def default_centers(n_blobs: int, radius: float = 6.0) -> list[tuple[float, float]]:
    """Blob centers evenly spaced on a circle."""
    if n_blobs < 1:
        raise ConfigError("need at least one blob")
    angles = 2 * np.pi * np.arange(n_blobs) / n_blobs
    return [(float(radius * np.cos(a)), float(radius * np.sin(a))) for a in angles]


def generate_synthetic(
    n_per_blob: int,
    blob_centers: Sequence[Sequence[float]],
    blob_stddev: float = 1.0,
    p: float | Sequence[float] = 0.5,
    seed: int = 0,
) -> Dataset:
    """
    Sample `n_per_blob` points around each center; label = blob index.

    `p` is the probability of sensitive group 1, either shared by all blobs or
    given once per blob to skew group membership by blob.
    """
    centers = np.asarray(blob_centers, dtype=np.float64)
    if centers.size == 0:
        raise ConfigError("blob center list is empty")
    if centers.ndim != 2 or centers.shape[1] != 2:
        raise ConfigError("blob centers must be 2-D points")
    if n_per_blob < 1:
        raise ConfigError("n_per_blob must be at least 1")
    if not blob_stddev > 0:
        raise ConfigError("blob standard deviation must be positive")
    probs = np.broadcast_to(np.asarray(p, dtype=np.float64), (len(centers),)) if np.ndim(p) == 0 else np.asarray(p, dtype=np.float64)
    if probs.shape != (len(centers),):
        raise ConfigError("give one group probability, or one per blob")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ConfigError("group probability must lie in [0, 1]")

    points, labels = make_blobs(
        n_samples=[n_per_blob] * len(centers),
        centers=centers,
        cluster_std=blob_stddev,
        random_state=seed,
    )
    rng = np.random.default_rng(seed)
    groups = (rng.random(len(labels)) < probs[labels]).astype(np.int64)

    features = FeatureSpace(
        num_names=NUM_NAMES,
        sens_names=(SENSITIVE_NAME,),
        sens_tokens=(("0", "1"),),
        label_name=LABEL_NAME,
        label_tokens=tuple(str(i) for i in range(len(centers))),
    )
    digest = hashlib.sha256(points.tobytes() + groups.tobytes() + labels.tobytes()).hexdigest()
    return Dataset(
        points,
        np.empty((len(labels), 0), dtype=np.int64),
        groups.reshape(-1, 1),
        features,
        labels=labels,
        fingerprint=digest,
    )


def synthetic_schema() -> Schema:
    return Schema(
        (
            (NUM_NAMES[0], Role.NUMERICAL),
            (NUM_NAMES[1], Role.NUMERICAL),
            (SENSITIVE_NAME, Role.SENSITIVE),
            (LABEL_NAME, Role.LABEL),
        )
    )


def write_synthetic(ds: Dataset, csv_path: str | os.PathLike, schema_path: str | os.PathLike) -> None:
    """Write a generated dataset as CSV plus its matching schema JSON."""
    fs = ds.features
    frame = pd.DataFrame(ds.num, columns=list(fs.num_names))
    frame[SENSITIVE_NAME] = [fs.sens_tokens[0][g] for g in ds.sens[:, 0]]
    frame[LABEL_NAME] = [fs.label_tokens[c] for c in ds.labels]
    frame.to_csv(output_path(csv_path), index=False, float_format="%.17g", lineterminator="\n")
    save_schema(synthetic_schema(), output_path(schema_path))

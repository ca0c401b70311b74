from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dataio.dataset import Dataset
from utils.errors import ConfigError

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SensitiveProfile:
    """Global group distribution per sensitive attribute plus attribute weights."""

    global_dists: tuple[np.ndarray, ...]
    weights: np.ndarray

    def __post_init__(self):
        for dist in self.global_dists:
            if np.any(dist < 0) or abs(dist.sum() - 1.0) > _SUM_TOL:
                raise ConfigError("group distribution must be non-negative and sum to 1")
        if len(self.weights) != len(self.global_dists):
            raise ConfigError("need exactly one fairness weight per sensitive attribute")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > _SUM_TOL:
            raise ConfigError("fairness weights must be non-negative and sum to 1")

    @property
    def flat_global(self) -> np.ndarray:
        return np.concatenate(self.global_dists)

    @property
    def offsets(self) -> np.ndarray:
        sizes = [len(d) for d in self.global_dists]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def normalize_weights(weights: Sequence[float] | None, n_attributes: int) -> np.ndarray:
    if weights is None:
        return np.full(n_attributes, 1.0 / n_attributes)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n_attributes,):
        raise ConfigError(f"expected {n_attributes} fairness weight(s), got {len(w)}")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise ConfigError("fairness weights must be finite, non-negative and not all zero")
    return w / w.sum()


def compute_profile(ds: Dataset, weights: Sequence[float] | None = None) -> SensitiveProfile:
    if ds.n_attributes == 0:
        raise ConfigError("fairness needs at least one sensitive column")
    dists = []
    for u, size in enumerate(ds.group_sizes):
        counts = np.bincount(ds.sens[:, u], minlength=size).astype(np.float64)
        dist = counts / counts.sum()
        dist.setflags(write=False)
        dists.append(dist)
    return SensitiveProfile(tuple(dists), normalize_weights(weights, ds.n_attributes))

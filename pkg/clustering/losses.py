"""
Node statistics and the loss terms of the clustering objective.

Every loss is a function of a node's sufficient statistics (sample count,
per-feature sums and sums of squares, per-feature category counts, per-attribute
group counts). The batch helpers take the same statistics stacked over many
candidate nodes and are what split search runs on.

    L(v)   = L_C(v) + lambda * L_F(v)
    L_C(v) = SSE(v) + w * mode_loss(v)
    L_F(v) = sum_u w_u * || G_v^(u) - G^(u) ||_1
"""

from dataclasses import dataclass

import numpy as np

from dataio.dataset import Dataset
from dataio.profile import SensitiveProfile
from utils.errors import FairTreeError

EPSILON = 1e-12


@dataclass(frozen=True)
class NodeStats:
    n: int
    sum: np.ndarray
    sumsq: np.ndarray
    cat_counts: tuple[np.ndarray, ...]
    group_counts: tuple[np.ndarray, ...]

    @classmethod
    def from_indices(cls, ds: Dataset, indices: np.ndarray) -> "NodeStats":
        num = ds.num[indices]
        cat_counts = tuple(
            np.bincount(ds.cat[indices, j], minlength=r) for j, r in enumerate(ds.cardinalities)
        )
        group_counts = tuple(
            np.bincount(ds.sens[indices, u], minlength=m) for u, m in enumerate(ds.group_sizes)
        )
        return cls(len(indices), num.sum(axis=0), (num * num).sum(axis=0), cat_counts, group_counts)


@dataclass(frozen=True)
class MixedWeight:
    """Weight of the categorical mode loss relative to numerical SSE."""

    value: float
    rho: float
    epsilon: float = EPSILON


# ---------------------------------------------------------------- batch forms


def batch_sse(n: np.ndarray, sums: np.ndarray, sumsqs: np.ndarray) -> np.ndarray:
    """SSE for stacked nodes: n (m,), sums/sumsqs (m, d_n)."""
    if sums.shape[1] == 0:
        return np.zeros(len(n))
    sse = (sumsqs - sums * sums / n[:, None]).sum(axis=1)
    return np.maximum(sse, 0.0)


def batch_mode_loss(n: np.ndarray, counts: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """
    Mode loss for stacked nodes.

    counts is (m, sum r_j): the category counts of all categorical features side
    by side, feature j occupying columns offsets[j]:offsets[j+1].
    """
    d_c = len(offsets) - 1
    if d_c == 0:
        return np.zeros(len(n))
    modes = np.maximum.reduceat(counts, offsets[:-1], axis=1)
    return d_c * n - modes.sum(axis=1)


def batch_deviation(n: np.ndarray, counts: np.ndarray, profile: SensitiveProfile) -> np.ndarray:
    """Weighted L1 deviation from the global group distributions for stacked nodes."""
    gaps = np.abs(counts / n[:, None] - profile.flat_global)
    per_attribute = np.add.reduceat(gaps, profile.offsets[:-1], axis=1)
    return per_attribute @ profile.weights


# --------------------------------------------------------------- single node


def _require_samples(stats: NodeStats) -> None:
    if stats.n < 1:
        raise FairTreeError("loss of an empty node is undefined")


def numerical_sse(stats: NodeStats) -> float:
    _require_samples(stats)
    sse = float(np.sum(stats.sumsq - stats.sum * stats.sum / stats.n))
    return max(sse, 0.0)


def two_pass_sse(values: np.ndarray) -> float:
    """sum ||x - mean||^2 computed from the rows themselves."""
    if values.size == 0:
        return 0.0
    centered = values - values.mean(axis=0)
    return float(np.sum(centered * centered))


def categorical_mode_loss(stats: NodeStats) -> int:
    _require_samples(stats)
    return int(sum(stats.n - int(counts.max()) for counts in stats.cat_counts))


def mixed_weight(global_stats: NodeStats, d_n: int, d_c: int, epsilon: float = EPSILON) -> MixedWeight:
    rho = d_n / (d_n + d_c)
    if d_c == 0:
        return MixedWeight(0.0, rho, epsilon)
    if d_n == 0:
        # the adaptive formula collapses to 0 without numerical features
        return MixedWeight(1.0, rho, epsilon)
    value = (1 - rho) * numerical_sse(global_stats) / (rho * categorical_mode_loss(global_stats) + epsilon)
    return MixedWeight(value, rho, epsilon)


def compactness_loss(stats: NodeStats, w: MixedWeight) -> float:
    return numerical_sse(stats) + w.value * categorical_mode_loss(stats)


def fairness_deviation(stats: NodeStats, profile: SensitiveProfile | None) -> float:
    _require_samples(stats)
    if profile is None:
        return 0.0
    total = 0.0
    for counts, dist, weight in zip(stats.group_counts, profile.global_dists, profile.weights):
        total += weight * float(np.abs(counts / stats.n - dist).sum())
    return total


def node_objective(stats: NodeStats, w: MixedWeight, profile: SensitiveProfile | None, lam: float) -> float:
    loss = compactness_loss(stats, w)
    if lam:
        loss += lam * fairness_deviation(stats, profile)
    return loss


@dataclass(frozen=True)
class Objective:
    """The pieces of L(v) that stay fixed for one fit."""

    weight: MixedWeight
    profile: SensitiveProfile | None
    lam: float

"""
Best binary split of a node.

Candidates are numeric thresholds (midpoints between adjacent distinct values)
and categorical subsets (left side = a subset of the categories present in the
node). Every candidate is scored with

    gain = L(D) - [L(D_L) + L(D_R)]

where L is the node objective. Numeric candidates are scored from prefix sums
over the node sorted by that feature, categorical ones from per-category sums,
so each feature costs one sort plus one vectorized pass.

Ties are resolved in canonical order: feature index, then numeric before
categorical, then ascending threshold / subset enumeration order.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from clustering.losses import (
    MixedWeight,
    NodeStats,
    batch_deviation,
    batch_mode_loss,
    batch_sse,
)
from dataio.dataset import Dataset
from dataio.profile import SensitiveProfile
from utils.errors import FairTreeError

logger = logging.getLogger(__name__)

DEFAULT_CAT_CAP = 12
TIE_RTOL = 1e-9


def tie_tolerance(reference: float) -> float:
    return TIE_RTOL * max(1.0, abs(reference))


@dataclass(frozen=True)
class NumericThreshold:
    feature: int
    threshold: float

    def goes_left(self, num: np.ndarray, cat: np.ndarray) -> np.ndarray:
        return num[:, self.feature] <= self.threshold


@dataclass(frozen=True)
class CategorySubset:
    feature: int
    left: frozenset[int]

    def goes_left(self, num: np.ndarray, cat: np.ndarray) -> np.ndarray:
        return np.isin(cat[:, self.feature], sorted(self.left))


SplitRule = NumericThreshold | CategorySubset


@dataclass(frozen=True)
class SplitEvaluation:
    gain: float
    rule: SplitRule | None = None
    left_stats: NodeStats | None = None
    right_stats: NodeStats | None = None
    left_indices: np.ndarray | None = None
    right_indices: np.ndarray | None = None

    @classmethod
    def none(cls) -> "SplitEvaluation":
        return cls(-np.inf)

    @property
    def feasible(self) -> bool:
        return self.rule is not None


# -------------------------------------------------------------- candidates


def midpoints(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    mid = (lower + upper) / 2
    # for neighbouring doubles the midpoint may round onto the upper value
    return np.where(mid < upper, mid, lower)


def numeric_candidates(node_values: Iterable[float]) -> np.ndarray:
    values = np.unique(np.fromiter(node_values, dtype=np.float64))
    return midpoints(values[:-1], values[1:])


def subset_masks(r: int, cap: int = DEFAULT_CAT_CAP) -> np.ndarray:
    """
    Boolean (m, r) matrix of left-side subsets over r sorted categories.

    Up to `cap` categories: every proper subset that leaves out the largest
    category, in binary counting order (bit i = i-th smallest category), which
    lists each bipartition exactly once. Above the cap: one category versus
    the rest, for each category in order.
    """
    if r < 2:
        return np.zeros((0, r), dtype=bool)
    if r > cap:
        return np.eye(r, dtype=bool)
    codes = np.arange(1, 2 ** (r - 1))
    return ((codes[:, None] >> np.arange(r)) & 1).astype(bool)


def categorical_candidates(present_categories: Iterable[int], cap: int = DEFAULT_CAT_CAP) -> list[frozenset[int]]:
    if cap < 2:
        raise FairTreeError("categorical cap must be at least 2")
    present = np.array(sorted(set(present_categories)))
    return [frozenset(int(c) for c in present[mask]) for mask in subset_masks(len(present), cap)]


def _one_hot(codes: np.ndarray, sizes: tuple[int, ...]) -> np.ndarray:
    blocks = [np.eye(size)[codes[:, j]] for j, size in enumerate(sizes)]
    return np.hstack(blocks) if blocks else np.empty((codes.shape[0], 0))


def _offsets(sizes: tuple[int, ...]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


# -------------------------------------------------------------- best rule


class _Scorer:
    """Node objective over stacked statistic rows laid out as
    [count | sums | sums of squares | category counts | group counts]."""

    def __init__(self, ds: Dataset, w: MixedWeight, profile: SensitiveProfile | None, lam: float):
        self.w = w
        self.profile = profile
        self.lam = lam
        self.use_fairness = lam > 0 and profile is not None
        d_n = ds.d_n
        self.sums = slice(1, 1 + d_n)
        self.sumsqs = slice(1 + d_n, 1 + 2 * d_n)
        cat_end = 1 + 2 * d_n + sum(ds.cardinalities)
        self.cats = slice(1 + 2 * d_n, cat_end)
        self.groups = slice(cat_end, None)
        self.cat_offsets = _offsets(ds.cardinalities)

    def rows(self, ds: Dataset, indices: np.ndarray) -> np.ndarray:
        num = ds.num[indices]
        centered = num - num.mean(axis=0) if num.shape[1] else num
        blocks = [np.ones((len(indices), 1)), centered, centered * centered, _one_hot(ds.cat[indices], ds.cardinalities)]
        if self.use_fairness:
            blocks.append(_one_hot(ds.sens[indices], ds.group_sizes))
        return np.hstack(blocks)

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        n = rows[:, 0]
        loss = batch_sse(n, rows[:, self.sums], rows[:, self.sumsqs])
        if self.w.value:
            loss = loss + self.w.value * batch_mode_loss(n, rows[:, self.cats], self.cat_offsets)
        if self.use_fairness:
            loss = loss + self.lam * batch_deviation(n, rows[:, self.groups], self.profile)
        return loss


def best_rule(
    node_samples: np.ndarray,
    ds: Dataset,
    w: MixedWeight,
    profile: SensitiveProfile | None,
    lam: float,
    n_min: int = 1,
    cat_cap: int = DEFAULT_CAT_CAP,
) -> SplitEvaluation:
    """
    Highest-gain rule for the node holding `node_samples`, among candidates
    that leave at least `n_min` samples on each side. The gain may be
    negative. Returns SplitEvaluation.none() when nothing is feasible.
    """
    indices = np.asarray(node_samples, dtype=np.int64)
    n = len(indices)
    if n == 0:
        raise FairTreeError("cannot search splits of an empty node")
    if n < 2 * n_min:
        return SplitEvaluation.none()

    scorer = _Scorer(ds, w, profile, lam)
    rows = scorer.rows(ds, indices)
    total = rows.sum(axis=0)
    parent_loss = float(scorer(total[None, :])[0])

    chunks: list[tuple[np.ndarray, Callable[[int], SplitRule]]] = []
    for index in range(max(ds.d_n, ds.d_c)):
        if index < ds.d_n:
            chunks.append(_scan_numeric(index, ds.num[indices, index], rows, total, parent_loss, scorer, n_min))
        if index < ds.d_c:
            chunks.append(_scan_categorical(index, ds.cat[indices, index], rows, total, parent_loss, scorer, n_min, cat_cap))

    gains = np.concatenate([g for g, _ in chunks]) if chunks else np.empty(0)
    if gains.size == 0:
        return SplitEvaluation.none()
    best = gains.max()
    winner = int(np.flatnonzero(gains >= best - tie_tolerance(parent_loss))[0])
    for chunk_gains, make_rule in chunks:
        if winner < len(chunk_gains):
            rule = make_rule(winner)
            gain = float(chunk_gains[winner])
            break
        winner -= len(chunk_gains)

    mask = rule.goes_left(ds.num[indices], ds.cat[indices])
    left, right = indices[mask], indices[~mask]
    return SplitEvaluation(
        gain,
        rule,
        NodeStats.from_indices(ds, left),
        NodeStats.from_indices(ds, right),
        left,
        right,
    )


def _scan_numeric(feature, values, rows, total, parent_loss, scorer, n_min):
    n = len(values)
    order = np.argsort(values, kind="stable")
    ordered = values[order]
    prefix = np.cumsum(rows[order], axis=0)[:-1]
    n_left = np.arange(1, n)
    feasible = (ordered[:-1] < ordered[1:]) & (n_left >= n_min) & (n - n_left >= n_min)
    positions = np.flatnonzero(feasible)
    left = prefix[positions]
    gains = parent_loss - (scorer(left) + scorer(total - left))
    thresholds = midpoints(ordered[positions], ordered[positions + 1])
    return gains, lambda i: NumericThreshold(feature, float(thresholds[i]))


def _scan_categorical(feature, codes, rows, total, parent_loss, scorer, n_min, cat_cap):
    present, inverse = np.unique(codes, return_inverse=True)
    masks = subset_masks(len(present), cat_cap)
    if masks.shape[0] == 0:
        return np.empty(0), None
    per_category = np.zeros((len(present), rows.shape[1]))
    np.add.at(per_category, inverse, rows)
    left_all = masks.astype(np.float64) @ per_category
    n_left = left_all[:, 0]
    keep = np.flatnonzero((n_left >= n_min) & (len(codes) - n_left >= n_min))
    left = left_all[keep]
    gains = parent_loss - (scorer(left) + scorer(total - left))
    return gains, lambda i: CategorySubset(feature, frozenset(int(c) for c in present[masks[keep[i]]]))

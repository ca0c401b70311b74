"""
Best-first tree growth.

Every leaf caches its best rule when it is created. The loop repeatedly splits
the leaf with the largest cached gain until the tree has the requested number
of leaves or no leaf has a feasible rule left. A split is executed even when
its gain is negative; the loop stops on leaf count, not on gain.
"""

import heapq
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from clustering.losses import NodeStats, Objective, mixed_weight
from clustering.split_search import best_rule, tie_tolerance
from clustering.tree import IFCT, ClusteringTree, FitConfig, TreeNode, finalize
from dataio.dataset import Dataset, standardize
from dataio.profile import compute_profile
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

LogFn = Callable[[str], None]


def build_objective(ds: Dataset, cfg: FitConfig, lam: float, require_fairness: bool) -> Objective:
    """Mixed-type weight over the whole dataset plus the global group profile."""
    global_stats = NodeStats.from_indices(ds, np.arange(ds.n))
    weight = mixed_weight(global_stats, ds.d_n, ds.d_c, cfg.epsilon)
    if ds.n_attributes == 0:
        if require_fairness:
            raise ConfigError("fairness needs at least one sensitive column in the data")
        if cfg.weights is not None:
            raise ConfigError("fairness weights given but the data has no sensitive column")
        return Objective(weight, None, lam)
    return Objective(weight, compute_profile(ds, cfg.weights), lam)


class Frontier:
    """
    Leaves with a feasible cached rule, ordered by gain.

    Gains within tie tolerance of the best count as equal and go to the
    smallest node id.
    """

    def __init__(self):
        self._heap: list[tuple[float, int, TreeNode]] = []

    def push(self, node: TreeNode) -> None:
        if node.evaluation is not None and node.evaluation.feasible:
            heapq.heappush(self._heap, (-node.evaluation.gain, node.id, node))

    def pop_best(self) -> TreeNode | None:
        if not self._heap:
            return None
        best_gain = -self._heap[0][0]
        floor = best_gain - tie_tolerance(best_gain)
        tied = []
        while self._heap and -self._heap[0][0] >= floor:
            tied.append(heapq.heappop(self._heap))
        tied.sort(key=lambda entry: entry[1])
        for entry in tied[1:]:
            heapq.heappush(self._heap, entry)
        return tied[0][2]


@dataclass
class Growth:
    root: TreeNode
    leaf_count: int
    next_id: int
    negative_gain_splits: int = 0


def grow_best_first(
    ds: Dataset,
    objective: Objective,
    n_min: int,
    cat_cap: int,
    max_leaves: int | None = None,
    log: LogFn | None = None,
) -> Growth:
    def evaluate(node: TreeNode) -> None:
        node.evaluation = best_rule(
            node.indices, ds, objective.weight, objective.profile, objective.lam, n_min, cat_cap
        )

    indices = np.arange(ds.n)
    root = TreeNode(0, stats=NodeStats.from_indices(ds, indices), indices=indices)
    evaluate(root)
    frontier = Frontier()
    frontier.push(root)
    growth = Growth(root, leaf_count=1, next_id=1)

    while max_leaves is None or growth.leaf_count < max_leaves:
        node = frontier.pop_best()
        if node is None:
            break
        ev = node.evaluation
        left = TreeNode(growth.next_id, node.depth + 1, stats=ev.left_stats, indices=ev.left_indices)
        right = TreeNode(growth.next_id + 1, node.depth + 1, stats=ev.right_stats, indices=ev.right_indices)
        node.attach(ev.rule, left, right, ev.gain)
        growth.next_id += 2
        growth.leaf_count += 1
        if ev.gain < 0:
            growth.negative_gain_splits += 1
        logger.debug("split node %d (n=%d) with %s, gain %.6g", node.id, node.stats.n, ev.rule, ev.gain)
        for child in (left, right):
            evaluate(child)
            frontier.push(child)
        if log and growth.leaf_count % 100 == 0:
            log(f"grown to {growth.leaf_count} leaves")
    return growth


def fit_ifct(ds: Dataset, cfg: FitConfig, log: LogFn | None = None) -> ClusteringTree:
    """
    Grow a k-leaf tree under the lambda-weighted objective.

    When no leaf admits a feasible split before k leaves exist, the smaller
    tree is returned with `exhausted` set.
    """
    if cfg.standardize:
        ds = standardize(ds)
    objective = build_objective(ds, cfg, cfg.lam, require_fairness=cfg.lam > 0)
    growth = grow_best_first(ds, objective, cfg.n_min, cfg.cat_cap, max_leaves=cfg.k, log=log)

    tree = ClusteringTree(
        growth.root,
        cfg,
        ds.features,
        algorithm=IFCT,
        weight=objective.weight,
        exhausted=growth.leaf_count < cfg.k,
        negative_gain_splits=growth.negative_gain_splits,
    )
    finalize(tree, ds, objective.profile)
    if tree.exhausted:
        logger.warning("No feasible split left: stopped at %d of %d leaves", growth.leaf_count, cfg.k)
        if log:
            log(f"⚠️ only {growth.leaf_count} of {cfg.k} leaves could be grown")
    logger.info(
        "IFCT: %d leaves, compactness %.6g, fairness %.6g, %d negative-gain split(s)",
        tree.k,
        tree.total_compactness,
        tree.total_fairness,
        tree.negative_gain_splits,
    )
    return tree

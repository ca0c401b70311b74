"""
Fairness-guided post-pruning.

The tree is first over-grown on compactness alone, until no leaf has a
feasible split. Internal nodes are then collapsed one at a time, always the
candidate whose collapse helps fairness most:

    gain_F(D) = mean of L_F over the leaves below D  -  L_F(D)

A candidate whose collapse would leave fewer than k leaves is dropped from the
candidate set for good. After each collapse only the ancestors of the
collapsed node change; their leaf counts, leaf deviation sums and gains are
updated in place and re-queued.
"""

import heapq
import logging
from dataclasses import dataclass, field

from clustering.grow import LogFn, build_objective, grow_best_first
from clustering.losses import fairness_deviation
from clustering.split_search import tie_tolerance
from clustering.tree import IFCT_P, ClusteringTree, FitConfig, TreeNode, finalize
from dataio.dataset import Dataset, standardize
from dataio.profile import SensitiveProfile
from utils.errors import ConfigError, FitError

logger = logging.getLogger(__name__)


def prune_gain(node: TreeNode, profile: SensitiveProfile | None) -> float:
    if node.is_leaf:
        raise FitError(f"node {node.id} is a leaf; only internal nodes can be pruned")
    leaves = node.leaves()
    mean_leaf = sum(fairness_deviation(leaf.stats, profile) for leaf in leaves) / len(leaves)
    return mean_leaf - fairness_deviation(node.stats, profile)


@dataclass
class PruneState:
    candidates: set[int]
    leaf_count: int
    nodes: dict[int, TreeNode]
    deviation: dict[int, float]
    subtree_leaves: dict[int, int]
    leaf_deviation_sum: dict[int, float]
    prune_gain: dict[int, float] = field(default_factory=dict)
    excluded: set[int] = field(default_factory=set)
    pruned: list[int] = field(default_factory=list)

    @classmethod
    def from_tree(cls, root: TreeNode, profile: SensitiveProfile | None) -> "PruneState":
        nodes = {node.id: node for node in root.walk()}
        deviation = {i: fairness_deviation(node.stats, profile) for i, node in nodes.items()}
        subtree_leaves, leaf_sum = {}, {}
        # children always carry larger ids than their parent
        for i in sorted(nodes, reverse=True):
            node = nodes[i]
            if node.is_leaf:
                subtree_leaves[i], leaf_sum[i] = 1, deviation[i]
            else:
                subtree_leaves[i] = subtree_leaves[node.left.id] + subtree_leaves[node.right.id]
                leaf_sum[i] = leaf_sum[node.left.id] + leaf_sum[node.right.id]
        candidates = {i for i, node in nodes.items() if not node.is_leaf}
        state = cls(candidates, subtree_leaves[root.id], nodes, deviation, subtree_leaves, leaf_sum)
        for i in candidates:
            state.refresh(i)
        return state

    def refresh(self, node_id: int) -> float:
        gain = self.leaf_deviation_sum[node_id] / self.subtree_leaves[node_id] - self.deviation[node_id]
        self.prune_gain[node_id] = gain
        return gain

    def subtree_internal(self, node_id: int) -> list[int]:
        return [node.id for node in self.nodes[node_id].walk() if not node.is_leaf]

    def collapse(self, node_id: int) -> None:
        node = self.nodes[node_id]
        removed_leaves = self.subtree_leaves[node_id] - 1
        removed_deviation = self.leaf_deviation_sum[node_id] - self.deviation[node_id]
        for inner in self.subtree_internal(node_id):
            self.candidates.discard(inner)
            self.prune_gain.pop(inner, None)
        node.collapse()
        self.subtree_leaves[node_id] = 1
        self.leaf_deviation_sum[node_id] = self.deviation[node_id]
        self.leaf_count -= removed_leaves
        self.pruned.append(node_id)

        ancestor = node.parent
        while ancestor is not None:
            self.subtree_leaves[ancestor.id] -= removed_leaves
            self.leaf_deviation_sum[ancestor.id] -= removed_deviation
            if ancestor.id in self.candidates:
                self.refresh(ancestor.id)
            ancestor = ancestor.parent


class _GainQueue:
    """Max-queue over candidate gains with lazy invalidation."""

    def __init__(self, state: PruneState):
        self.state = state
        self._version: dict[int, int] = {}
        self._heap: list[tuple[float, int, int]] = []
        for node_id in state.candidates:
            self.push(node_id)

    def push(self, node_id: int) -> None:
        version = self._version.get(node_id, 0) + 1
        self._version[node_id] = version
        heapq.heappush(self._heap, (-self.state.prune_gain[node_id], node_id, version))

    def _valid(self, entry: tuple[float, int, int]) -> bool:
        _, node_id, version = entry
        return node_id in self.state.candidates and self._version.get(node_id) == version

    def pop_best(self) -> int | None:
        while self._heap and not self._valid(self._heap[0]):
            heapq.heappop(self._heap)
        if not self._heap:
            return None
        best = -self._heap[0][0]
        floor = best - tie_tolerance(best)
        tied = []
        while self._heap and -self._heap[0][0] >= floor:
            entry = heapq.heappop(self._heap)
            if self._valid(entry):
                tied.append(entry)
        tied.sort(key=lambda entry: entry[1])
        for entry in tied[1:]:
            heapq.heappush(self._heap, entry)
        return tied[0][1]


def _grow_full(ds: Dataset, cfg: FitConfig, log: LogFn | None, require_fairness: bool):
    if cfg.standardize:
        ds = standardize(ds)
    objective = build_objective(ds, cfg, 0.0, require_fairness=require_fairness)
    growth = grow_best_first(ds, objective, cfg.n_min, cfg.cat_cap, max_leaves=None, log=log)
    tree = ClusteringTree(
        growth.root,
        cfg,
        ds.features,
        algorithm=IFCT_P,
        weight=objective.weight,
        negative_gain_splits=growth.negative_gain_splits,
    )
    finalize(tree, ds, objective.profile)
    state = PruneState.from_tree(growth.root, objective.profile)
    logger.info("Fully grown tree: %d leaves, %d prune candidates", state.leaf_count, len(state.candidates))
    return tree, state, ds, objective.profile


def grow_full(ds: Dataset, cfg: FitConfig, log: LogFn | None = None) -> tuple[ClusteringTree, PruneState]:
    """Over-grow on compactness alone; every split parent becomes a prune candidate."""
    tree, state, _, _ = _grow_full(ds, cfg, log, require_fairness=False)
    return tree, state


def prune_to_k(state: PruneState, k: int) -> None:
    queue = _GainQueue(state)
    while state.leaf_count > k:
        node_id = queue.pop_best()
        if node_id is None:
            raise FitError("no prune candidate left before reaching k leaves")
        if state.leaf_count - state.subtree_leaves[node_id] + 1 < k:
            state.candidates.discard(node_id)
            state.excluded.add(node_id)
            logger.debug("excluded node %d: pruning would leave fewer than %d leaves", node_id, k)
            continue
        logger.debug("pruned node %d, gain %.6g", node_id, state.prune_gain[node_id])
        state.candidates.discard(node_id)
        ancestors_before = {a.id for a in _ancestors(state.nodes[node_id])}
        state.collapse(node_id)
        for ancestor_id in ancestors_before & state.candidates:
            queue.push(ancestor_id)


def _ancestors(node: TreeNode):
    node = node.parent
    while node is not None:
        yield node
        node = node.parent


def fit_ifct_p(ds: Dataset, cfg: FitConfig, log: LogFn | None = None) -> ClusteringTree:
    """
    Over-grow on compactness, then prune by fairness gain down to exactly k
    leaves. `cfg.lam` is not used.
    """
    if ds.n_attributes == 0:
        raise ConfigError("IFCT-P needs at least one sensitive column")
    tree, state, ds, profile = _grow_full(ds, cfg, log, require_fairness=True)
    if state.leaf_count < cfg.k:
        raise FitError(
            f"insufficient distinct structure for k clusters: the fully grown tree has {state.leaf_count} leaves, k={cfg.k}"
        )
    prune_to_k(state, cfg.k)
    if log:
        log(f"pruned {len(state.pruned)} subtree(s) down to {state.leaf_count} leaves")
    finalize(tree, ds, profile)
    logger.info(
        "IFCT-P: %d leaves after %d prune(s), compactness %.6g, fairness %.6g",
        tree.k,
        len(state.pruned),
        tree.total_compactness,
        tree.total_fairness,
    )
    return tree

"""
Fitted clustering tree: nodes, configuration snapshot, routing.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterator, Mapping

import numpy as np
import pandas as pd

from clustering.losses import EPSILON, MixedWeight, NodeStats, categorical_mode_loss, fairness_deviation, two_pass_sse
from clustering.split_search import DEFAULT_CAT_CAP, SplitEvaluation, SplitRule
from dataio.dataset import Dataset, FeatureSpace
from dataio.profile import SensitiveProfile
from utils.errors import ConfigError

IFCT = "IFCT"
IFCT_P = "IFCT-P"


@dataclass(frozen=True)
class FitConfig:
    k: int
    lam: float = 0.0
    weights: tuple[float, ...] | None = None
    n_min: int = 1
    epsilon: float = EPSILON
    cat_cap: int = DEFAULT_CAT_CAP
    standardize: bool = False

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k must be a positive integer")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ConfigError("lambda must be a finite non-negative number")
        if not isinstance(self.n_min, int) or self.n_min < 1:
            raise ConfigError("n_min must be a positive integer")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.cat_cap < 2:
            raise ConfigError("categorical cap must be at least 2")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            if any(w < 0 or not math.isfinite(w) for w in self.weights) or sum(self.weights) <= 0:
                raise ConfigError("fairness weights must be non-negative with a positive sum")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["weights"] = list(self.weights) if self.weights is not None else None
        return out


@dataclass(eq=False)
class TreeNode:
    id: int
    depth: int = 0
    parent: "TreeNode | None" = field(default=None, repr=False)
    rule: SplitRule | None = None
    left: "TreeNode | None" = field(default=None, repr=False)
    right: "TreeNode | None" = field(default=None, repr=False)
    cluster_id: int | None = None
    # fitting state; absent on trees loaded from a model document
    stats: NodeStats | None = field(default=None, repr=False)
    indices: np.ndarray | None = field(default=None, repr=False)
    evaluation: SplitEvaluation | None = field(default=None, repr=False)
    split_gain: float | None = None
    # summary, filled at finalization
    n: int = 0
    compactness: float = 0.0
    fairness: float = 0.0
    group_counts: tuple[tuple[int, ...], ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.rule is None

    def attach(self, rule: SplitRule, left: "TreeNode", right: "TreeNode", gain: float) -> None:
        self.rule, self.left, self.right, self.split_gain = rule, left, right, gain
        left.parent = right.parent = self

    def collapse(self) -> None:
        self.rule = self.left = self.right = None
        self.split_gain = None

    def walk(self) -> Iterator["TreeNode"]:
        """Pre-order, left before right."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> list["TreeNode"]:
        return [node for node in self.walk() if node.is_leaf]

    def path(self) -> list[tuple[SplitRule, bool]]:
        """(rule, went_left) pairs from the root down to this node."""
        steps = []
        node = self
        while node.parent is not None:
            steps.append((node.parent.rule, node.parent.left is node))
            node = node.parent
        return steps[::-1]


@dataclass(eq=False)
class ClusteringTree:
    root: TreeNode
    config: FitConfig
    features: FeatureSpace
    algorithm: str = IFCT
    weight: MixedWeight | None = None
    global_dists: tuple[tuple[float, ...], ...] = ()
    fairness_weights: tuple[float, ...] = ()
    fingerprint: str = ""
    timestamp: str | None = None
    n_samples: int = 0
    exhausted: bool = False
    negative_gain_splits: int = 0
    total_compactness: float = 0.0
    total_fairness: float = 0.0

    @property
    def nodes(self) -> list[TreeNode]:
        return sorted(self.root.walk(), key=lambda node: node.id)

    @property
    def leaves(self) -> list[TreeNode]:
        return self.root.leaves()

    @property
    def k(self) -> int:
        return len(self.leaves)

    def assign(self, num: np.ndarray, cat: np.ndarray) -> np.ndarray:
        """Cluster id per row of encoded (num, cat) arrays in model units."""
        out = np.full(len(num), -1, dtype=np.int64)
        stack = [(self.root, np.arange(len(num)))]
        while stack:
            node, rows = stack.pop()
            if node.is_leaf:
                out[rows] = node.cluster_id
                continue
            goes_left = node.rule.goes_left(num[rows], cat[rows])
            stack.append((node.left, rows[goes_left]))
            stack.append((node.right, rows[~goes_left]))
        return out

    def predict_frame(self, frame: pd.DataFrame, permissive: bool = False) -> np.ndarray:
        num, cat = self.features.encode_rows(frame, permissive=permissive)
        return self.assign(num, cat)

    def fitted_labels(self) -> np.ndarray:
        """Cluster id of every fitting sample, from the leaves' sample sets."""
        out = np.full(self.n_samples, -1, dtype=np.int64)
        for leaf in self.leaves:
            out[leaf.indices] = leaf.cluster_id
        return out


def route(tree: ClusteringTree, sample: Mapping[str, Any], permissive: bool = False) -> int:
    """Cluster id of one raw data row given as column -> value."""
    frame = pd.DataFrame({name: [str(value)] for name, value in sample.items()})
    return int(tree.predict_frame(frame, permissive=permissive)[0])


def finalize(tree: ClusteringTree, ds: Dataset, profile: SensitiveProfile | None) -> ClusteringTree:
    """
    Number leaves left to right and record per-node summaries and totals.

    Reported compactness uses the two-pass SSE, not the running sums used
    during the search.
    """
    w = tree.weight.value if tree.weight is not None else 0.0
    for node in tree.root.walk():
        stats = node.stats
        node.n = stats.n
        node.compactness = two_pass_sse(ds.num[node.indices]) + w * categorical_mode_loss(stats)
        node.fairness = fairness_deviation(stats, profile) if profile is not None else 0.0
        node.group_counts = tuple(tuple(int(c) for c in counts) for counts in stats.group_counts)
        node.cluster_id = None
    leaves = tree.leaves
    for cluster_id, leaf in enumerate(leaves):
        leaf.cluster_id = cluster_id
    tree.total_compactness = float(sum(leaf.compactness for leaf in leaves))
    tree.total_fairness = float(sum(leaf.fairness for leaf in leaves))
    if profile is not None:
        tree.global_dists = tuple(tuple(float(p) for p in dist) for dist in profile.global_dists)
        tree.fairness_weights = tuple(float(x) for x in profile.weights)
    tree.fingerprint = ds.fingerprint
    tree.n_samples = ds.n
    return tree


def sens_weights_by_name(features: FeatureSpace, named: Mapping[str, float]) -> tuple[float, ...]:
    """Order `name -> weight` pairs along the sensitive columns; absent names weigh 0."""
    unknown = sorted(set(named) - set(features.sens_names))
    if unknown:
        raise ConfigError(f"no sensitive column named {', '.join(unknown)}")
    return tuple(float(named.get(name, 0.0)) for name in features.sens_names)


def leaf_table(tree: ClusteringTree) -> list[dict[str, Any]]:
    rows = []
    for leaf in tree.leaves:
        row = {"cluster": leaf.cluster_id, "size": leaf.n, "compactness": leaf.compactness, "fairness": leaf.fairness}
        for u, name in enumerate(tree.features.sens_names):
            counts = leaf.group_counts[u] if leaf.group_counts else ()
            for g, token in enumerate(tree.features.sens_tokens[u]):
                row[f"{name}={token}"] = counts[g] / leaf.n if leaf.n and counts else 0.0
        rows.append(row)
    return rows


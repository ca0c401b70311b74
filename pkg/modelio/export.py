"""
Human-readable views of a fitted tree: one rule line per cluster, and a
Graphviz DOT digraph. Thresholds are shown in raw feature units.
"""

import re

import graphviz

from clustering.split_search import NumericThreshold, SplitRule
from clustering.tree import ClusteringTree, TreeNode
from dataio.dataset import FeatureSpace

_PLAIN_TOKEN = re.compile(r"^[^\s,{}'\"]+$")


def _number(value: float) -> str:
    return format(value, ".10g")


def _token(token: str) -> str:
    if _PLAIN_TOKEN.match(token):
        return token
    return "'" + token.replace("'", "\\'") + "'"


def condition(rule: SplitRule, went_left: bool, features: FeatureSpace) -> str:
    if isinstance(rule, NumericThreshold):
        name = features.num_names[rule.feature]
        threshold = features.to_raw_units(rule.feature, rule.threshold)
        return f"{name} {'≤' if went_left else '>'} {_number(threshold)}"
    name = features.cat_names[rule.feature]
    tokens = ", ".join(_token(features.cat_tokens[rule.feature][c]) for c in sorted(rule.left))
    return f"{name} {'∈' if went_left else '∉'} {{{tokens}}}"


def rule_path(leaf: TreeNode, features: FeatureSpace) -> str:
    steps = [condition(rule, went_left, features) for rule, went_left in leaf.path()]
    return " AND ".join(steps) if steps else "(all samples)"


def export_rules(tree: ClusteringTree) -> str:
    lines = [f"cluster {leaf.cluster_id} (n={leaf.n}): {rule_path(leaf, tree.features)}" for leaf in tree.leaves]
    return "\n".join(lines) + "\n"


def _label(lines: list[str]) -> str:
    """One multi-line DOT label; each line is escaped and never read as HTML."""
    return graphviz.nohtml("\\n".join(graphviz.escape(line) for line in lines))


def _leaf_label(leaf: TreeNode, features: FeatureSpace) -> str:
    lines = [f"cluster {leaf.cluster_id}", f"n={leaf.n}"]
    for u, name in enumerate(features.sens_names):
        if not leaf.group_counts or not leaf.n:
            continue
        shares = ", ".join(
            f"{_token(token)}={count / leaf.n:.3f}"
            for token, count in zip(features.sens_tokens[u], leaf.group_counts[u])
        )
        lines.append(f"{name}: {shares}")
    return _label(lines)


def export_dot(tree: ClusteringTree) -> str:
    features = tree.features
    dot = graphviz.Digraph("ClusteringTree", node_attr={"shape": "box", "fontname": "Helvetica"})
    for node in tree.nodes:
        if node.is_leaf:
            dot.node(f"n{node.id}", _leaf_label(node, features), shape="ellipse")
        else:
            dot.node(f"n{node.id}", _label([condition(node.rule, True, features), f"n={node.n}"]))
    for node in tree.nodes:
        if not node.is_leaf:
            dot.edge(f"n{node.id}", f"n{node.left.id}", label="yes")
            dot.edge(f"n{node.id}", f"n{node.right.id}", label="no")
    return dot.source

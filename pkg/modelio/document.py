"""
Model document: a self-contained JSON description of a fitted tree.

Keys are written in a fixed order and floats in Python's shortest round-trip
form, so save(load(save(tree))) reproduces the first document byte for byte.
Sample indices and running statistics are not stored; a loaded tree can route,
export and report, but not be re-pruned.
"""

import json
import logging
import os
from typing import Any

from clustering.losses import MixedWeight
from clustering.split_search import CategorySubset, NumericThreshold, SplitRule
from clustering.tree import ClusteringTree, FitConfig, TreeNode
from dataio.dataset import FeatureSpace
from utils.errors import ConfigError, ModelFormatError
from utils.pathfinder import output_path

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


# ------------------------------------------------------------------- save


def _rule_to_dict(rule: SplitRule, features: FeatureSpace) -> dict[str, Any]:
    if isinstance(rule, NumericThreshold):
        return {
            "type": "numeric",
            "feature": features.num_names[rule.feature],
            "index": rule.feature,
            "threshold": float(rule.threshold),
        }
    left = sorted(rule.left)
    return {
        "type": "categorical",
        "feature": features.cat_names[rule.feature],
        "index": rule.feature,
        "left": left,
        "left_tokens": [features.cat_tokens[rule.feature][c] for c in left],
    }


def _features_to_dict(fs: FeatureSpace) -> dict[str, Any]:
    return {
        "numerical": list(fs.num_names),
        "categorical": [{"name": n, "categories": list(t)} for n, t in zip(fs.cat_names, fs.cat_tokens)],
        "sensitive": [{"name": n, "groups": list(t)} for n, t in zip(fs.sens_names, fs.sens_tokens)],
        "label": {"name": fs.label_name, "classes": list(fs.label_tokens)} if fs.label_name else None,
        "standardization": {"center": list(fs.center), "scale": list(fs.scale)} if fs.standardized else None,
    }


def to_document(tree: ClusteringTree) -> dict[str, Any]:
    nodes = []
    for node in tree.nodes:
        entry = {
            "id": node.id,
            "kind": "leaf" if node.is_leaf else "internal",
            "rule": None if node.is_leaf else _rule_to_dict(node.rule, tree.features),
            "left": None if node.is_leaf else node.left.id,
            "right": None if node.is_leaf else node.right.id,
            "cluster": node.cluster_id if node.is_leaf else None,
            "n": int(node.n),
            "compactness": float(node.compactness),
            "fairness": float(node.fairness),
            "group_counts": [list(c) for c in node.group_counts],
        }
        nodes.append(entry)
    weight = tree.weight
    return {
        "format_version": FORMAT_VERSION,
        "schema": _features_to_dict(tree.features),
        "config": tree.config.to_dict(),
        "objective": {
            "mixed_weight": float(weight.value) if weight else 0.0,
            "rho": float(weight.rho) if weight else 1.0,
            "epsilon": float(weight.epsilon) if weight else tree.config.epsilon,
            "global_distributions": [list(d) for d in tree.global_dists],
            "fairness_weights": list(tree.fairness_weights),
            "total_compactness": float(tree.total_compactness),
            "total_fairness": float(tree.total_fairness),
            "exhausted": bool(tree.exhausted),
            "negative_gain_splits": int(tree.negative_gain_splits),
        },
        "nodes": nodes,
        "provenance": {
            "algorithm": tree.algorithm,
            "timestamp": tree.timestamp,
            "dataset_fingerprint": tree.fingerprint,
            "n_samples": int(tree.n_samples),
        },
    }


def save(tree: ClusteringTree) -> bytes:
    text = json.dumps(to_document(tree), indent=2, ensure_ascii=False, allow_nan=False)
    return (text + "\n").encode("utf-8")


def save_model(tree: ClusteringTree, path: str | os.PathLike) -> None:
    try:
        output_path(path).write_bytes(save(tree))
    except OSError as e:
        raise ModelFormatError(f"cannot write model file {path}: {e}") from None
    logger.info("Model written to %s", path)


# ------------------------------------------------------------------- load


def _rule_from_dict(raw: dict[str, Any], features: FeatureSpace) -> SplitRule:
    kind = raw["type"]
    index = int(raw["index"])
    if kind == "numeric":
        if not 0 <= index < len(features.num_names) or features.num_names[index] != raw["feature"]:
            raise ModelFormatError(f"rule refers to unknown numerical feature '{raw['feature']}'")
        return NumericThreshold(index, float(raw["threshold"]))
    if kind == "categorical":
        if not 0 <= index < len(features.cat_names) or features.cat_names[index] != raw["feature"]:
            raise ModelFormatError(f"rule refers to unknown categorical feature '{raw['feature']}'")
        return CategorySubset(index, frozenset(int(c) for c in raw["left"]))
    raise ModelFormatError(f"unknown rule type '{kind}'")


def _features_from_dict(raw: dict[str, Any]) -> FeatureSpace:
    label = raw.get("label")
    scaling = raw.get("standardization")
    return FeatureSpace(
        num_names=tuple(raw["numerical"]),
        cat_names=tuple(c["name"] for c in raw["categorical"]),
        sens_names=tuple(s["name"] for s in raw["sensitive"]),
        cat_tokens=tuple(tuple(c["categories"]) for c in raw["categorical"]),
        sens_tokens=tuple(tuple(s["groups"]) for s in raw["sensitive"]),
        label_name=label["name"] if label else None,
        label_tokens=tuple(label["classes"]) if label else (),
        center=tuple(scaling["center"]) if scaling else None,
        scale=tuple(scaling["scale"]) if scaling else None,
    )


def _link_nodes(raw_nodes: list[dict[str, Any]], features: FeatureSpace) -> TreeNode:
    nodes: dict[int, TreeNode] = {}
    for raw in raw_nodes:
        node_id = int(raw["id"])
        if node_id in nodes:
            raise ModelFormatError(f"duplicate node id {node_id}")
        nodes[node_id] = TreeNode(
            node_id,
            cluster_id=raw["cluster"],
            n=int(raw["n"]),
            compactness=float(raw["compactness"]),
            fairness=float(raw["fairness"]),
            group_counts=tuple(tuple(int(c) for c in counts) for counts in raw["group_counts"]),
        )
    referenced: set[int] = set()
    for raw in raw_nodes:
        node = nodes[int(raw["id"])]
        if raw["kind"] == "leaf":
            if raw["cluster"] is None:
                raise ModelFormatError(f"leaf {node.id} has no cluster id")
            continue
        if raw["kind"] != "internal":
            raise ModelFormatError(f"node {node.id} has unknown kind '{raw['kind']}'")
        children = []
        for side in ("left", "right"):
            child_id = raw[side]
            if child_id is None or int(child_id) not in nodes:
                raise ModelFormatError(f"node {node.id} is missing its {side} child")
            if int(child_id) in referenced:
                raise ModelFormatError(f"node {child_id} has more than one parent")
            referenced.add(int(child_id))
            children.append(nodes[int(child_id)])
        node.attach(_rule_from_dict(raw["rule"], features), children[0], children[1], gain=None)
        node.cluster_id = None

    roots = [node for node_id, node in nodes.items() if node_id not in referenced]
    if len(roots) != 1:
        raise ModelFormatError(f"model must have exactly one root node, found {len(roots)}")
    root = roots[0]
    reached = 0
    for node in root.walk():
        node.depth = 0 if node.parent is None else node.parent.depth + 1
        reached += 1
        if reached > len(nodes):
            raise ModelFormatError("node references form a cycle")
    if reached != len(nodes):
        raise ModelFormatError("some nodes are not reachable from the root")
    return root


def load(data: bytes | str) -> ClusteringTree:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('format_version')!r}")
    try:
        features = _features_from_dict(doc["schema"])
        root = _link_nodes(doc["nodes"], features)
        cfg_raw = dict(doc["config"])
        config = FitConfig(**cfg_raw)
        objective = doc["objective"]
        provenance = doc["provenance"]
        tree = ClusteringTree(
            root,
            config,
            features,
            algorithm=provenance["algorithm"],
            weight=MixedWeight(objective["mixed_weight"], objective["rho"], objective["epsilon"]),
            global_dists=tuple(tuple(d) for d in objective["global_distributions"]),
            fairness_weights=tuple(objective["fairness_weights"]),
            fingerprint=provenance["dataset_fingerprint"],
            timestamp=provenance["timestamp"],
            n_samples=provenance["n_samples"],
            exhausted=objective["exhausted"],
            negative_gain_splits=objective["negative_gain_splits"],
            total_compactness=objective["total_compactness"],
            total_fairness=objective["total_fairness"],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"model document is incomplete or malformed: {e!r}") from None
    except ConfigError as e:
        raise ModelFormatError(f"model configuration is invalid: {e}") from None
    return tree


def load_model(path: str | os.PathLike) -> ClusteringTree:
    try:
        with open(path, "rb") as f:
            return load(f.read())
    except FileNotFoundError:
        raise ModelFormatError(f"model file not found: {path}") from None

"""
Run report: what was fitted, how compact and how fair the result is.

Written as JSON for tools and as aligned text for people; the per-leaf table
is also available as rows for a CSV file.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from clustering.losses import NodeStats, categorical_mode_loss, fairness_deviation, two_pass_sse
from clustering.tree import IFCT, ClusteringTree, leaf_table
from dataio.dataset import Dataset
from dataio.profile import compute_profile
from evaluation.metrics import accuracy, fairness_report, group_contingency, nmi
from modelio.export import rule_path
from utils.errors import MetricError
from utils.pathfinder import output_path

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    algorithm: str
    k: int
    lam: float | None
    n: int
    d_n: int
    d_c: int
    n_attributes: int
    total_compactness: float
    total_fairness: float
    leaves: list[dict[str, Any]] = field(default_factory=list)
    accuracy: float | None = None
    nmi: float | None = None
    fairness: dict[str, Any] = field(default_factory=dict)
    fit_seconds: float | None = None
    exhausted: bool = False
    negative_gain_splits: int = 0

    def to_dict(self) -> dict[str, Any]:
        out = {
            "algorithm": self.algorithm,
            "k": self.k,
            "lambda": self.lam,
            "n": self.n,
            "d_n": self.d_n,
            "d_c": self.d_c,
            "U": self.n_attributes,
            "total_compactness": self.total_compactness,
            "total_fairness": self.total_fairness,
            "exhausted": self.exhausted,
            "negative_gain_splits": self.negative_gain_splits,
        }
        if self.accuracy is not None:
            out["ACC"] = self.accuracy
            out["NMI"] = self.nmi
        if self.fairness:
            out["fairness"] = self.fairness
        if self.fit_seconds is not None:
            out["fit_seconds"] = self.fit_seconds
        out["leaves"] = self.leaves
        return out

    def to_text(self) -> str:
        head = [
            ("algorithm", self.algorithm),
            ("k", self.k),
            ("lambda", "-" if self.lam is None else f"{self.lam:g}"),
            ("n / d_n / d_c / U", f"{self.n} / {self.d_n} / {self.d_c} / {self.n_attributes}"),
            ("compactness", f"{self.total_compactness:.6g}"),
            ("fairness deviation", f"{self.total_fairness:.6g}"),
        ]
        if self.accuracy is not None:
            head += [("ACC", f"{self.accuracy:.4f}"), ("NMI", f"{self.nmi:.4f}")]
        for name, values in self.fairness.get("per_attribute", {}).items():
            head.append((f"BAL / MNCE [{name}]", f"{values['BAL']:.4f} / {values['MNCE']:.4f}"))
        for name, message in self.fairness.get("errors", {}).items():
            head.append((f"fairness [{name}]", f"n/a ({message})"))
        average = self.fairness.get("average")
        if average:
            head.append(("BAL / MNCE [mean]", f"{average['BAL']:.4f} / {average['MNCE']:.4f}"))
        if self.fit_seconds is not None:
            head.append(("fit time", f"{self.fit_seconds:.3f} s"))
        if self.exhausted:
            head.append(("warning", "no feasible split left before k leaves"))
        width = max(len(key) for key, _ in head)
        lines = [f"{key.ljust(width)}  {value}" for key, value in head]
        if self.leaves:
            table = pd.DataFrame(self.leaves).drop(columns=["rule"], errors="ignore")
            lines += ["", table.to_string(index=False, float_format=lambda v: f"{v:.4g}")]
        return "\n".join(lines) + "\n"

    def leaf_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.leaves)


def _data_leaves(
    tree: ClusteringTree,
    ds: Dataset,
    pred: np.ndarray,
    encoded: tuple[np.ndarray, np.ndarray],
    weights: tuple[float, ...] | None,
) -> list[dict[str, Any]]:
    """
    Per-cluster rows measured on `ds` rather than on the fitting data.

    Compactness keeps the fit's categorical weight; fairness deviation is
    taken against the group distribution of `ds` itself. A cluster that no
    row reaches has size 0 and no loss values.
    """
    num, cat = encoded
    w = tree.weight.value if tree.weight is not None else 0.0
    profile = compute_profile(ds, weights) if ds.n_attributes else None
    rows = []
    for leaf in tree.leaves:
        members = np.flatnonzero(pred == leaf.cluster_id)
        row: dict[str, Any] = {"cluster": leaf.cluster_id, "size": int(members.size)}
        group_counts = tuple(
            np.bincount(ds.sens[members, u], minlength=m) for u, m in enumerate(ds.group_sizes)
        )
        if members.size:
            stats = NodeStats(
                int(members.size),
                np.zeros(0),
                np.zeros(0),
                tuple(np.unique(column, return_counts=True)[1] for column in cat[members].T),
                group_counts,
            )
            row["compactness"] = two_pass_sse(num[members]) + w * categorical_mode_loss(stats)
            row["fairness"] = fairness_deviation(stats, profile)
        else:
            row["compactness"] = row["fairness"] = None
        for u, name in enumerate(ds.features.sens_names):
            for g, token in enumerate(ds.features.sens_tokens[u]):
                row[f"{name}={token}"] = group_counts[u][g] / members.size if members.size else None
        rows.append(row)
    return rows


def build_report(
    tree: ClusteringTree,
    ds: Dataset,
    pred: np.ndarray,
    fit_seconds: float | None = None,
    encoded: tuple[np.ndarray, np.ndarray] | None = None,
) -> RunReport:
    """
    Score `pred` (one cluster id per row of `ds`) against the dataset's labels
    and sensitive columns. Fairness problems with one attribute are reported
    per attribute instead of failing the whole report.

    Without `encoded` the per-leaf table is the one recorded at fit time, so
    `ds` must be the fitting data. With `encoded` (the model-unit feature
    arrays of `ds`) the leaves and totals are measured on `ds`.
    """
    weights = None
    if tree.features.sens_names == ds.features.sens_names and tree.fairness_weights:
        weights = tree.fairness_weights
    if encoded is None:
        leaves = leaf_table(tree)
        total_compactness, total_fairness = tree.total_compactness, tree.total_fairness
    else:
        leaves = _data_leaves(tree, ds, pred, encoded, weights)
        total_compactness = float(sum(row["compactness"] or 0.0 for row in leaves))
        total_fairness = float(sum(row["fairness"] or 0.0 for row in leaves))
    for row, leaf in zip(leaves, tree.leaves):
        row["rule"] = rule_path(leaf, tree.features)

    report = RunReport(
        algorithm=tree.algorithm,
        k=tree.k,
        lam=tree.config.lam if tree.algorithm == IFCT else None,
        n=ds.n,
        d_n=ds.d_n,
        d_c=ds.d_c,
        n_attributes=ds.n_attributes,
        total_compactness=total_compactness,
        total_fairness=total_fairness,
        leaves=leaves,
        fit_seconds=fit_seconds,
        exhausted=tree.exhausted,
        negative_gain_splits=tree.negative_gain_splits,
    )
    if ds.labels is not None:
        report.accuracy = accuracy(pred, ds.labels)
        report.nmi = nmi(pred, ds.labels)
    if ds.n_attributes:
        try:
            gc = group_contingency(pred, ds.sens, ds.group_sizes, ds.features.sens_names, n_clusters=tree.k)
            report.fairness = fairness_report(gc, weights, strict=False).to_dict()
        except MetricError as e:
            logger.warning("Fairness metrics unavailable: %s", e)
            report.fairness = {"errors": {"all": str(e)}}
        for name, message in report.fairness.get("errors", {}).items():
            logger.warning("Fairness metrics for '%s' unavailable: %s", name, message)
    return report


def write_report(report: RunReport, path: str | os.PathLike) -> None:
    with open(output_path(path), "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, indent=2)
        f.write("\n")


def write_leaf_table(report: RunReport, path: str | os.PathLike) -> None:
    report.leaf_frame().to_csv(output_path(path), index=False, lineterminator="\n")

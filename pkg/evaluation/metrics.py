"""
Clustering quality and group fairness measures.

    ACC   best one-to-one matching of clusters to classes (Hungarian assignment)
    NMI   mutual information over the arithmetic mean of the two entropies
    BAL   min over clusters of the smallest group share inside the cluster
    MNCE  min cluster group-entropy divided by the global group entropy

Entropies use the natural logarithm; both NMI and MNCE are ratios, so the
base does not change their values.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import entropy
from sklearn.metrics import normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix

from utils.errors import MetricError


def _check_lengths(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise MetricError(f"prediction and truth lengths differ ({pred.size} vs {truth.size})")
    if pred.size == 0:
        raise MetricError("cannot score an empty assignment")
    return pred, truth


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray  # k_pred x k_true

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def contingency_table(pred, truth) -> ContingencyTable:
    pred, truth = _check_lengths(pred, truth)
    return ContingencyTable(contingency_matrix(pred, truth))


def accuracy(pred, truth) -> float:
    table = contingency_table(pred, truth)
    rows, cols = linear_sum_assignment(table.counts, maximize=True)
    return float(table.counts[rows, cols].sum()) / table.n


def nmi(pred, truth) -> float:
    pred, truth = _check_lengths(pred, truth)
    if len(np.unique(pred)) < 2 or len(np.unique(truth)) < 2:
        return 0.0
    return float(normalized_mutual_info_score(truth, pred, average_method="arithmetic"))


@dataclass(frozen=True)
class GroupContingency:
    """Per attribute: clusters x groups counts |cluster_i ∩ group_j|."""

    tables: tuple[np.ndarray, ...]
    names: tuple[str, ...] = ()


def group_contingency(
    pred,
    sens: np.ndarray,
    group_sizes: Sequence[int] | None = None,
    names: Sequence[str] = (),
    n_clusters: int | None = None,
) -> GroupContingency:
    """
    Build the tables over the clusters that occur in `pred`, or over cluster
    ids 0..n_clusters-1 when given, so that a cluster with no rows shows up
    as an empty row.
    """
    pred = np.asarray(pred)
    sens = np.asarray(sens).reshape(len(pred), -1)
    if sens.shape[1] == 0:
        raise MetricError("no sensitive attribute to evaluate")
    if n_clusters is None:
        _, rows = np.unique(pred, return_inverse=True)
        k = rows.max() + 1
    else:
        if np.any((pred < 0) | (pred >= n_clusters)):
            raise MetricError(f"cluster ids must lie in 0..{n_clusters - 1}")
        rows, k = pred, n_clusters
    tables = []
    for u in range(sens.shape[1]):
        m = group_sizes[u] if group_sizes is not None else int(sens[:, u].max()) + 1
        table = np.zeros((k, m), dtype=np.int64)
        np.add.at(table, (rows, sens[:, u]), 1)
        tables.append(table)
    names = tuple(names) or tuple(f"s{u}" for u in range(sens.shape[1]))
    return GroupContingency(tuple(tables), names)


def _table(gc: GroupContingency, attribute: int) -> np.ndarray:
    table = gc.tables[attribute]
    if np.any(table.sum(axis=1) == 0):
        raise MetricError("balance and entropy are undefined for an empty cluster")
    return table


def balance(gc: GroupContingency, attribute: int) -> float:
    table = _table(gc, attribute)
    return float((table.min(axis=1) / table.sum(axis=1)).min())


def mnce(gc: GroupContingency, attribute: int) -> float:
    table = _table(gc, attribute)
    global_entropy = entropy(table.sum(axis=0))
    if global_entropy <= 0:
        raise MetricError(f"attribute '{gc.names[attribute]}' has a single global group; MNCE is undefined")
    return float(entropy(table, axis=1).min() / global_entropy)


@dataclass
class FairnessReport:
    per_attribute: dict[str, dict[str, float]] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    average: dict[str, float] = field(default_factory=dict)
    weighted_average: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"per_attribute": self.per_attribute, "average": self.average, "weighted_average": self.weighted_average}
        if self.errors:
            out["errors"] = self.errors
        return out


def fairness_report(gc: GroupContingency, weights: Sequence[float] | None = None, strict: bool = True) -> FairnessReport:
    """
    BAL and MNCE for every attribute plus their plain mean across attributes
    and the mean weighted by `weights`.

    With `strict` off, an attribute that cannot be scored is reported under
    `errors` and left out of the averages instead of raising.
    """
    report = FairnessReport()
    scored, used_weights = [], []
    w = np.full(len(gc.tables), 1.0) if weights is None else np.asarray(weights, dtype=np.float64)
    for u, name in enumerate(gc.names):
        try:
            values = {"BAL": balance(gc, u), "MNCE": mnce(gc, u)}
        except MetricError as e:
            if strict:
                raise
            report.errors[name] = str(e)
            continue
        report.per_attribute[name] = values
        scored.append(values)
        used_weights.append(w[u])
    if scored:
        for metric in ("BAL", "MNCE"):
            column = np.array([values[metric] for values in scored])
            report.average[metric] = float(column.mean())
            uw = np.asarray(used_weights)
            report.weighted_average[metric] = float(column @ uw / uw.sum()) if uw.sum() > 0 else float(column.mean())
    return report

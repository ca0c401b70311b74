from itertools import permutations

import numpy as np
import pytest

from evaluation.metrics import accuracy, balance, fairness_report, group_contingency, mnce, nmi
from utils.errors import MetricError


def test_accuracy_examples():
    assert accuracy([1, 1, 0, 0], [0, 0, 1, 1]) == 1.0
    assert accuracy([0, 1, 0, 1], [0, 0, 1, 1]) == 0.5
    assert accuracy([2, 0, 1, 1], [2, 0, 1, 1]) == 1.0
    with pytest.raises(MetricError):
        accuracy([0, 1], [0, 1, 1])


def brute_force_accuracy(pred, truth):
    clusters, classes = np.unique(pred), np.unique(truth)
    slots = list(classes) + [None] * max(0, len(clusters) - len(classes))
    best = 0
    for assignment in permutations(slots, len(clusters)):
        hits = sum(int(np.sum((pred == c) & (truth == t))) for c, t in zip(clusters, assignment) if t is not None)
        best = max(best, hits)
    return best / len(pred)


def test_accuracy_matches_all_injections():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        pred = rng.integers(0, int(rng.integers(1, 5)), size=n)
        truth = rng.integers(0, int(rng.integers(1, 5)), size=n)
        assert accuracy(pred, truth) == pytest.approx(brute_force_accuracy(pred, truth))


def test_nmi_examples():
    assert nmi([0, 0, 1, 1], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0
    assert nmi([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-12)


def test_balance_examples():
    assert balance(group_contingency([0, 0, 1, 1], [0, 1, 0, 1]), 0) == 0.5
    gc = group_contingency([0, 0, 0, 0, 1, 1, 1, 1], [0, 0, 0, 1, 0, 0, 1, 1])
    assert balance(gc, 0) == 0.25
    assert balance(group_contingency([0, 0, 1, 1], [0, 0, 0, 1]), 0) == 0.0


def test_mnce_examples():
    assert mnce(group_contingency([0, 0, 1, 1], [0, 1, 0, 1]), 0) == pytest.approx(1.0)
    gc = group_contingency([0, 0, 1, 1], [0, 0, 0, 1])
    assert mnce(gc, 0) == 0.0
    with pytest.raises(MetricError, match="single global group"):
        mnce(group_contingency([0, 1], [0, 0]), 0)


def test_empty_cluster_is_an_error():
    gc = group_contingency([0, 0, 1], [0, 1, 0], group_sizes=[2])
    gc.tables[0][1] = 0
    with pytest.raises(MetricError, match="empty cluster"):
        balance(gc, 0)


def test_clusters_without_rows_are_kept_when_k_is_given():
    gc = group_contingency([0, 0, 1], [0, 1, 0], group_sizes=[2], n_clusters=3)
    assert gc.tables[0].tolist() == [[1, 1], [1, 0], [0, 0]]
    with pytest.raises(MetricError, match="empty cluster"):
        balance(gc, 0)
    with pytest.raises(MetricError, match="0..1"):
        group_contingency([0, 2], [0, 1], n_clusters=2)


def test_fairness_report_averages():
    pred = [0, 0, 0, 0, 1, 1, 1, 1]
    sens = np.array([[0, 0], [0, 1], [1, 0], [1, 1], [0, 0], [1, 1], [0, 0], [1, 0]])
    report = fairness_report(group_contingency(pred, sens, names=["a", "b"]), weights=[3.0, 1.0])
    bal_a = report.per_attribute["a"]["BAL"]
    bal_b = report.per_attribute["b"]["BAL"]
    assert report.average["BAL"] == pytest.approx((bal_a + bal_b) / 2)
    assert report.weighted_average["BAL"] == pytest.approx(0.75 * bal_a + 0.25 * bal_b)

    single = fairness_report(group_contingency([0, 1], [[0], [1]]))
    assert single.average["BAL"] == single.per_attribute["s0"]["BAL"]


def test_lenient_report_skips_degenerate_attribute():
    sens = np.array([[0, 0], [1, 0], [0, 0], [1, 0]])
    gc = group_contingency([0, 0, 1, 1], sens, names=["sex", "const"])
    with pytest.raises(MetricError):
        fairness_report(gc)
    report = fairness_report(gc, strict=False)
    assert set(report.per_attribute) == {"sex"}
    assert "const" in report.errors
    assert report.average["MNCE"] == pytest.approx(1.0)

import numpy as np
import pytest

from clustering.losses import (
    MixedWeight,
    NodeStats,
    categorical_mode_loss,
    compactness_loss,
    fairness_deviation,
    mixed_weight,
    node_objective,
    numerical_sse,
    two_pass_sse,
)
from dataio.dataset import Dataset
from dataio.profile import compute_profile


def stats_of(ds: Dataset) -> NodeStats:
    return NodeStats.from_indices(ds, np.arange(ds.n))


def test_numerical_sse():
    assert numerical_sse(stats_of(Dataset.from_arrays(num=[[3.0]]))) == 0.0
    assert numerical_sse(stats_of(Dataset.from_arrays(num=[[0.0], [2.0]]))) == pytest.approx(2.0)
    assert numerical_sse(stats_of(Dataset.from_arrays(num=[[0.0, 0.0], [2.0, 0.0]]))) == pytest.approx(2.0)
    assert two_pass_sse(np.array([[0.0], [0.1], [5.0], [5.1]])) == pytest.approx(25.01)


def test_mode_loss():
    assert categorical_mode_loss(stats_of(Dataset.from_arrays(cat=[["a"], ["a"], ["a"]]))) == 0
    assert categorical_mode_loss(stats_of(Dataset.from_arrays(cat=[["a"], ["a"], ["b"], ["c"]]))) == 2
    two = Dataset.from_arrays(cat=[["a", "x"], ["a", "y"], ["b", "y"]])
    assert categorical_mode_loss(stats_of(two)) == 2


def test_mixed_weight():
    rng = np.random.default_rng(0)
    ds = Dataset.from_arrays(num=rng.normal(size=(10, 3)), cat=rng.integers(0, 3, size=(10, 2)))
    w = mixed_weight(stats_of(ds), ds.d_n, ds.d_c)
    assert w.rho == pytest.approx(0.6)
    expected = 0.4 * numerical_sse(stats_of(ds)) / (0.6 * categorical_mode_loss(stats_of(ds)) + w.epsilon)
    assert w.value == pytest.approx(expected)

    only_num = Dataset.from_arrays(num=[[0.0], [1.0]])
    assert mixed_weight(stats_of(only_num), 1, 0) == MixedWeight(0.0, 1.0)
    only_cat = Dataset.from_arrays(cat=[["a"], ["b"]])
    assert mixed_weight(stats_of(only_cat), 0, 1).value == 1.0


def test_compactness_loss_combines_terms():
    ds = Dataset.from_arrays(num=[[0.0], [2.0], [0.0], [2.0]], cat=[["a"], ["a"], ["b"], ["c"]])
    # SSE 4, mode loss 2
    assert compactness_loss(stats_of(ds), MixedWeight(0.5, 0.5)) == pytest.approx(5.0)
    singleton = Dataset.from_arrays(num=[[1.0]], cat=[["a"]])
    assert compactness_loss(stats_of(singleton), MixedWeight(0.5, 0.5)) == 0.0


def test_fairness_deviation():
    ds = Dataset.from_arrays(num=np.zeros((4, 1)), sens=[[0, 0], [1, 0], [0, 1], [1, 1]])
    profile = compute_profile(ds)
    assert fairness_deviation(stats_of(ds), profile) == 0.0
    left = NodeStats.from_indices(ds, np.array([0, 2]))
    # attribute 0 is pure (deviation 1.0), attribute 1 is balanced (0.0)
    assert fairness_deviation(left, profile) == pytest.approx(0.5)
    assert fairness_deviation(stats_of(ds), None) == 0.0


def test_node_objective():
    ds = Dataset.from_arrays(num=[[0.0], [0.1], [5.0], [5.1]], sens=[[0], [1], [0], [1]])
    profile = compute_profile(ds)
    w = MixedWeight(0.0, 1.0)
    root = stats_of(ds)
    assert node_objective(root, w, profile, 0.0) == compactness_loss(root, w)
    single = NodeStats.from_indices(ds, np.array([0]))
    assert node_objective(single, w, profile, 10.0) == pytest.approx(10.0)
    pair = NodeStats.from_indices(ds, np.array([0, 2]))
    assert node_objective(pair, w, profile, 100.0) == pytest.approx(12.5 + 100 * 1.0)

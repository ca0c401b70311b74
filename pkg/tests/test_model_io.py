import json

import numpy as np
import pandas as pd
import pytest

from clustering.grow import fit_ifct
from clustering.prune import fit_ifct_p
from clustering.tree import FitConfig
from dataio.dataset import Dataset, load_csv
from dataio.schema import load_schema
from modelio.document import load, load_model, save, save_model
from modelio.export import export_dot, export_rules
from modelio.predict import assign_dataset, predict_batch
from utils.errors import DataError, ModelFormatError, RoutingError
from tests.conftest import toy_dataset


def mixed_tree(standardize=False):
    rng = np.random.default_rng(2)
    ds = Dataset.from_arrays(
        num=rng.normal(size=(120, 2)) * [1.0, 30.0],
        cat=rng.choice(["red", "green", "dark blue"], size=(120, 1)),
        sens=rng.integers(0, 2, size=(120, 1)),
        cat_names=["color"],
    )
    return fit_ifct(ds, FitConfig(k=6, lam=20.0, standardize=standardize)), ds


def test_root_only_document():
    tree = fit_ifct(toy_dataset(), FitConfig(k=1))
    doc = json.loads(save(tree))
    assert doc["format_version"] == 1
    assert len(doc["nodes"]) == 1
    assert doc["nodes"][0]["kind"] == "leaf" and doc["nodes"][0]["cluster"] == 0
    assert doc["provenance"]["timestamp"] is None


@pytest.mark.parametrize("standardize", [False, True])
def test_save_load_save_is_byte_identical(standardize):
    tree, _ = mixed_tree(standardize)
    first = save(tree)
    assert save(load(first)) == first
    again, _ = mixed_tree(standardize)
    assert save(again) == first


def test_loaded_model_routes_like_the_fitted_tree():
    tree, _ = mixed_tree(standardize=True)
    loaded = load(save(tree))
    rng = np.random.default_rng(9)
    num = rng.normal(size=(10_000, 2)) * [2.0, 50.0]
    cat = rng.integers(0, 3, size=(10_000, 1))
    assert np.array_equal(loaded.assign(num, cat), tree.assign(num, cat))


def test_ifct_p_model_round_trip(tmp_path):
    tree = fit_ifct_p(toy_dataset([0, 1, 0, 1]), FitConfig(k=2))
    save_model(tree, tmp_path / "m.json")
    loaded = load_model(tmp_path / "m.json")
    assert loaded.algorithm == "IFCT-P"
    assert loaded.k == 2


def _document():
    tree = fit_ifct(toy_dataset([0, 1, 0, 1]), FitConfig(k=2, lam=1.0))
    return json.loads(save(tree))


def test_invalid_documents_are_rejected():
    doc = _document()
    doc["nodes"][0]["left"] = 99
    with pytest.raises(ModelFormatError, match="missing its left child"):
        load(json.dumps(doc))

    doc = _document()
    doc["nodes"].append(dict(doc["nodes"][1], id=7))
    with pytest.raises(ModelFormatError, match="exactly one root"):
        load(json.dumps(doc))

    doc = _document()
    doc["nodes"][0]["right"] = doc["nodes"][0]["left"]
    with pytest.raises(ModelFormatError, match="more than one parent"):
        load(json.dumps(doc))

    doc = _document()
    doc["format_version"] = 2
    with pytest.raises(ModelFormatError, match="version"):
        load(json.dumps(doc))

    with pytest.raises(ModelFormatError, match="not valid JSON"):
        load(b"{nope")
    with pytest.raises(ModelFormatError, match="not found"):
        load_model("/nonexistent/model.json")


def test_export_rules():
    tree = fit_ifct(toy_dataset([0, 1, 0, 1]), FitConfig(k=2))
    assert export_rules(tree) == "cluster 0 (n=2): x0 ≤ 2.55\ncluster 1 (n=2): x0 > 2.55\n"
    root_only = fit_ifct(toy_dataset(), FitConfig(k=1))
    assert export_rules(root_only) == "cluster 0 (n=4): (all samples)\n"


def test_export_rules_for_categories():
    ds = Dataset.from_arrays(cat=[["a"], ["a"], ["b"], ["b"]], cat_names=["job"])
    text = export_rules(fit_ifct(ds, FitConfig(k=2)))
    assert "job ∈ {a}" in text.splitlines()[0]
    assert "job ∉ {a}" in text.splitlines()[1]


def test_export_dot():
    assert export_dot(fit_ifct(toy_dataset(), FitConfig(k=1))).count("[label=") == 1
    dot = export_dot(fit_ifct(toy_dataset([0, 1, 0, 1]), FitConfig(k=2)))
    assert dot.startswith("digraph")
    assert dot.count("->") == 2
    assert dot.count("shape=ellipse") == 2
    assert "s0: 0=0.500, 1=0.500" in dot

    ds = Dataset.from_arrays(cat=[["dark blue"], ["dark blue"], ["red"], ["red"]], cat_names=["color"])
    assert "'dark blue'" in export_dot(fit_ifct(ds, FitConfig(k=2)))


def test_predict_batch_reproduces_fitted_clusters(write_table):
    rng = np.random.default_rng(4)
    columns = {
        "a": rng.normal(size=50).round(3),
        "b": rng.choice(["u", "v", "w"], size=50),
        "g": rng.choice(["f", "m"], size=50),
    }
    csv, schema = write_table(columns, {"a": "numerical", "b": "categorical", "g": "sensitive"})
    ds = load_csv(csv, load_schema(schema))
    tree = fit_ifct(ds, FitConfig(k=4, lam=2.0))
    frame = predict_batch(load(save(tree)), csv)
    assert list(frame.columns)[-1] == "cluster"
    assert frame["cluster"].tolist() == tree.fitted_labels().tolist()
    assert assign_dataset(tree, ds).tolist() == tree.fitted_labels().tolist()


def test_predict_batch_unknown_category(tmp_path):
    ds = Dataset.from_arrays(cat=[["a"], ["a"], ["b"], ["b"]], cat_names=["job"])
    tree = fit_ifct(ds, FitConfig(k=2))
    csv = tmp_path / "new.csv"
    pd.DataFrame({"job": ["a", "zzz", "b"], "cluster": [9, 9, 9]}).to_csv(csv, index=False)
    with pytest.raises(RoutingError, match="row 1, column 'job'"):
        predict_batch(tree, csv)
    frame = predict_batch(tree, csv, permissive=True)
    assert frame["cluster"].tolist() == [0, 1, 1]
    assert list(frame.columns) == ["job", "cluster"]


def test_predict_batch_rejects_rows_wider_than_the_header(tmp_path):
    tree = fit_ifct(Dataset.from_arrays(num=[[0.0], [1.0]], num_names=["x"]), FitConfig(k=2))
    csv = tmp_path / "wide.csv"
    csv.write_text("x\n0,7\n1,8\n", encoding="utf-8")
    with pytest.raises(DataError, match="not a readable CSV"):
        predict_batch(tree, csv)


def test_export_dot_escapes_quotes_in_labels():
    ds = Dataset.from_arrays(cat=[['say "hi"'], ['say "hi"'], ["x"], ["x"]], cat_names=["greeting"])
    dot = export_dot(fit_ifct(ds, FitConfig(k=2)))
    assert '\\"hi\\"' in dot
    assert dot.rstrip().endswith("}")

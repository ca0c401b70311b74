import io
import json

import pandas as pd
import pytest

from cli.commands import EXIT_ERROR, EXIT_EXHAUSTED, EXIT_OK, main


@pytest.fixture
def blobs(tmp_path):
    data = tmp_path / "blobs.csv"
    assert main(["synth", "--blobs", "2", "--n", "40", "--seed", "1", "--out", str(data)]) == EXIT_OK
    return data, tmp_path / "blobs.schema.json"


def fit_args(data, schema, out, *extra):
    return ["fit", "--data", str(data), "--schema", str(schema), "--out", str(out), *extra]


def test_synth_is_reproducible(tmp_path, blobs):
    data, schema = blobs
    again = tmp_path / "again.csv"
    main(["synth", "--blobs", "2", "--n", "40", "--seed", "1", "--out", str(again)])
    assert again.read_bytes() == data.read_bytes()
    frame = pd.read_csv(data)
    assert len(frame) == 80
    assert json.loads(schema.read_text()) == {"x0": "numerical", "x1": "numerical", "group": "sensitive", "label": "label"}


def test_synth_rejects_bad_probability(tmp_path):
    assert main(["synth", "--p", "1.5", "--out", str(tmp_path / "d.csv")]) == EXIT_ERROR
    assert main(["synth", "--p", "0.9,0.1", "--blobs", "2", "--out", str(tmp_path / "d.csv")]) == EXIT_OK


def test_fit_writes_model_and_reports(tmp_path, blobs, capsys):
    data, schema = blobs
    model = tmp_path / "m.json"
    code = main(fit_args(data, schema, model, "--algo", "ifct", "--k", "2", "--lambda", "1e4"))
    assert code == EXIT_OK
    report = json.loads((tmp_path / "m.report.json").read_text())
    assert report["algorithm"] == "IFCT" and report["k"] == 2
    assert "ACC" in report and "MNCE" in report["fairness"]["per_attribute"]["group"]
    assert len(pd.read_csv(tmp_path / "m.leaves.csv")) == 2
    assert "compactness" in capsys.readouterr().out


def test_fit_is_byte_identical_across_runs(tmp_path, blobs):
    data, schema = blobs
    for name in ("a.json", "b.json"):
        main(fit_args(data, schema, tmp_path / name, "--algo", "ifct-p", "--k", "3"))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_lambda_flag_rules(tmp_path, blobs):
    data, schema = blobs
    out = tmp_path / "m.json"
    assert main(fit_args(data, schema, out, "--algo", "ifct-p", "--k", "2", "--lambda", "5")) == EXIT_ERROR
    assert main(fit_args(data, schema, out, "--algo", "ifct", "--k", "2")) == EXIT_ERROR
    assert main(fit_args(data, schema, out, "--algo", "kmeans", "--k", "2")) == EXIT_ERROR


def test_fit_exhaustion_exit_code(tmp_path, write_table):
    data, schema = write_table({"x": [0.0, 1.0, 2.0, 3.0]}, {"x": "numerical"})
    out = tmp_path / "m.json"
    assert main(fit_args(data, schema, out, "--algo", "ifct", "--k", "10", "--lambda", "0")) == EXIT_EXHAUSTED
    assert len(json.loads(out.read_text())["nodes"]) == 7


def test_predict_evaluate_export(tmp_path, blobs, capsys, write_table):
    data, schema = blobs
    model = tmp_path / "m.json"
    main(fit_args(data, schema, model, "--algo", "ifct", "--k", "2", "--lambda", "100", "--weights", "group=1"))
    capsys.readouterr()

    assert main(["predict", "--model", str(model), "--data", str(data)]) == EXIT_OK
    predicted = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert list(predicted.columns)[-1] == "cluster"
    assert len(predicted) == 80

    assert main(["evaluate", "--model", str(model), "--data", str(data), "--schema", str(schema)]) == EXIT_OK
    assert "ACC" in capsys.readouterr().out

    unlabelled, unlabelled_schema = write_table(
        predicted[["x0", "x1", "group"]], {"x0": "numerical", "x1": "numerical", "group": "sensitive"}, name="nolabel"
    )
    report_path = tmp_path / "eval.json"
    main(["evaluate", "--model", str(model), "--data", str(unlabelled), "--schema", str(unlabelled_schema), "--out", str(report_path)])
    report = json.loads(report_path.read_text())
    assert "ACC" not in report and "NMI" not in report

    assert main(["export", "--model", str(model)]) == EXIT_OK
    assert capsys.readouterr().out.count("cluster ") == 2
    assert main(["export", "--model", str(model), "--format", "dot"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("digraph")


def test_unknown_weight_name(tmp_path, blobs):
    data, schema = blobs
    code = main(fit_args(data, schema, tmp_path / "m.json", "--algo", "ifct", "--k", "2", "--lambda", "1", "--weights", "age=1"))
    assert code == EXIT_ERROR


def test_sweep(tmp_path, blobs):
    data, schema = blobs
    out = tmp_path / "sweep.csv"
    base = ["sweep", "--data", str(data), "--schema", str(schema), "--k", "2", "--out", str(out)]
    assert main(base + ["--log-range", "2:6:5"]) == EXIT_OK
    frame = pd.read_csv(out)
    assert frame["lambda"].tolist() == pytest.approx([1e2, 1e3, 1e4, 1e5, 1e6])

    assert main(base + ["--lambdas", "1000"]) == EXIT_OK
    single = pd.read_csv(out)
    assert len(single) == 1
    for metric in ("ACC", "NMI", "BAL", "MNCE", "compactness", "fairness"):
        if single[metric].iloc[0] > 0:
            assert single[f"{metric}_norm"].iloc[0] == 1.0

    assert main(base + ["--lambdas", ""]) == EXIT_ERROR


def test_bench(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--sizes", "40,80", "--k", "2", "--out", str(out)]) == EXIT_OK
    frame = pd.read_csv(out)
    assert frame["n"].tolist() == [40, 80]
    assert (frame["seconds"] > 0).all()

from __future__ import annotations

import numpy as np
import pytest

from ordinal_aa import io
from ordinal_aa.cli import main
from ordinal_aa.core import OrdinalMatrix

FAST = ["--max-epochs", "40", "--restarts", "2"]


@pytest.fixture()
def dataset(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["synth", "--n", "40", "--m", "6", "--seed", "1", "--bias", "--out", str(path)]) == 0
    return path


def test_synth_defaults(tmp_path, capsys):
    path = tmp_path / "s.csv"
    assert main(["synth", "--out", str(path)]) == 0
    X, ids = io.read_dataset(path)
    assert X.shape == (20, 1000) and X.p == 5
    truth = io.load_ground_truth(tmp_path / "s.truth.json")
    assert truth["S_true"].shape == (3, 1000)
    assert "1000 respondents x 20 questions" in capsys.readouterr().out


def test_synth_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        main(["synth", "--n", "30", "--m", "4", "--seed", "7", "--out", str(path)])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("method", ["aa", "tsaa", "oaa", "rboaa"])
def test_fit_writes_model_and_trace(tmp_path, dataset, method, capsys):
    model_path, trace = tmp_path / "m.json", tmp_path / "trace.csv"
    code = main(["fit", "--method", method, "--k", "2", "--data", str(dataset),
                 "--out-model", str(model_path), "--out-trace", str(trace), *FAST])
    assert code == 0
    model = io.load_model(model_path)
    assert model.method == method.upper() and model.K == 2
    rows = io.read_table(trace)
    assert len(rows) == len(model.loss_trace)
    assert "# command: fit" in trace.read_text()
    assert "rmse=" in capsys.readouterr().out


def test_fit_constant_data_k1_has_zero_rmse(tmp_path, capsys):
    path = tmp_path / "const.csv"
    io.save_csv(path, OrdinalMatrix.from_array(np.full((3, 8), 2), p=4))
    assert main(["fit", "--method", "aa", "--k", "1", "--data", str(path), "--out-model", str(tmp_path / "m.json")]) == 0
    out = capsys.readouterr().out
    rmse = float(out.split("rmse=")[1].split()[0])
    assert rmse < 1e-6


def test_sweep_row_count(tmp_path, dataset):
    report = tmp_path / "sweep.csv"
    code = main(["sweep", "--method", "rboaa", "--k-min", "1", "--k-max", "3", "--data", str(dataset),
                 "--out-report", str(report), "--max-epochs", "20", "--restarts", "2"])
    assert code == 0
    rows = io.read_table(report)
    assert len(rows) == 3 * 2
    assert {"loss", "nmi_stability", "K", "restart"} <= set(rows[0])
    assert rows[0]["nmi_stability"] == "1.0" and rows[0]["degenerate"] == "1"


def test_corrupt_eval(tmp_path, dataset, capsys):
    report = tmp_path / "cor.csv"
    code = main(["corrupt-eval", "--methods", "aa,oaa", "--fraction", "0.1", "--k", "2",
                 "--data", str(dataset), "--out-report", str(report), *FAST])
    assert code == 0
    rows = io.read_table(report)
    assert [r["method"] for r in rows] == ["AA", "OAA"]
    assert all(float(r["rmse"]) >= 0 for r in rows)
    assert "# fraction: 0.1" in report.read_text()


def test_exports_and_nmi(tmp_path, dataset, capsys):
    rb, oa = tmp_path / "rb.json", tmp_path / "oa.json"
    for method, path in (("rboaa", rb), ("oaa", oa)):
        main(["fit", "--method", method, "--k", "2", "--data", str(dataset), "--out-model", str(path), *FAST])
    prof = tmp_path / "prof.csv"
    assert main(["export-archetypes", "--model", str(rb), "--data", str(dataset), "--out", str(prof)]) == 0
    rows = io.read_table(prof)
    assert len(rows) == 6 and "archetype_2_response" in rows[0]

    bias, subjects = tmp_path / "bias.csv", tmp_path / "subj.csv"
    assert main(["export-bias", "--model", str(rb), "--out", str(bias), "--out-subjects", str(subjects)]) == 0
    assert [r["level"] for r in io.read_table(bias)] == ["1", "2", "3", "4", "5"]
    assert len(io.read_table(subjects)) == 40 * 5

    alpha = tmp_path / "alpha.csv"
    assert main(["export-bias", "--model", str(oa), "--out", str(alpha)]) == 0
    assert len(io.read_table(alpha)) == 5

    capsys.readouterr()
    assert main(["nmi", "--model-a", str(rb), "--model-b", str(rb)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.0)


def test_errors_exit_nonzero(tmp_path, dataset, capsys):
    assert main(["fit", "--method", "aa", "--k", "99", "--data", str(dataset), "--out-model", str(tmp_path / "m")]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["fit", "--method", "aa", "--k", "2", "--data", str(tmp_path / "missing.csv"),
                 "--out-model", str(tmp_path / "m")]) == 1
    with pytest.raises(SystemExit) as info:
        main(["fit", "--bogus"])
    assert info.value.code != 0


def test_nmi_shape_mismatch(tmp_path, dataset, capsys):
    other = tmp_path / "other.csv"
    main(["synth", "--n", "30", "--m", "6", "--out", str(other)])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["fit", "--method", "aa", "--k", "2", "--data", str(dataset), "--out-model", str(a), *FAST])
    main(["fit", "--method", "aa", "--k", "2", "--data", str(other), "--out-model", str(b), *FAST])
    assert main(["nmi", "--model-a", str(a), "--model-b", str(b)]) == 1

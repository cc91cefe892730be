import csv
import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from gegdyn import analysis, cli


def read_csv(path):
    return list(csv.reader(open(path)))


def test_run_example1(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["run", "--eta", "0.9", "--tau", "1", "--gamma", "0.1", "--out", str(out),
                     "--include-z"])
    assert code == 0
    assert "ConvergedTo" in capsys.readouterr().out
    summary = json.load(open(out / "summary.json"))
    assert summary["verdict"] == "ConvergedTo"
    assert np.linalg.norm(summary["final_point"]) < 1e-7
    rows = read_csv(out / "trace.csv")
    assert rows[0] == ["iter", "grad_norm", "z0", "z1"]
    assert rows[1][2:] == ["1.0", "1.0"]


def test_run_raw_steps_and_gda(tmp_path):
    out = tmp_path / "raw"
    assert cli.main(["run", "--h1x", "0.9", "--h1y", "0.9", "--h2x", "0.09", "--h2y", "0.09",
                     "--out", str(out)]) == 0
    assert json.load(open(out / "summary.json"))["config"]["gamma"] == pytest.approx(0.1)
    assert cli.main(["run", "--variant", "gda", "--eta", "0.5", "--max-iters", "2000",
                     "--out", str(out)]) == 0
    assert json.load(open(out / "summary.json"))["verdict"] != "ConvergedTo"


@pytest.mark.parametrize("argv", [
    ["run", "--eta", "abc"],
    ["run", "--bogus"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["run", "--eta", "-1"],
    ["run", "--problem", "nope"],
    ["run", "--z0", "1,2,3"],
    ["run", "--h1x", "0.1"],
    ["run", "--variant", "adam"],
    ["run", "--max-iters", "-5"],
    ["sweep-table", "--problem", "multi_critical"],
    ["sweep-table", "--rows", "0.1,1"],
    ["analyze", "--box=1:0,0:1"],
    ["basin", "--resolution", "20by10"],
])
def test_bad_values_exit_1(tmp_path, argv, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--version"])
    assert info.value.code == 0
    assert "0.1.0" in capsys.readouterr().out


def test_sweep_table(tmp_path, capsys):
    assert cli.main(["sweep-table", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "table.csv")
    assert len(rows) == 9
    assert rows[0][:6] == ["eta", "tau", "gamma", "tau_eg", "eg_plus", "geg"]
    got = [r[3:6] for r in rows[1:]]
    sim = [r[9:12] for r in rows[1:]]
    assert got == sim
    assert got[0] == ["YES", "YES", "YES"]


def test_sweep_table_disagreement_exit_2(tmp_path, monkeypatch):
    real = analysis.convergence_table

    def flipped(*args, **kwargs):
        table = real(*args, **kwargs)
        row, cells = table[0]
        cells = [dataclasses.replace(cells[0], simulated=not cells[0].simulated)] + list(cells[1:])
        return [(row, cells)] + table[1:]

    monkeypatch.setattr(analysis, "convergence_table", flipped)
    assert cli.main(["sweep-table", "--rows", "0.9,2,0.25", "--out", str(tmp_path)]) == 2


def test_analyze_multi_critical(tmp_path, capsys):
    assert cli.main(["analyze", "--out", str(tmp_path), "--starts", "300"]) == 0
    text = capsys.readouterr().out
    assert "(0.000, 1.000)  GEG-stable YES  saddle YES" in text
    assert "(1.000, 0.000)  GEG-stable NO   saddle NO" in text
    rows = read_csv(tmp_path / "critical_points.csv")
    assert len(rows) == 9
    report = json.load(open(tmp_path / "report.json"))
    assert len(report["points"]) == 8
    assert report["certificate"]["eta"] == 1e-6


def test_analyze_bilinear_certificate(tmp_path):
    assert cli.main(["analyze", "--problem", "bilinear_xy", "--eta", "0.9", "--gamma", "0.1",
                     "--out", str(tmp_path)]) == 0
    report = json.load(open(tmp_path / "report.json"))
    assert report["lipschitz"] == 1.0
    assert report["certificate"]["thm_general_ok"] is True
    assert report["points"][0]["stability"] == "AsymptoticallyStable"


def test_basin_small(tmp_path, capsys):
    assert cli.main(["basin", "--resolution", "16x8", "--eta", "0.01", "--max-iters", "50000",
                     "--out", str(tmp_path)]) == 0
    legend = json.load(open(tmp_path / "legend.json"))
    assert legend["unstable_mass"] == 0.0
    assert legend["resolution"] == [16, 8]
    assert len(read_csv(tmp_path / "grid.csv")) == 16 * 8 + 1
    assert "unstable mass: 0" in capsys.readouterr().out


def test_verify_small(tmp_path, capsys):
    code = cli.main(["verify", "--density", "200", "--seeds", "20", "--suite-size", "10",
                     "--out", str(tmp_path)])
    assert code == 0
    checks = json.load(open(tmp_path / "verify.json"))
    assert all(c["ok"] for c in checks) and len(checks) == 7
    assert capsys.readouterr().out.count("PASS") == 7


def test_verify_failure_exit_2(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "verification_checks", lambda *a: [("always fails", 1.0, False)])
    assert cli.main(["verify", "--out", str(tmp_path)]) == 2


def test_erm_synthetic(tmp_path, capsys):
    assert cli.main(["erm", "--synthetic", "rows=60", "features=4", "--hidden", "8",
                     "--max-iters", "300", "--folds", "3", "--out", str(tmp_path)]) == 0
    summary = json.load(open(tmp_path / "summary.json"))
    assert len(summary["folds"]) == 3
    for fold in summary["folds"]:
        assert fold["final_grad_norm"] < fold["initial_grad_norm"]
    assert (tmp_path / "fold_2.csv").exists()


def test_erm_csv_and_missing_label(tmp_path, capsys):
    rng = np.random.default_rng(0)
    data = tmp_path / "data.csv"
    with open(data, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "target"])
        for _ in range(30):
            a, b = rng.normal(size=2)
            w.writerow([a, b, int(a + b > 0)])
    out = tmp_path / "o"
    assert cli.main(["erm", "--csv", str(data), "--label", "target", "--hidden", "4", "--max-iters", "50",
                     "--folds", "2", "--out", str(out)]) == 0
    assert cli.main(["erm", "--csv", str(data), "--out", str(out)]) == 1
    assert "label" in capsys.readouterr().err
    assert cli.main(["erm", "--csv", str(tmp_path / "missing.csv"), "--out", str(out)]) == 1
    assert cli.main(["erm", "--csv", str(data), "--synthetic", "rows=10", "--out", str(out)]) == 1


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# example 1\neta = 0.9\ngamma = 0.1\nmax_iters = 7\n")
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(cfg), "--max-iters", "11", "--out", str(out)]) == 0
    opts = json.load(open(out / "manifest.json"))["options"]
    assert (opts["eta"], opts["gamma"], opts["max_iters"]) == (0.9, 0.1, 11)
    cfg.write_text("colour = blue\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    cfg.write_text("just words\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "absent"), "--out", str(out)]) == 1


@pytest.mark.parametrize("argv, files", [
    (["run", "--eta", "0.5", "--gamma", "0.3"], ["trace.csv", "summary.json"]),
    (["sweep-table"], ["table.csv"]),
    (["analyze", "--problem", "quadratic_counterexample", "--eta", "0.7", "--gamma", "0.2"],
     ["critical_points.csv", "report.json"]),
    (["basin", "--resolution", "8x4", "--eta", "0.01", "--max-iters", "20000"], ["grid.csv", "legend.json"]),
    (["erm", "--synthetic", "rows=40", "features=3", "--hidden", "4", "--max-iters", "40", "--folds", "2"],
     ["fold_0.csv", "fold_1.csv", "summary.json"]),
])
def test_manifest_reproduces_outputs(tmp_path, argv, files):
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.main(argv + ["--out", str(first)]) == 0
    assert cli.main([argv[0], "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
    for name in files + ["manifest.json"]:
        a, b = (first / name).read_bytes(), (second / name).read_bytes()
        if name == "manifest.json":
            a, b = a.replace(str(first).encode(), b""), b.replace(str(second).encode(), b"")
        assert a == b, name


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gegdyn", "run", "--out", str(tmp_path), "--eta", "0.9",
                          "--gamma", "0.1"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "ConvergedTo" in out.stdout

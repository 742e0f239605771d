import json
import subprocess
import sys

import pytest

from flexact.cli import main

CFG = {
    "model": {"kind": "lstm", "layer_sizes": [3, 4]},
    "data": {"synth": {"d": 3, "T": 150}},
    "epochs": 1,
    "n_trials": 2,
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CFG))
    return path


def test_count(capsys, tmp_path):
    assert main(["count", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    for row in ("[7, 20, 10]", "3480", "5.1%", "47355", "168", "0.73%"):
        assert row in out
    assert (tmp_path / "counts.csv").read_text().count("\n") == 15


def test_run_and_ttest(capsys, config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(config), "--out", str(a)]) == 0
    assert main(["run", "--config", str(config), "--out", str(b), "--seed", "7", "--trials", "3"]) == 0
    assert (a / "curves.csv").exists() and len((b / "final.csv").read_text().splitlines()) == 4
    capsys.readouterr()
    assert main(["ttest", str(a / "final.csv"), str(b / "final.csv")]) == 0
    header, values = capsys.readouterr().out.splitlines()
    assert header == "t,df,p,degenerate"
    assert 0.0 <= float(values.split(",")[2]) <= 1.0


def test_grid(capsys, config, tmp_path):
    assert main(["grid", "--config", str(config), "--out", str(tmp_path), "--axis", "lr", "--lo", "1e-3", "--hi", "1e-2", "--points", "2"]) == 0
    lines = (tmp_path / "grid_lr.csv").read_text().splitlines()
    assert lines[0] == "lr,mean_min_val_mse,stderr,best" and len(lines) == 3


def test_gradcheck(capsys):
    assert main(["gradcheck", "--probes", "20"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 11 and "FAIL" not in out


@pytest.mark.parametrize("argv", [
    ["run", "--config", "/nonexistent.json"],
    ["ttest", "/nonexistent_a.csv", "/nonexistent_b.csv"],
    ["run", "--config", "CFG", "--epochs", "-1"],
])
def test_errors_are_one_line(capsys, config, argv):
    argv = [str(config) if a == "CFG" else a for a in argv]
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert err.startswith("flexact: error:") and err.count("\n") == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flexact", "count"], capture_output=True, text=True)
    assert proc.returncode == 0 and "Table" not in proc.stderr and "720" in proc.stdout

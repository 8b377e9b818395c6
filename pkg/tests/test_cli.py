import json
import subprocess
import sys

import numpy as np
import pytest

from noncausal import cli
from noncausal.distributions import InnovationSpec
from noncausal.simulate import MarModel, simulate_mar


@pytest.fixture
def series_csv(tmp_path):
    y = simulate_mar(MarModel(psi=[0.5, 0.3], innovation=InnovationSpec("exponential")), 300, 1)
    path = tmp_path / "series.csv"
    path.write_text("value\n" + "".join(f"{v:.17g}\n" for v in y))
    return path


def test_simulate_line_count(capsys):
    assert cli.main(["simulate", "--phi", "0.3", "--psi", "0.5", "--dist", "lognormal", "--T", "500"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 500
    assert all(np.isfinite(float(v)) for v in lines)


def test_simulate_is_seeded(capsys):
    cli.main(["--seed", "4", "simulate", "--psi", "0.6", "--T", "20"])
    a = capsys.readouterr().out
    cli.main(["simulate", "--psi", "0.6", "--T", "20", "--seed", "4"])
    assert capsys.readouterr().out == a
    cli.main(["simulate", "--psi", "0.6", "--T", "20", "--seed", "5"])
    assert capsys.readouterr().out != a


def test_simulate_arch_and_params(capsys):
    argv = ["simulate", "--phi", "0.7", "--dist", "gamma", "--param", "shape=2", "--standardized", "--arch", "0.2", "0.8", "--T", "50"]
    assert cli.main(argv) == 0
    assert len(capsys.readouterr().out.splitlines()) == 50


@pytest.mark.parametrize("method", ["constancy", "ev", "eg"])
def test_test_command_json(method, series_csv, capsys):
    assert cli.main(["test", "--method", method, "--input", str(series_csv), "--p", "2", "--B", "100"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"method", "p", "statistic", "critical_value", "level", "reject", "tuning", "seed"}
    assert report["method"] == method and report["p"] == 2 and report["level"] == 0.05
    assert report["reject"] == (report["statistic"] > report["critical_value"])


def test_test_command_writes_to_out(series_csv, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["test", "--method", "ev", "--input", str(series_csv), "--p", "1", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads((out / "test_ev.json").read_text())["p"] == 1


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["test", "--method", "ev"]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a\nb\n")
    assert cli.main(["test", "--method", "ev", "--input", str(bad), "--p", "1"]) == 3
    assert cli.main(["analyze", "--input", str(tmp_path / "missing.csv")]) == 3
    assert cli.main(["table", "T9"]) == 2
    assert cli.main(["simulate", "--psi", "1.5"]) == 2
    assert cli.main(["simulate", "--dist", "cauchy"]) == 2
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    assert "demo-density" in capsys.readouterr().out


def test_config_defaults_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 9\n[simulate]\nT = 12\npsi = [0.4]\n')
    assert cli.main(["--config", str(cfg), "simulate"]) == 0
    from_config = capsys.readouterr().out
    assert len(from_config.splitlines()) == 12
    cli.main(["simulate", "--T", "12", "--psi", "0.4", "--seed", "9"])
    assert capsys.readouterr().out == from_config
    assert cli.main(["--config", str(cfg), "simulate", "--T", "5"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 5


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("colour = 1\n")
    assert cli.main(["--config", str(cfg), "simulate"]) == 2
    cfg.write_text("[simulate]\nwidth = 3\n")
    assert cli.main(["--config", str(cfg), "simulate"]) == 2
    cfg.write_text("not toml [")
    assert cli.main(["--config", str(cfg), "simulate"]) == 2
    assert cli.main(["--config", str(tmp_path / "none.toml"), "simulate"]) == 2
    capsys.readouterr()


def test_custom_table_from_config(tmp_path, capsys):
    cfg = tmp_path / "cells.toml"
    cfg.write_text(
        '[[cells]]\ntest = "constancy"\ndistribution = "exponential"\nT = 100\nreplications = 3\nreference_rate = 0.04\n'
        '[[cells]]\ntest = "ev"\ndist = "uniform"\ncausal = false\nT = 100\nreplications = 2\n'
    )
    assert cli.main(["--config", str(cfg), "table", "custom", "--seed", "2"]) == 0
    first = capsys.readouterr().out
    lines = first.splitlines()
    assert len(lines) == 3 and lines[1].endswith(",0.0400")
    cli.main(["--config", str(cfg), "table", "custom", "--seed", "2"])
    assert capsys.readouterr().out == first
    cfg.write_text("seed = 1\n")
    assert cli.main(["--config", str(cfg), "table", "custom"]) == 2


def test_table_writes_files(tmp_path, capsys):
    assert cli.main(["table", "T4", "--scale", "0.002", "--out", str(tmp_path)]) == 0
    assert "ref %" in capsys.readouterr().out
    assert {p.name for p in tmp_path.iterdir()} == {"T4.csv", "T4.txt", "T4.timing.csv"}


def test_analyze_formats(series_csv, capsys):
    assert cli.main(["analyze", "--input", str(series_csv), "--tests", "ev", "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["p"] >= 1 and [e["method"] for e in report["tests"]] == ["ev"]
    assert cli.main(["analyze", "--input", str(series_csv), "--tests", "ev", "--format", "text"]) == 0
    assert "statistic" in capsys.readouterr().out
    assert cli.main(["analyze", "--input", str(series_csv), "--tests", "wald"]) == 2
    capsys.readouterr()


def test_demo_density(capsys):
    assert cli.main(["demo-density", "--noncausal", "--T", "500", "--percentiles", "10,50,90"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "percentile,x,y,density" and len(lines) == 1 + 3 * 200


def test_critvals(capsys):
    assert cli.main(["critvals", "--p", "1", "2", "--reps", "2000", "--steps", "200", "--levels", "0.05"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "p,level,critical_value" and len(lines) == 3
    assert float(lines[2].split(",")[2]) > float(lines[1].split(",")[2])


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "noncausal.cli", "simulate", "--T", "3"], capture_output=True, text=True)
    assert proc.returncode == 0 and len(proc.stdout.splitlines()) == 3

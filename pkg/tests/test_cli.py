import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

import csrecovery.bench as bench
from csrecovery.cli import UsageError, main, parse_cli
from csrecovery.reporting import SCHEMAS, read_csv


def test_fig4_protocol_spec():
    args = parse_cli(["sweep", "--vary", "k", "--m", "200", "--k-range", "10:150:10",
                      "--algos", "omp,bp"])
    spec = args.spec
    assert spec.algorithms == ("omp", "bp")
    assert spec.points()[0] == (200, 10) and spec.points()[-1] == (200, 150)
    assert (spec.n, spec.sigma, spec.trials, spec.base_seed) == (1024, 0.005, 100, 42)
    assert spec.success_threshold == 0.01 and spec.matrix_kind == "toeplitz"


def test_solve_command_parsed():
    args = parse_cli(["solve", "--algo", "iht", "--n", "64", "--m", "32", "--k", "4", "--sigma", "0"])
    assert args.algos == ("iht",) and (args.n, args.m, args.k, args.sigma) == (64, 32, 4, 0.0)


def test_phase_defaults():
    spec = parse_cli(["phase"]).spec
    assert (spec.n, spec.grid_steps, spec.trials, spec.sigma) == (256, 10, 20, 0.0)


@pytest.mark.parametrize("argv", [
    ["sweep", "--k-range", "10:5:1"],
    ["sweep", "--bogus"],
    ["solve", "--n", "ten"],
    ["solve", "--n", "64", "--m", "8", "--k", "9"],
    ["sweep", "--algos", "omp,lasso"],
    ["sweep", "--vary", "k", "--m-range", "50:60:10"],
    ["phase", "--m", "20"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(UsageError):
        parse_cli(argv)
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_solve_writes_trial_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["solve", "--algo", "omp", "--n", "64", "--m", "32", "--k", "4", "--sigma", "0",
                 "--out", str(out)]) == 0
    (row,) = read_csv(out, "trial")
    assert row["algo"] == "omp" and row["success"]
    assert "omp" in capsys.readouterr().out


def test_sweep_outputs(tmp_path):
    out, trials, plot = tmp_path / "s.csv", tmp_path / "tr.csv", tmp_path / "s.svg"
    code = main(["sweep", "--vary", "m", "--m-range", "20:40:10", "--k", "3", "--n", "64",
                 "--trials", "2", "--algos", "omp,iht", "--out", str(out),
                 "--trials-out", str(trials), "--plot", str(plot), "--no-parallel"])
    assert code == 0
    assert out.read_text().splitlines()[0] == ",".join(SCHEMAS["sweep"])
    assert len(read_csv(out, "sweep")) == 6
    assert len(read_csv(trials, "trial")) == 12
    assert len(ET.parse(plot).getroot().findall(".//{http://www.w3.org/2000/svg}polyline")) == 2


def test_phase_outputs(tmp_path):
    out, plot = tmp_path / "p.csv", tmp_path / "p.svg"
    assert main(["phase", "--n", "32", "--grid", "4", "--trials", "2", "--algos", "omp",
                 "--out", str(out), "--plot", str(plot), "--overlay-theory"]) == 0
    assert len(read_csv(out, "phase")) == 16
    ET.parse(plot)


def test_unwritable_output_exit_1(tmp_path, capsys):
    bad = tmp_path / "nope" / "x.csv"
    assert main(["solve", "--algo", "omp", "--n", "32", "--m", "16", "--k", "2",
                 "--out", str(bad)]) == 1
    assert str(bad) in capsys.readouterr().err


def test_failed_trial_keeps_partial_results(tmp_path, monkeypatch):
    real = bench.run_solver
    calls = {"n": 0}

    def flaky(name, y, phi, k):
        calls["n"] += 1
        if calls["n"] == 4:
            raise ArithmeticError("injected failure")
        return real(name, y, phi, k)

    monkeypatch.setattr(bench, "run_solver", flaky)
    out = tmp_path / "s.csv"
    code = main(["sweep", "--vary", "k", "--k-range", "2:4:2", "--m", "16", "--n", "32",
                 "--trials", "2", "--algos", "omp", "--out", str(out), "--no-parallel"])
    assert code == 1
    assert not out.exists()
    assert len(read_csv(f"{out}.partial.csv", "trial")) == 3


def test_selftest_passes(capsys):
    assert main(["selftest", "--n", "64", "--trials", "3", "--algos", "omp,bp"]) == 0
    assert "[FAIL]" not in capsys.readouterr().out


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "csrecovery", "sweep", "--k-range", "9:1:1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "csrecovery", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sweep" in proc.stdout

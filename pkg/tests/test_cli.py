import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from qsfqueue.cli import EXIT_CAPACITY, EXIT_NO_CONVERGENCE, EXIT_NOT_ERGODIC, EXIT_SCHEMA, run

MODELS = Path(__file__).resolve().parent.parent / "models"


def write(tmp_path, doc, name="model.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run_json(capsys, argv):
    assert run(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_solve_mm1(capsys):
    out = run_json(capsys, ["solve", "--model", str(MODELS / "mm1.json")])
    assert f"{out['gamma']:.4f}" == "0.6250"
    assert f"{out['L']:.4f}" == "1.6667"
    assert set(out) >= {"gamma", "alphas", "pi00", "boundary", "L", "W", "V"}


def test_solve_csv(capsys):
    assert run(["solve", "--model", str(MODELS / "table1_q05_k5.json"), "--format", "csv"]) == 0
    rows = dict(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert round(float(rows["gamma"]), 4) == 0.2585
    assert "boundary_4" in rows and "alpha_4" in rows


def test_table1_cell(capsys):
    assert run(["table1", "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 50
    cell = next(r for r in rows if r["q"] == "0.2" and r["k"] == "5")
    assert (cell["gamma"], cell["alpha"]) == ("0.3788", "0.4325")
    zero = [r for r in rows if r["approx_zero"] == "1"]
    assert {(r["q"], r["k"]) for r in zero} == {("1.0", "20"), ("1.0", "1000"), ("1.0", "inf")}
    assert all(r["gamma"] == "0.0000" for r in zero)


def test_table2_rows(capsys):
    assert run(["table2", "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 54
    cell = next(r for r in rows if r["q"] == "0.9" and r["k"] == "50")
    assert (cell["gamma"], cell["alpha"]) == ("0.4484", "0.8905")


def test_csv_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["table2", "--format", "csv", "--out", str(a)]) == 0
    assert run(["table2", "--format", "csv", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_oracle_check(capsys):
    out = run_json(capsys, ["oracle-check", "--model", str(MODELS / "table1_q05_k5.json"), "--cap", "300",
                            "--capacity", "5"])
    assert out["product_form"]["max_abs_error"] < 1e-8
    assert out["censoring_max_error"] < 1e-10
    assert out["sojourn_series_max_error"] < 1e-10
    assert out["finite_capacity"]["max_abs_error"] < 1e-10


def test_finite_command(capsys):
    out = run_json(capsys, ["finite", "--model", str(MODELS / "table1_q05_k5.json"), "-S", "4"])
    assert len(out["pi"]) == 5 and len(out["pi"][0]) == 5
    assert out["balance_residual"] < 1e-9


def test_sweep_command(capsys):
    out = run_json(capsys, ["sweep", "--q", "1", "--ks", "1,2,4", "--p", "1"])
    assert out["passed"] and [r["k"] for r in out["rows"]] == [1, 2, 4]


def test_dm1_command(capsys):
    out = run_json(capsys, ["dm1", "--rho", "0.625", "--p", "1", "--levels", "3"])
    assert out["levels"][0] == pytest.approx(0.375)


def test_schema_error_names_field(tmp_path, capsys):
    path = write(tmp_path, {"arrival": {"k": 2, "lambda": 0.5, "q": 1.5}, "service": {"mu": 1}})
    assert run(["solve", "--model", path]) == EXIT_SCHEMA
    assert "arrival.q[0]" in capsys.readouterr().err


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["solve", "--model", str(bad)]) == EXIT_SCHEMA
    assert run(["solve", "--model", str(tmp_path / "nope.json")]) == EXIT_SCHEMA


def test_not_ergodic_exit(tmp_path):
    path = write(tmp_path, {"arrival": {"k": 1, "lambda": 2.0}, "service": {"mu": 1.0}})
    assert run(["solve", "--model", path]) == EXIT_NOT_ERGODIC


def test_no_convergence_exit():
    assert run(["solve", "--model", str(MODELS / "table1_q05_k5.json"), "--max-iter", "2"]) == EXIT_NO_CONVERGENCE


def test_capacity_exit():
    assert run(["oracle-check", "--model", str(MODELS / "table1_q05_k5.json"), "--cap", "20000"]) == EXIT_CAPACITY


def test_argument_errors():
    with pytest.raises(SystemExit) as info:
        run(["solve", "--model", "x.json", "--gamma0", "1.5"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qsfqueue", "solve", "--model", str(MODELS / "mm1.json")],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["gamma"] == pytest.approx(0.625, abs=1e-11)

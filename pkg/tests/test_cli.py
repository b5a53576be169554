import json

import numpy as np
import pytest

from sobstab import BracketError, make_params
from sobstab import cli
from sobstab.acceptance import talenti_constant
from sobstab.extremals import ExtremalCoords, extremal_field
from sobstab.fields import default_grid, write_field


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_constants(capsys):
    code, out, _ = run(capsys, "constants", "--m", "1", "--n", "3")
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1 and rep["command"] == "constants"
    res = rep["result"]
    assert res["params"]["two_star"] == 4 and res["params"]["gamma"] == 1
    assert res["C"] == pytest.approx(talenti_constant(2, 4), rel=1e-6)
    assert res["k0"] > 0
    assert len(rep["input_hash"]) == 64 and rep["seed"] == 0


def test_constants_byte_identical(capsys):
    a = run(capsys, "constants", "--m", "1.5", "--n", "3")[1]
    b = run(capsys, "constants", "--m", "1.5", "--n", "3")[1]
    assert a == b


def test_float_format_round_trips():
    x = 0.1 + 0.2
    assert json.loads(cli.dumps({"x": x}))["x"] == x
    assert json.loads(cli.dumps({"x": float("inf")}))["x"] == "inf"


def test_taylor(capsys):
    code, out, _ = run(capsys, "taylor", "--p", "4", "--trials", "50", "--dim", "16")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["beta"] == 3
    assert res["kappa_branches"] == {"p>=4": 52, "2<p<=4": 28}
    assert res["kappa"] == 28
    assert res["report"]["pass"] and res["trials"]["failures"] == 0


def test_taylor_seeded_reproducible(capsys):
    args = ("taylor", "--p", "3", "--trials", "40", "--dim", "8", "--seed", "5")
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--m", "2", "--n", "2", "--k", "8")
    assert code == 0
    rep = json.loads(out)
    res = rep["result"]
    assert res["null_dimension"] == 4 and res["gap"] > 0
    assert rep["grid"]["Lmax"] == 1


def test_spectrum_variant_x(capsys):
    code, out, _ = run(capsys, "spectrum", "--variant", "X", "--k", "3")
    assert code == 0
    vals = json.loads(out)["result"]["sectors"][0]["eigenvalues"]
    C2 = make_params(2, 2).C ** 2
    assert vals[0] == pytest.approx(-3 * C2, abs=1e-5) and abs(vals[1]) < 1e-5


def test_trace(capsys):
    code, out, _ = run(capsys, "trace", "--d", "2", "--caps", "64")
    res = json.loads(out)["result"]
    assert code == 0 and res["tail_bound"] > 0 and res["partial"] > 0


def test_bliss(capsys):
    code, out, _ = run(capsys, "bliss", "--p", "2", "--N", "4")
    res = json.loads(out)["result"]
    assert code == 0 and res["ratio"] == pytest.approx(res["closed_form"], rel=1e-6)


def test_deficit_from_field_file(capsys, tmp_path):
    p = make_params(2, 2)
    f = extremal_field(p, ExtremalCoords(2.0), default_grid(p))
    path = write_field(f, tmp_path / "F.json")
    code, out, _ = run(capsys, "deficit", "--field", str(path))
    rep = json.loads(out)
    assert code == 0 and abs(rep["result"]["deficit"]) < 1e-7
    code, out2, _ = run(capsys, "deficit", "--field", str(path))
    assert out2 == out


def test_distance_default(capsys):
    code, out, _ = run(capsys, "distance", "--eps", "0.05")
    res = json.loads(out)["result"]
    assert code == 0 and res["delta"] > 0 and res["converged"]


def test_ccscan_csv(capsys, tmp_path):
    target = tmp_path / "scan.csv"
    code, _, _ = run(capsys, "ccscan", "--format", "csv", "-o", str(target))
    assert code == 0
    lines = target.read_text().splitlines()
    assert lines[0] == "sigma,mass_within_unit_ball" and len(lines) == 42
    summary = json.loads((tmp_path / "scan.csv.summary.json").read_text())
    assert abs(summary["result"]["mass"] - 0.5) < 1e-6


@pytest.mark.parametrize("argv", [
    ("constants", "--m", "0"),
    ("constants", "--n", "1"),
    ("frobnicate",),
    ("bliss", "--p", "3", "--N", "3"),
    ("taylor", "--p", "2"),
    ("deficit", "--field", "/nonexistent/field.json"),
    ("spectrum", "--variant", "Q"),
])
def test_argument_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(cfg):
        raise BracketError("no crossing")
    monkeypatch.setitem(cli.HANDLERS, "ccscan", boom)
    code, _, err = run(capsys, "ccscan")
    assert code == 3 and "no crossing" in err


def test_acceptance_failure_exit_1(capsys, monkeypatch):
    def failing(cfg):
        return {"criteria": [], "all_passed": False}, None
    monkeypatch.setitem(cli.HANDLERS, "verify-all", failing)
    assert run(capsys, "verify-all")[0] == 1


def test_workers_env(monkeypatch):
    monkeypatch.setenv("SSL_NUM_WORKERS", "3")
    assert cli.workers() == 3
    monkeypatch.setenv("SSL_NUM_WORKERS", "x")
    assert cli.workers() == 1

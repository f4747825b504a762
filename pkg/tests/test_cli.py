import json

import numpy as np
import pytest

from isoscope.cli import main


def run(tmp_path, *args, out="out"):
    d = tmp_path / out
    rc = main([*args, "--out", str(d)])
    return rc, d


def test_selftest(tmp_path):
    rc, d = run(tmp_path, "selftest")
    assert rc == 0
    assert all(json.load(open(d / "selftest.json", encoding="utf-8")).values())
    assert json.load(open(d / "config.json", encoding="utf-8"))["command"] == "selftest"


@pytest.mark.parametrize(
    "model, cone, rc_expected",
    [("toggle2", None, 0), ("toggle2", "1,1", 1), ("linear2", None, 0)],
)
def test_check_monotone(tmp_path, model, cone, rc_expected):
    args = ["check-monotone", "--model", model]
    if model == "toggle2":
        args += ["--box", "0,0:50,50"]
    if cone:
        args += ["--cone", cone]
    rc, d = run(tmp_path, *args)
    assert rc == rc_expected
    assert json.load(open(d / "monotone.json", encoding="utf-8"))["passed"] is (rc_expected == 0)


def test_equilibria_linear(tmp_path):
    rc, d = run(tmp_path, "equilibria", "--model", "linear2")
    assert rc == 0
    eqs = json.load(open(d / "equilibria.json", encoding="utf-8"))["equilibria"]
    assert len(eqs) == 1
    assert np.allclose(eqs[0]["x_star"], [0, 0], atol=1e-9)
    assert eqs[0]["lambda1"] == pytest.approx(-0.5)


def test_equilibria_toggle2(tmp_path):
    rc, d = run(tmp_path, "equilibria", "--model", "toggle2")
    assert rc == 0
    eqs = json.load(open(d / "equilibria.json", encoding="utf-8"))["equilibria"]
    assert len(eqs) == 2
    assert np.allclose(eqs[0]["x_star"], [2.00010, 56.048], rtol=1e-4)
    assert np.allclose(eqs[1]["x_star"], [943.176, 0.5], rtol=1e-4)


def test_analytic_basin_reruns_from_echoed_config(tmp_path):
    rc, d = run(tmp_path, "basin", "--oracle-analytic", "x1+x2<1", "--n-total", "300", "--seed", "5", "--threads", "1")
    assert rc == 0
    m_min = np.loadtxt(d / "m_min.csv", delimiter=",", skiprows=1, usecols=(1, 2), ndmin=2)
    m_max = np.loadtxt(d / "m_max.csv", delimiter=",", skiprows=1, usecols=(1, 2), ndmin=2)
    assert np.all(m_min.sum(1) < 1) and np.all(m_max.sum(1) >= 1)
    rc2 = main(["basin", "--config", str(d / "config.json"), "--out", str(tmp_path / "again")])
    assert rc2 == 0
    for name in ("m_min.csv", "m_max.csv", "levelset.dat"):
        assert (d / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    assert (d / "levelset.gp").exists()


@pytest.mark.parametrize(
    "args",
    [
        ["check-monotone", "--model", "nosuch"],
        ["check-monotone", "--model", "toggle2", "--cone", "1,0"],
        ["basin", "--model", "toggle2", "--box", "0,0:1"],
        ["basin", "--oracle-analytic", "x1+x2"],
        ["isostable", "--model", "linear2", "--alpha", "abc"],
    ],
)
def test_configuration_errors(tmp_path, args):
    rc, _ = run(tmp_path, *args)
    assert rc == 2


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    rc, _ = run(tmp_path, "selftest", "--config", str(path))
    assert rc == 2


def test_numerical_failure_exit_code(tmp_path):
    # the level is never crossed, so no box adjustment can reach it
    rc, _ = run(tmp_path, "basin", "--oracle-analytic", "x1+x2<1e300", "--n-total", "50")
    assert rc == 3


def test_param_bounds(tmp_path):
    args = ["param-bounds", "--model", "toggle2", "--no-levelsets", "--n-points", "40", "--threads", "1"]
    rc, d = run(tmp_path, *args, out="ok")
    assert rc == 0
    rep = json.load(open(d / "bounds.json", encoding="utf-8"))
    assert rep["inclusion_violations"] == []
    rc, d = run(tmp_path, *args, "--swap-corners", out="swapped")
    assert rc == 1


def test_isostable_linear(tmp_path):
    rc, d = run(tmp_path, "isostable", "--model", "linear2", "--alpha", "0.5", "--n-total", "150", "--threads", "1")
    assert rc == 0
    man = json.load(open(d / "manifest.json", encoding="utf-8"))
    assert man["oracle"]["alpha"] == 0.5
    assert (d / "spectral.json").exists()

import json

import numpy as np
import pytest

from isoscope.bounds import (
    BoundsConfig,
    ParameterBox,
    check_assumptions,
    check_nesting,
    evaluate_inner_set,
    nested_levelsets,
    write_overlay,
)
from isoscope.levelset import SamplerConfig, StandardFrame
from isoscope.models import TOGGLE2_CONE_P, resolve_preset
from isoscope.order import OrthantCone, leq

import reference as ref

K = OrthantCone((1, -1))
CONE_P = OrthantCone(TOGGLE2_CONE_P)
BOX = ([0.0, 0.0], [2500.0, 2500.0])


@pytest.fixture(scope="module")
def pbox():
    return ParameterBox(resolve_preset("toggle2:pmin"), resolve_preset("toggle2:pmax"), CONE_P)


@pytest.fixture(scope="module")
def config():
    return BoundsConfig(search_box=BOX, state_box=([0.0, 0.0], [50.0, 50.0]), km_grid=6)


@pytest.fixture(scope="module")
def assumptions(toggle2, pbox, config):
    return check_assumptions(toggle2, pbox, K, config, p=resolve_preset("toggle2:nominal"))


def test_parameter_box_order():
    pmin, pmax = resolve_preset("toggle2:pmin"), resolve_preset("toggle2:pmax")
    box = ParameterBox(pmin, pmax, CONE_P)
    assert box.contains(resolve_preset("toggle2:nominal"))
    assert box.contains(box.midpoint)
    # row 2 of p_max lies below row 1 of p_min, so the standard order rejects the box
    with pytest.raises(ValueError):
        ParameterBox(pmin, pmax, OrthantCone((1,) * 8))
    with pytest.raises(ValueError):
        ParameterBox(pmax, pmin, CONE_P)
    swapped = box.swapped()
    assert swapped.p_min == box.p_max and swapped.p_max == box.p_min
    assert box.to_dict()["cone_p"] == list(TOGGLE2_CONE_P)


def test_assumptions_pass_on_nominal_box(assumptions):
    rep = assumptions
    assert rep.a1["passed"], rep.a1
    assert rep.a1["stable_counts"] == {"p_min": 2, "p": 2, "p_max": 2}
    assert rep.a2["passed"] and rep.a3["passed"] and rep.a4["passed"]
    assert rep.assumptions_passed
    assert all(pair["x_star_converges"] and pair["x_bullet_converges"] for pair in rep.a3["pairs"])


def test_equilibria_follow_reference_and_order(assumptions):
    eq = assumptions.equilibria
    for label, preset in (("p_min", "toggle2:pmin"), ("p", "toggle2:nominal"), ("p_max", "toggle2:pmax")):
        stable = [x for x, s in ref.toggle2_equilibria(resolve_preset(preset)) if s]
        want = sorted(stable, key=lambda x: x[0] - x[1])
        assert np.allclose(eq[label].star.x_star, want[0], rtol=1e-8)
        assert np.allclose(eq[label].bullet.x_star, want[1], rtol=1e-8)
    # parameters ordered => equilibria ordered the same way
    assert leq(eq["p_min"].star.x_star, eq["p"].star.x_star, K)
    assert leq(eq["p"].star.x_star, eq["p_max"].star.x_star, K)
    assert leq(eq["p_min"].bullet.x_star, eq["p_max"].bullet.x_star, K)
    assert assumptions.equilibrium_order["x_star_p_max_above_p_min"]
    assert assumptions.equilibrium_order["x_bullet_p_max_above_p_min"]


def test_report_json(assumptions, tmp_path):
    path = tmp_path / "bounds.json"
    assumptions.to_json(path)
    d = json.load(open(path, encoding="utf-8"))
    assert d["a4"]["passed"] is True
    assert set(d["equilibria"]) == {"p_min", "p", "p_max"}


def test_degenerate_box(toggle2, config):
    p = resolve_preset("toggle2:nominal")
    box = ParameterBox(p, p, CONE_P)
    rep = check_assumptions(toggle2, box, K, config)
    assert rep.a2["passed"]
    assert rep.a3["passed"]
    assert rep.a1["passed"]


def test_varied_hill_coefficient_fails_parameter_certificate(toggle2):
    pmin = list(resolve_preset("toggle2:pmin"))
    pmax = list(resolve_preset("toggle2:pmax"))
    pmin[2], pmax[2] = 3.5, 4.5
    box = ParameterBox(pmin, pmax, CONE_P)
    cfg = BoundsConfig(search_box=BOX, state_box=([0.05, 0.05], [50.0, 50.0]), km_grid=11)
    rep = check_assumptions(toggle2, box, K, cfg)
    assert not rep.a1["kamke_muller"]["passed"]
    assert not rep.a1["passed"]


def test_bifurcation_diagnosed(toggle2):
    # a weak repressor leaves a single stable state at one corner
    p_lo = list(resolve_preset("toggle2:nominal"))
    p_hi = list(p_lo)
    p_hi[1] = 1000.0
    p_lo[1] = 5.0
    box = ParameterBox(p_lo, p_hi, CONE_P)
    cfg = BoundsConfig(search_box=BOX, state_box=([0.0, 0.0], [50.0, 50.0]), km_grid=4)
    rep = check_assumptions(toggle2, box, K, cfg)
    assert rep.a1["stable_counts"]["p_min"] == 1
    assert not rep.a1["passed"] and "bifurcation" in rep.a1["diagnosis"]
    assert not rep.assumptions_passed


def test_self_comparison_has_no_violations(toggle2, pbox, config, assumptions):
    rep = check_nesting(toggle2, pbox, K, config, p_test=[pbox.p_min], n_points=40, sample_box=([0, 0], [150, 2500]),
                        rng=np.random.default_rng(0), equilibria={"p_min": assumptions.equilibria["p_min"],
                                                                  "p_max": assumptions.equilibria["p_max"]})
    assert rep.inclusion_violations == []
    assert rep.samples_tested == 40


def test_nesting_and_swapped_control(toggle2, pbox, config, assumptions):
    eq = assumptions.equilibria
    kw = dict(p_test=[resolve_preset("toggle2:nominal")], n_points=60, sample_box=([0, 0], [150, 2500]))
    rep = check_nesting(toggle2, pbox, K, config, rng=np.random.default_rng(1), equilibria=eq, **kw)
    assert rep.inclusion_violations == [] and rep.nesting_passed
    swapped = {"p_min": eq["p_max"], "p": eq["p"], "p_max": eq["p_min"]}
    bad = check_nesting(toggle2, pbox.swapped(), K, config, rng=np.random.default_rng(1), equilibria=swapped, **kw)
    assert len(bad.inclusion_violations) >= 1
    assert not bad.nesting_passed
    v = bad.inclusion_violations[0]
    assert set(v) == {"x", "kind", "in_basin_at", "not_at"}


def test_nested_levelsets_pointwise(toggle2, pbox, config, assumptions, tmp_path):
    frame = StandardFrame((1, -1), 0)
    sampler = SamplerConfig(n_greedy=5, n_random=5, n_total=60, seed=3)
    res = nested_levelsets(toggle2, pbox, K, frame, [0, 0], [150, 2500], sampler, config,
                           p=resolve_preset("toggle2:nominal"), equilibria=assumptions.equilibria)
    assert list(res) == ["p_min", "p", "p_max"]
    # the smallest star basin (p_max) sits inside the one at p
    o_star_p, _ = assumptions.equilibria["p"].oracles(toggle2, config)
    assert np.all(evaluate_inner_set(res["p_max"], o_star_p) == 0)
    path = write_overlay(res, tmp_path / "overlay.dat")
    text = open(path, encoding="utf-8").read()
    assert text.count("# ") == 6
    assert "# p_min m_min columns: x1 x2" in text

import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isoscope.models import builtin_model, model_from_expressions, resolve_preset
from isoscope.ode import DomainExit, StepSizeUnderflow, flow_endpoint, integrate, rk4_fixed

import reference as ref

LIN_P = (-1.0, 0.5, 0.5, -1.0)


def test_linear_eigenvector_decay(linear2):
    tr = integrate(linear2, [1.0, 1.0], LIN_P, 1.0)
    assert np.allclose(tr.endpoint, math.exp(-0.5) * np.ones(2), atol=1e-8, rtol=0)
    assert np.allclose(flow_endpoint(linear2, [1.0, 1.0], LIN_P, 1.0), tr.endpoint, atol=1e-8, rtol=0)


@pytest.mark.parametrize("t_end", [0.5, 10.0, 200.0])
def test_fixed_point_stays(toggle2, p_nominal, t_end):
    x_star = ref.toggle2_equilibria(p_nominal)[-1][0]
    end = flow_endpoint(toggle2, x_star, p_nominal, t_end)
    assert np.allclose(end, x_star, rtol=1e-9, atol=1e-9)


@pytest.fixture(scope="module")
def rk4_from_origin():
    return ref.toggle2_rk4((0.0, 0.0), ref.TOGGLE2_NOMINAL, 100.0, h=1e-4)


def test_origin_runs_to_high_x2_state(toggle2, p_nominal, rk4_from_origin):
    x_star = ref.toggle2_equilibria(p_nominal)[-1][0]
    assert x_star[1] > x_star[0]
    end = flow_endpoint(toggle2, [0.0, 0.0], p_nominal, 100.0)
    assert np.all(np.abs(end - rk4_from_origin) <= 1e-4)
    assert np.all(np.abs(end - x_star) <= 1e-4)
    assert np.allclose(integrate(toggle2, [0.0, 0.0], p_nominal, 100.0).endpoint, end, rtol=0, atol=0)


def test_trajectory_invariants(toggle2, p_nominal, tmp_path):
    x0 = np.array([10.0, 3.0])
    tr = integrate(toggle2, x0, p_nominal, 20.0)
    assert tr.times[0] == 0.0 and tr.times[-1] == 20.0
    assert np.all(np.diff(tr.times) > 0)
    assert np.array_equal(tr.states[0], x0)
    assert tr.accepted_steps == len(tr.times) - 1
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    rows = list(csv.reader(open(path, encoding="utf-8")))
    assert rows[0] == ["t", "x1", "x2"]
    assert len(rows) == len(tr.times) + 1
    assert float(rows[-1][0]) == 20.0


def test_endpoint_matches_lsoda_and_rk4(toggle4):
    p = resolve_preset("toggle4:nominal")
    x0 = [10.0, 1.0, 100.0, 0.5]
    a = flow_endpoint(toggle4, x0, p, 5.0, rel_tol=1e-11, abs_tol=1e-13)
    b = ref.scipy_endpoint(lambda y, q: toggle4.rhs(np.asarray(y), q), x0, p, 5.0)
    assert np.allclose(a, b, rtol=1e-7, atol=1e-9)
    c = rk4_fixed(toggle4, x0, p, 5.0, 1e-3)
    assert np.allclose(a, c, rtol=1e-7, atol=1e-9)


def test_halving_tolerance_never_increases_error(linear2):
    x0 = np.array([1.3, -0.4])
    exact = ref.linear2_flow(x0, 3.0)
    errors = []
    tol = 1e-3
    for _ in range(16):
        end = flow_endpoint(linear2, x0, LIN_P, 3.0, rel_tol=tol, abs_tol=tol * 1e-3)
        errors.append(float(np.max(np.abs(end - exact))))
        tol /= 2
    # allow round-off once the error reaches machine level
    for a, b in zip(errors, errors[1:]):
        assert b <= a + 1e-15


@pytest.mark.parametrize("name", ["linear2", "toggle2", "toggle4"])
def test_order_preservation_probe(name):
    model = builtin_model(name)
    p = resolve_preset(name)
    s = np.asarray(model.cone_x, dtype=float)
    rng = np.random.default_rng(7)
    if name == "linear2":
        lo, hi = -np.full(2, 2.0), np.full(2, 2.0)
    elif name == "toggle2":
        lo, hi = np.zeros(2), np.full(2, 200.0)
    else:
        lo, hi = np.zeros(4), np.array([150.0, 2.5, 500.0, 1.0])
    for _ in range(100):
        a = lo + (hi - lo) * rng.random(model.n)
        b = lo + (hi - lo) * rng.random(model.n)
        # x below y in the cone order
        x = np.where(s > 0, np.minimum(a, b), np.maximum(a, b))
        y = np.where(s > 0, np.maximum(a, b), np.minimum(a, b))
        for t in (0.1, 1.0, 10.0):
            fx = flow_endpoint(model, x, p, t)
            fy = flow_endpoint(model, y, p, t)
            slack = 1e-6 * np.maximum(1.0, np.maximum(np.abs(fx), np.abs(fy)))
            assert np.all(s * (fy - fx) >= -slack), (x, y, t)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 20))
def test_linear_flow_matches_matrix_exponential(a, b, t):
    lin = builtin_model("linear2")
    end = flow_endpoint(lin, [a, b], LIN_P, t)
    assert np.allclose(end, ref.linear2_flow([a, b], t), rtol=1e-7, atol=1e-9)


def test_blow_up_reports_underflow():
    model = model_from_expressions(["x1^2"])
    with pytest.raises(StepSizeUnderflow) as info:
        integrate(model, [1.0], (), 2.0)
    # exact blow-up time of x' = x^2, x(0) = 1 is t = 1
    assert info.value.t == pytest.approx(1.0, abs=1e-3)


def test_domain_exit_raised():
    model = model_from_expressions(["-1"], domain_box=(np.zeros(1), np.full(1, np.inf)))
    with pytest.raises(DomainExit):
        integrate(model, [0.5], (), 2.0)


@pytest.mark.parametrize("kw", [{"t_end": 0.0}, {"t_end": -1.0}, {"t_end": 1.0, "rel_tol": 0.0}])
def test_invalid_arguments(linear2, kw):
    t_end = kw.pop("t_end")
    with pytest.raises(ValueError):
        integrate(linear2, [1.0, 1.0], LIN_P, t_end, **kw)


def test_start_outside_domain_rejected(toggle2, p_nominal):
    with pytest.raises(DomainExit):
        integrate(toggle2, [-1.0, 1.0], p_nominal, 1.0)

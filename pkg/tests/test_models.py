import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isoscope.models import PRESETS, builtin_model, model_from_expressions, resolve_preset

import reference as ref


@pytest.mark.parametrize("name", ["linear2", "toggle2", "toggle4"])
@given(data=st.data())
def test_builtin_matches_expression_text(name, data):
    model = builtin_model(name)
    twin = model_from_expressions(model.sources, model.param_names)
    x = np.array(data.draw(st.lists(st.floats(0.0, 3000.0), min_size=model.n, max_size=model.n)))
    p = resolve_preset(name)
    a = model.rhs(x, p)
    b = twin.rhs(x, p)
    assert np.all(np.abs(a - b) <= np.spacing(np.maximum(np.abs(a), np.abs(b))))


def test_builtin_matches_reference_rhs():
    model = builtin_model("toggle2")
    for x in ([0.0, 0.0], [2.0, 56.0], [943.0, 0.5], [10.0, 10.0]):
        assert np.allclose(model.f(x, ref.TOGGLE2_NOMINAL), ref.toggle2_rhs(x, ref.TOGGLE2_NOMINAL), rtol=1e-14)
    lin = builtin_model("linear2")
    assert np.allclose(lin.f([1.0, -2.0], resolve_preset("linear2")), ref.LINEAR2_A @ [1.0, -2.0])


def test_presets_match_parameter_tables():
    assert resolve_preset("toggle2:nominal") == ref.TOGGLE2_NOMINAL
    assert resolve_preset("toggle2:pmin") == ref.TOGGLE2_PMIN
    assert resolve_preset("toggle2:pmax") == ref.TOGGLE2_PMAX
    assert resolve_preset("toggle4:nominal") == ref.TOGGLE4_NOMINAL
    assert resolve_preset("toggle2") == ref.TOGGLE2_NOMINAL
    assert set(PRESETS) >= {"toggle2:nominal", "toggle2:pmin", "toggle2:pmax", "toggle4:nominal"}


def test_parameter_mapping_and_errors():
    model = builtin_model("linear2")
    assert model.params({"a11": -1, "a12": 0.5, "a21": 0.5, "a22": -1}) == (-1.0, 0.5, 0.5, -1.0)
    with pytest.raises((KeyError, ValueError)):
        model.params((1.0, 2.0))
    with pytest.raises(KeyError):
        builtin_model("toggle3")
    with pytest.raises(KeyError):
        resolve_preset("toggle2:nope")


def test_custom_model_dimension_checked():
    from isoscope.expr import ParseError

    with pytest.raises(ParseError):
        model_from_expressions(["x1 + x3", "x2"])

import numpy as np
import pytest
from hypothesis import settings

from isoscope import builtin_model, find_equilibria, resolve_preset
from isoscope.order import OrthantCone

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def rec(criterion: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[criterion] = (bool(ok), detail)
        print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return rec


@pytest.fixture(scope="session")
def linear2():
    return builtin_model("linear2")


@pytest.fixture(scope="session")
def toggle2():
    return builtin_model("toggle2")


@pytest.fixture(scope="session")
def toggle4():
    return builtin_model("toggle4")


@pytest.fixture(scope="session")
def p_nominal():
    return resolve_preset("toggle2:nominal")


@pytest.fixture(scope="session")
def toggle2_eqs(toggle2, p_nominal):
    """``(x*, x.)`` spectral data at the nominal parameters."""
    eqs = find_equilibria(toggle2, p_nominal, ([0, 0], [2500, 2500]), cone=OrthantCone((1, -1)))
    assert len(eqs) == 2
    return eqs[0], eqs[1]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

"""Vector-field models: expression-defined or builtin closed forms.

Builtins:

``linear2``
    ``x' = A x`` with ``A = [[a11, a12], [a21, a22]]``.
``toggle2``
    Two-gene LacI/TetR toggle switch with mutual Hill repression.
``toggle4``
    Four-state toggle switch with protein and mRNA for each gene.

Every builtin carries its expression-text equivalent in ``exprs`` and the
closed form evaluates the same operations in the same order, so the two
agree to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .expr import compile_expression, parse_expression, power, safe_div

__all__ = [
    "VectorFieldModel",
    "model_from_expressions",
    "builtin_model",
    "BUILTIN_NAMES",
    "resolve_preset",
    "PRESETS",
]


@dataclass
class VectorFieldModel:
    """``x' = f(x, p)`` on R^n with named parameters.

    ``rhs(x, p)`` accepts ``x`` of shape ``(n,)`` or ``(n, k)`` (a batch of
    ``k`` states) and ``p`` as a sequence ordered like ``param_names``.
    """

    name: str
    n: int
    param_names: tuple
    rhs: Callable
    exprs: Optional[tuple] = None
    domain_box: Optional[tuple] = None  # (lower, upper) arrays, +-inf allowed
    cone_x: Optional[tuple] = None  # suggested orthant sign vector
    sweep_axis: Optional[int] = None  # suggested level-set graph axis
    sources: Optional[tuple] = None

    def __post_init__(self):
        self.param_names = tuple(self.param_names)
        if self.exprs is not None and len(self.exprs) != self.n:
            raise ValueError(f"model {self.name!r}: {len(self.exprs)} rhs components for n={self.n}")
        if self.domain_box is not None:
            lo, hi = self.domain_box
            self.domain_box = (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))

    @property
    def m(self) -> int:
        return len(self.param_names)

    def params(self, p) -> tuple:
        """Normalize ``p`` (mapping or sequence) to a tuple in declaration order."""
        if isinstance(p, Mapping):
            missing = [k for k in self.param_names if k not in p]
            if missing:
                raise ValueError(f"unbound parameters: {missing}")
            return tuple(float(p[k]) for k in self.param_names)
        p = tuple(float(v) for v in np.ravel(p))
        if len(p) != self.m:
            raise ValueError(f"got {len(p)} parameter values, expected {self.m}")
        return p

    def f(self, x, p) -> np.ndarray:
        return np.asarray(self.rhs(np.asarray(x, dtype=float), self.params(p)), dtype=float)

    def in_domain(self, x) -> bool:
        if self.domain_box is None:
            return True
        lo, hi = self.domain_box
        x = np.asarray(x)
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def describe(self) -> dict:
        out = {"name": self.name, "n": self.n, "params": list(self.param_names)}
        if self.sources is not None:
            out["rhs"] = list(self.sources)
        return out


def model_from_expressions(
    sources: Sequence[str],
    params: Sequence[str] = (),
    name: str = "custom",
    domain_box=None,
    cone_x=None,
    sweep_axis=None,
) -> VectorFieldModel:
    """Build a model whose i-th component is the expression ``sources[i]``."""
    n = len(sources)
    if n == 0:
        raise ValueError("model needs at least one rhs component")
    exprs = tuple(parse_expression(s, n, params) for s in sources)
    funcs = [compile_expression(e) for e in exprs]

    def rhs(x, p):
        return np.array([fn(x, p) for fn in funcs])

    return VectorFieldModel(
        name=name,
        n=n,
        param_names=tuple(params),
        rhs=rhs,
        exprs=exprs,
        domain_box=domain_box,
        cone_x=None if cone_x is None else tuple(cone_x),
        sweep_axis=sweep_axis,
        sources=tuple(sources),
    )


# -- builtins ----------------------------------------------------------------

_LINEAR2_SRC = ("a11*x1 + a12*x2", "a21*x1 + a22*x2")
_LINEAR2_PARAMS = ("a11", "a12", "a21", "a22")


def _linear2(x, p):
    a11, a12, a21, a22 = p
    return np.array([a11 * x[0] + a12 * x[1], a21 * x[0] + a22 * x[1]])


_TOGGLE2_SRC = (
    "p11 + p12/(1 + x2^p13) - p14*x1",
    "p21 + p22/(1 + x1^p23) - p24*x2",
)
_TOGGLE2_PARAMS = ("p11", "p12", "p13", "p14", "p21", "p22", "p23", "p24")


def _toggle2(x, p):
    p11, p12, p13, p14, p21, p22, p23, p24 = p
    x1, x2 = x[0], x[1]
    return np.array([
        p11 + safe_div(p12, 1.0 + power(x2, p13)) - p14 * x1,
        p21 + safe_div(p22, 1.0 + power(x1, p23)) - p24 * x2,
    ])


_TOGGLE4_SRC = (
    "p11*x2^p12 - p13*x1",
    "p21/(1 + x3^p22) - p23*x2",
    "p31*x4^p32 - p33*x3",
    "p41/(1 + x1^p42) - p43*x4",
)
_TOGGLE4_PARAMS = (
    "p11", "p12", "p13",
    "p21", "p22", "p23",
    "p31", "p32", "p33",
    "p41", "p42", "p43",
)


def _toggle4(x, p):
    p11, p12, p13, p21, p22, p23, p31, p32, p33, p41, p42, p43 = p
    x1, x2, x3, x4 = x[0], x[1], x[2], x[3]
    return np.array([
        p11 * power(x2, p12) - p13 * x1,
        safe_div(p21, 1.0 + power(x3, p22)) - p23 * x2,
        p31 * power(x4, p32) - p33 * x3,
        safe_div(p41, 1.0 + power(x1, p42)) - p43 * x4,
    ])


_BUILTINS = {
    "linear2": (_linear2, _LINEAR2_SRC, _LINEAR2_PARAMS, None, (1, 1), None),
    "toggle2": (_toggle2, _TOGGLE2_SRC, _TOGGLE2_PARAMS, "nonneg", (1, -1), 0),
    "toggle4": (_toggle4, _TOGGLE4_SRC, _TOGGLE4_PARAMS, "nonneg", (1, 1, -1, -1), 0),
}
BUILTIN_NAMES = tuple(_BUILTINS)

# Parameter tables of the two- and four-state toggle switches; matrices are
# flattened row by row.
PRESETS = {
    "linear2:default": ("linear2", (-1.0, 0.5, 0.5, -1.0)),
    "toggle2:nominal": ("toggle2", (2.0, 1000.0, 4.0, 1.0, 1.0, 1000.0, 3.0, 2.0)),
    "toggle2:pmin": ("toggle2", (1.8, 950.0, 4.0, 1.0, 1.2, 1050.0, 3.0, 2.0)),
    "toggle2:pmax": ("toggle2", (2.2, 1100.0, 4.0, 1.0, 0.7, 900.0, 3.0, 2.0)),
    "toggle4:nominal": (
        "toggle4",
        (1000.0, 1.0, 1.0, 2.0, 3.0, 1.0, 1000.0, 1.0, 2.0, 1.0, 3.0, 2.0),
    ),
}

# Parameter orthant for toggle2: production of x1 (row 1) pushes up in the
# (1, -1) state order, production of x2 (row 2) pushes down.
TOGGLE2_CONE_P = (1, 1, 1, 1, -1, -1, -1, -1)


def builtin_model(name: str) -> VectorFieldModel:
    """Return the builtin model ``name`` (``linear2``, ``toggle2``, ``toggle4``)."""
    name = name.split(":", 1)[0]
    if name not in _BUILTINS:
        raise KeyError(f"unknown builtin model {name!r}; choose from {BUILTIN_NAMES}")
    fn, src, params, domain, cone, axis = _BUILTINS[name]
    n = len(src)
    exprs = tuple(parse_expression(s, n, params) for s in src)
    box = None
    if domain == "nonneg":
        box = (np.zeros(n), np.full(n, np.inf))
    return VectorFieldModel(
        name=name,
        n=n,
        param_names=params,
        rhs=fn,
        exprs=exprs,
        domain_box=box,
        cone_x=cone,
        sweep_axis=axis,
        sources=src,
    )


def resolve_preset(name: str) -> tuple:
    """Parameter tuple for a preset such as ``toggle2:nominal``.

    A bare builtin name resolves to its first listed preset.
    """
    if name in PRESETS:
        return PRESETS[name][1]
    for key, (model, values) in PRESETS.items():
        if model == name:
            return values
    raise KeyError(f"unknown parameter preset {name!r}; choose from {sorted(PRESETS)}")

"""Orthant orders, antichains and the Kamke-Muller monotonicity check."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .expr import ExpressionError
from .models import VectorFieldModel

__all__ = [
    "Relation",
    "OrthantCone",
    "compare",
    "leq",
    "strictly_less",
    "to_standard_coords",
    "from_standard_coords",
    "AntichainSet",
    "OracleInconsistency",
    "prune",
    "KamkeMullerReport",
    "check_kamke_muller",
]


class Relation(Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class OrthantCone:
    """The cone ``diag(sigma) R^n_{>=0}``; ``x <=_K y`` iff ``sigma*(y - x) >= 0``."""

    sigma: tuple

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        if not sigma or any(s not in (-1, 1) for s in sigma):
            raise ValueError(f"sigma must be a non-empty vector of +-1, got {self.sigma}")
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def standard(cls, n: int) -> "OrthantCone":
        return cls((1,) * n)

    @property
    def n(self) -> int:
        return len(self.sigma)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.sigma, dtype=float)


def _pair(x, y, cone):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if cone is not None and cone.n != x.size:
        raise ValueError(f"cone has dimension {cone.n}, points have {x.size}")
    s = np.ones(x.size) if cone is None else cone.array
    return s * (y - x)


def compare(x, y, cone: Optional[OrthantCone] = None) -> tuple:
    """Relation of ``x`` to ``y`` under ``cone`` plus a strict-interior flag.

    Returns ``(relation, strict)`` where ``relation`` says how ``x`` stands
    relative to ``y`` and ``strict`` is true iff every component is strictly
    ordered (``x << y`` or ``x >> y``).
    """
    d = _pair(x, y, cone)
    if np.all(d == 0):
        return Relation.EQUAL, False
    if np.all(d >= 0):
        return Relation.LESS, bool(np.all(d > 0))
    if np.all(d <= 0):
        return Relation.GREATER, bool(np.all(d < 0))
    return Relation.INCOMPARABLE, False


def leq(x, y, cone: Optional[OrthantCone] = None) -> bool:
    return bool(np.all(_pair(x, y, cone) >= 0))


def strictly_less(x, y, cone: Optional[OrthantCone] = None) -> bool:
    """``x <<_K y``."""
    return bool(np.all(_pair(x, y, cone) > 0))


def to_standard_coords(x, cone: OrthantCone) -> np.ndarray:
    """``sigma * x``: maps ``<=_K`` to the componentwise order. An involution."""
    return cone.array * np.asarray(x, dtype=float)


from_standard_coords = to_standard_coords


# -- antichains ----------------------------------------------------------------


class OracleInconsistency(RuntimeError):
    """The same point was reported with both oracle values."""


@dataclass
class AntichainSet:
    """Mutually incomparable points in the standard order.

    ``kind == "lower"`` holds the largest known oracle-0 samples (the set
    whose lower closure is certified 0); ``kind == "upper"`` the smallest
    known oracle-1 samples.
    """

    kind: str
    points: np.ndarray = None
    n: int = 0

    def __post_init__(self):
        if self.kind not in ("lower", "upper"):
            raise ValueError(f"kind must be 'lower' or 'upper', got {self.kind!r}")
        if self.points is None:
            self.points = np.empty((0, self.n))
        else:
            self.points = np.asarray(self.points, dtype=float).reshape(-1, self.n or np.shape(self.points)[-1])
            self.n = self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def copy(self) -> "AntichainSet":
        return AntichainSet(self.kind, self.points.copy(), self.n)

    def covers(self, z) -> np.ndarray:
        """Boolean mask: which rows of ``z`` lie in this set's closure."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if len(self.points) == 0:
            return np.zeros(len(z), dtype=bool)
        if self.kind == "lower":
            hit = np.all(z[:, None, :] <= self.points[None, :, :], axis=2)
        else:
            hit = np.all(z[:, None, :] >= self.points[None, :, :], axis=2)
        return hit.any(axis=1)

    def comparable_pairs(self) -> list:
        """All index pairs ``(i, j)``, ``i < j``, of comparable members (should be empty)."""
        P = self.points
        out = []
        for i, j in itertools.combinations(range(len(P)), 2):
            if np.all(P[i] <= P[j]) or np.all(P[i] >= P[j]):
                out.append((i, j))
        return out

    def to_csv(self, path, tag: Optional[str] = None) -> None:
        tag = tag or ("min" if self.kind == "lower" else "max")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["set"] + [f"x{i + 1}" for i in range(self.n)])
            for row in self.points:
                w.writerow([tag] + [repr(float(v)) for v in row])


def _dedupe(points: np.ndarray) -> np.ndarray:
    if len(points) < 2:
        return points
    _, first = np.unique(points, axis=0, return_index=True)
    return points[np.sort(first)]


def prune(aset: AntichainSet, new_points) -> AntichainSet:
    """Insert ``new_points`` and drop every dominated member.

    For a lower set, ``w`` is dropped if some other member ``z`` has
    ``w <= z``; for an upper set if ``w >= z``. Duplicates collapse to the
    first occurrence, so surviving members keep insertion order.

    Members of ``aset`` are taken to be pairwise incomparable already (true
    for every set built by this function), so only pairs involving a new
    point are compared.
    """
    new = np.asarray(new_points, dtype=float)
    if new.size == 0:
        return aset.copy()
    n = aset.n or new.shape[-1]
    new = _dedupe(new.reshape(-1, n))
    old = aset.points
    if len(old):
        # drop new points equal to an existing member
        same = np.all(new[:, None, :] == old[None, :, :], axis=2).any(axis=1)
        new = new[~same]
    if len(new) == 0:
        return aset.copy()
    pts = np.vstack([old, new]) if len(old) else new
    k = len(old)
    if aset.kind == "lower":
        # dom[i, j]: point i <= point j
        dom_new = np.all(new[:, None, :] <= pts[None, :, :], axis=2)
        dom_old = np.all(old[:, None, :] <= new[None, :, :], axis=2)
    else:
        dom_new = np.all(new[:, None, :] >= pts[None, :, :], axis=2)
        dom_old = np.all(old[:, None, :] >= new[None, :, :], axis=2)
    dom_new[np.arange(len(new)), k + np.arange(len(new))] = False
    keep = np.concatenate([~dom_old.any(axis=1), ~dom_new.any(axis=1)])
    return AntichainSet(aset.kind, pts[keep], n)


# -- Kamke-Muller --------------------------------------------------------------


@dataclass
class KamkeMullerReport:
    passed: bool
    worst_violation: float  # most negative checked entry (transformed coordinates)
    location: Optional[dict]  # {"x": [...], "p": [...], "entry": "df1/dx2"}
    nodes: int
    domain_errors: list = field(default_factory=list)
    tolerance: float = 0.0
    grid_density: int = 0

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_violation": self.worst_violation,
            "location": self.location,
            "nodes": self.nodes,
            "domain_errors": self.domain_errors[:50],
            "n_domain_errors": len(self.domain_errors),
            "tolerance": self.tolerance,
            "grid_density": self.grid_density,
        }


def _grid(lo, hi, density):
    axes = [np.linspace(a, b, density) if b > a else np.array([a]) for a, b in zip(lo, hi)]
    return axes


def check_kamke_muller(
    model: VectorFieldModel,
    state_box,
    p,
    cone_x: OrthantCone,
    param_box=None,
    cone_p: Optional[OrthantCone] = None,
    grid_density: int = 11,
    fd_step: float = 1e-6,
    param_density: int = 3,
    tol: Optional[float] = None,
) -> KamkeMullerReport:
    """Grid certificate for orthant monotonicity in the state and parameters.

    At every node of a ``grid_density``-per-axis grid over ``state_box``
    (times a ``param_density`` grid over the varied coordinates of
    ``param_box``), central differences give ``df/dx`` and ``df/dp``. In
    sign-transformed coordinates the off-diagonal state entries
    ``s_i s_j df_i/dx_j`` and all parameter entries ``s_i r_k df_i/dp_k``
    must be ``>= -tol``. Parameters fixed by the box (``p_min == p_max``)
    are not checked.

    ``tol`` defaults to ``1e-9`` times the largest Jacobian magnitude seen.
    """
    if grid_density < 2:
        raise ValueError("grid_density must be at least 2")
    lo, hi = (np.asarray(b, dtype=float) for b in state_box)
    if lo.shape != (model.n,) or hi.shape != (model.n,) or not np.all(hi > lo):
        raise ValueError("state box must be non-degenerate with one bound per state")
    if cone_x.n != model.n:
        raise ValueError("cone_x dimension does not match the model")
    sx = cone_x.array
    p0 = np.array(model.params(p))

    varied = []
    if param_box is not None:
        pmin = np.array(model.params(param_box[0]))
        pmax = np.array(model.params(param_box[1]))
        varied = [k for k in range(model.m) if pmin[k] != pmax[k]]
        if cone_p is None:
            raise ValueError("cone_p is required when a parameter box is given")
        if cone_p.n != model.m:
            raise ValueError("cone_p dimension does not match the parameter count")
        sp = cone_p.array
        plo = np.minimum(pmin, pmax)
        phi = np.maximum(pmin, pmax)
        p_axes = [np.linspace(plo[k], phi[k], param_density) for k in varied]
        p_nodes = []
        for combo in itertools.product(*p_axes) if varied else [()]:
            q = p0.copy() if not varied else pmin.copy()
            for k, v in zip(varied, combo):
                q[k] = v
            p_nodes.append(q)
    else:
        p_nodes = [p0]

    axes = _grid(lo, hi, grid_density)
    X = np.array(np.meshgrid(*axes, indexing="ij")).reshape(model.n, -1)  # (n, K)
    K = X.shape[1]
    hx = fd_step * np.maximum(1.0, np.abs(X))

    rhs = model.rhs
    n = model.n
    worst = np.inf
    worst_loc = None
    scale = 0.0
    errors = []
    entries = []  # (value array over nodes, label, p node)

    def eval_batch(Xb, q):
        return np.asarray(rhs(Xb, tuple(q)), dtype=float).reshape(n, -1)

    def eval_safe(Xb, q, what):
        try:
            return eval_batch(Xb, q)
        except ExpressionError:
            pass
        # fall back to per-node evaluation to localize domain errors
        out = np.full((n, Xb.shape[1]), np.nan)
        for k in range(Xb.shape[1]):
            try:
                out[:, k] = eval_batch(Xb[:, k : k + 1], q)[:, 0]
            except ExpressionError as exc:
                errors.append({"x": Xb[:, k].tolist(), "p": list(map(float, q)), "what": what, "error": str(exc)})
        return out

    for q in p_nodes:
        for j in range(n):
            Xp = X.copy()
            Xm = X.copy()
            Xp[j] += hx[j]
            Xm[j] -= hx[j]
            d = (eval_safe(Xp, q, f"d/dx{j + 1}") - eval_safe(Xm, q, f"d/dx{j + 1}")) / (2 * hx[j])
            for i in range(n):
                if i == j:
                    scale = max(scale, float(np.nanmax(np.abs(d[i]), initial=0.0)))
                    continue
                entries.append((sx[i] * sx[j] * d[i], f"df{i + 1}/dx{j + 1}", q))
        for k in varied:
            hp = fd_step * max(1.0, abs(q[k]))
            qp = q.copy()
            qm = q.copy()
            qp[k] += hp
            qm[k] -= hp
            name = model.param_names[k]
            d = (eval_safe(X, qp, f"d/d{name}") - eval_safe(X, qm, f"d/d{name}")) / (2 * hp)
            for i in range(n):
                entries.append((sx[i] * sp[k] * d[i], f"df{i + 1}/d{name}", q))

    for vals, _, _ in entries:
        scale = max(scale, float(np.nanmax(np.abs(vals), initial=0.0)))
    if tol is None:
        tol = 1e-9 * max(scale, 1.0)
    for vals, label, q in entries:
        if np.all(np.isnan(vals)):
            continue
        idx = int(np.nanargmin(vals))
        v = float(vals[idx])
        if v < worst:
            worst = v
            worst_loc = {"x": X[:, idx].tolist(), "p": list(map(float, q)), "entry": label}
    if worst == np.inf:
        worst = 0.0
    return KamkeMullerReport(
        passed=bool(worst >= -tol),
        worst_violation=worst,
        location=worst_loc,
        nodes=K * len(p_nodes),
        domain_errors=errors,
        tolerance=tol,
        grid_density=grid_density,
    )

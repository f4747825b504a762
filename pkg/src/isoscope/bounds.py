"""Basin bounds under parametric uncertainty for monotone bistable systems.

For a parameter box ``p_min <=_{K_p} p <=_{K_p} p_max`` and a system that is
monotone in both state and parameters, the stable equilibria move
monotonically with ``p`` and the basins nest::

    B(x*(p_max))  <=  B(x*(p))  <=  B(x*(p_min))
    B(x.(p_min))  <=  B(x.(p))  <=  B(x.(p_max))

where ``x*`` is the lower and ``x.`` the upper equilibrium in the state
order. Raising a parameter pushes the flow up in the order, which can only
move states out of the lower equilibrium's basin. The module checks the
hypotheses (bistability and monotonicity, the box, cross-convergence of the
corner equilibria, and strict separation ``x.(p_min) >> x*(p_max)``) and
tests the nesting on sampled states.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .levelset import LevelSetResult, SamplerConfig, StandardFrame, run_algorithm1
from .models import VectorFieldModel
from .order import OrthantCone, Relation, check_kamke_muller, compare, leq, strictly_less
from .spectral import (
    BasinOracle,
    EquilibriumSearchError,
    IsostableOracle,
    SpectralData,
    default_eps,
    find_equilibria,
)

log = logging.getLogger(__name__)

__all__ = [
    "ParameterBox",
    "CornerEquilibria",
    "BoundsReport",
    "BoundsConfig",
    "check_assumptions",
    "check_nesting",
    "nested_levelsets",
    "write_overlay",
    "evaluate_inner_set",
    "INDETERMINATE_LIMIT",
]

INDETERMINATE_LIMIT = 0.05


@dataclass
class ParameterBox:
    """``p_min <=_{K_p} p_max``; ``cone_p`` must be supplied by the caller.

    ``validate=False`` skips the order check, which is only useful for
    negative controls such as a box with its corners swapped.
    """

    p_min: tuple
    p_max: tuple
    cone_p: OrthantCone
    validate: bool = True

    def __post_init__(self):
        self.p_min = tuple(float(v) for v in np.ravel(self.p_min))
        self.p_max = tuple(float(v) for v in np.ravel(self.p_max))
        if len(self.p_min) != len(self.p_max) or len(self.p_min) != self.cone_p.n:
            raise ValueError("p_min, p_max and cone_p must have the same length")
        if self.validate and not leq(self.p_min, self.p_max, self.cone_p):
            raise ValueError("p_min is not below p_max in the parameter order")

    @property
    def midpoint(self) -> tuple:
        return tuple(0.5 * (a + b) for a, b in zip(self.p_min, self.p_max))

    def contains(self, p) -> bool:
        return leq(self.p_min, p, self.cone_p) and leq(p, self.p_max, self.cone_p)

    def swapped(self) -> "ParameterBox":
        return ParameterBox(self.p_max, self.p_min, self.cone_p, validate=False)

    def to_dict(self) -> dict:
        return {"p_min": list(self.p_min), "p_max": list(self.p_max), "cone_p": list(self.cone_p.sigma)}


@dataclass
class BoundsConfig:
    """Numerical settings shared by the bounds checks.

    ``search_box`` bounds the multi-start equilibrium search, ``state_box``
    the Kamke-Muller grid. ``T`` and ``eps`` default per parameter value to
    ``50/|lambda1|`` and ``0.05 |x* - x.|``.
    """

    search_box: tuple
    state_box: Optional[tuple] = None
    n_starts: int = 64
    km_grid: int = 11
    km_param_density: int = 3
    T: Optional[float] = None
    eps: Optional[float] = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    threads: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "search_box": [list(map(float, b)) for b in self.search_box],
            "state_box": None if self.state_box is None else [list(map(float, b)) for b in self.state_box],
            "n_starts": self.n_starts,
            "km_grid": self.km_grid,
            "km_param_density": self.km_param_density,
            "T": self.T,
            "eps": self.eps,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "seed": self.seed,
        }


@dataclass
class CornerEquilibria:
    """The lower (``star``) and upper (``bullet``) stable equilibria at one parameter value."""

    label: str
    p: tuple
    star: SpectralData
    bullet: SpectralData

    @property
    def eps(self) -> float:
        return default_eps(self.star, self.bullet)

    def oracles(self, model, config: BoundsConfig) -> tuple:
        kw = {"T": config.T, "eps": config.eps if config.eps is not None else self.eps}
        kw.update(rel_tol=config.rel_tol, abs_tol=config.abs_tol)
        return BasinOracle(model, self.p, self.star, **kw), BasinOracle(model, self.p, self.bullet, **kw)

    def to_dict(self) -> dict:
        return {
            "p": list(self.p),
            "x_star": self.star.x_star.tolist(),
            "x_bullet": self.bullet.x_star.tolist(),
            "lambda1_star": float(np.real(self.star.lambda1)),
            "lambda1_bullet": float(np.real(self.bullet.lambda1)),
        }


@dataclass
class BoundsReport:
    a1: Optional[dict] = None
    a2: Optional[dict] = None
    a3: Optional[dict] = None
    a4: Optional[dict] = None
    equilibria: dict = field(default_factory=dict)  # label -> CornerEquilibria
    equilibrium_order: Optional[dict] = None
    inclusion_violations: list = field(default_factory=list)
    samples_tested: int = 0
    indeterminate: int = 0
    notes: list = field(default_factory=list)

    @property
    def assumptions_passed(self) -> bool:
        return all(a is not None and a["passed"] for a in (self.a1, self.a2, self.a3, self.a4))

    @property
    def indeterminate_fraction(self) -> float:
        return self.indeterminate / self.samples_tested if self.samples_tested else 0.0

    @property
    def nesting_passed(self) -> bool:
        return not self.inclusion_violations and self.indeterminate_fraction <= INDETERMINATE_LIMIT

    def to_dict(self) -> dict:
        return {
            "a1": self.a1,
            "a2": self.a2,
            "a3": self.a3,
            "a4": self.a4,
            "equilibria": {k: v.to_dict() for k, v in self.equilibria.items()},
            "equilibrium_order": self.equilibrium_order,
            "inclusion_violations": self.inclusion_violations,
            "samples_tested": self.samples_tested,
            "indeterminate": self.indeterminate,
            "indeterminate_fraction": self.indeterminate_fraction,
            "notes": self.notes,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


# -- assumptions ------------------------------------------------------------------


def _corner_list(pbox: ParameterBox, p_test: Sequence = ()) -> list:
    out = [("p_min", pbox.p_min)]
    for k, q in enumerate(p_test):
        out.append((f"p{k}" if len(p_test) > 1 else "p", tuple(map(float, q))))
    out.append(("p_max", pbox.p_max))
    return out


def corner_equilibria(model, label, p, cone_x: OrthantCone, config: BoundsConfig) -> tuple:
    """Stable equilibria at ``p``; returns ``(CornerEquilibria or None, list of SpectralData)``."""
    eqs = find_equilibria(model, p, config.search_box, n_starts=config.n_starts, cone=cone_x, seed=config.seed)
    if len(eqs) != 2:
        return None, eqs
    return CornerEquilibria(label, model.params(p), eqs[0], eqs[1]), eqs


def check_assumptions(
    model: VectorFieldModel,
    pbox: ParameterBox,
    cone_x: OrthantCone,
    config: BoundsConfig,
    p=None,
) -> BoundsReport:
    """Check bistability/monotonicity, the box, cross-convergence and separation.

    A1: exactly two stable equilibria at each corner (and ``p`` if given), plus
    the Kamke-Muller grid certificate in state and parameters. A2: ``p`` lies
    in the box. A3: each corner's equilibria converge to the matching
    equilibrium under every other corner's dynamics. A4: ``x.(p_min) >> x*(p_max)``.

    Raises
    ------
    EquilibriumSearchError
        If no stable equilibrium is found at some parameter value.
    """
    report = BoundsReport()
    labels = _corner_list(pbox, [] if p is None else [p])
    found = {}
    counts = {}
    for label, q in labels:
        ce, eqs = corner_equilibria(model, label, q, cone_x, config)
        counts[label] = len(eqs)
        if ce is not None:
            found[label] = ce
    report.equilibria = found

    state_box = config.state_box if config.state_box is not None else config.search_box
    km = check_kamke_muller(
        model,
        state_box,
        pbox.p_min,
        cone_x,
        param_box=(pbox.p_min, pbox.p_max),
        cone_p=pbox.cone_p,
        grid_density=config.km_grid,
        param_density=config.km_param_density,
    )
    bistable = all(c == 2 for c in counts.values())
    diagnosis = None
    if not bistable:
        if len(set(counts.values())) > 1:
            diagnosis = f"bifurcation: stable equilibrium count differs across the box {counts}"
        else:
            diagnosis = f"not bistable: stable equilibrium counts {counts}"
    report.a1 = {
        "passed": bool(bistable and km.passed),
        "stable_counts": counts,
        "kamke_muller": km.to_dict(),
        "diagnosis": diagnosis,
    }

    in_box = True if p is None else pbox.contains(p)
    report.a2 = {
        "passed": bool(leq(pbox.p_min, pbox.p_max, pbox.cone_p) and in_box),
        "p_min_below_p_max": bool(leq(pbox.p_min, pbox.p_max, pbox.cone_p)),
        "p_in_box": bool(in_box),
    }

    if not bistable:
        report.a3 = {"passed": False, "reason": "needs two stable equilibria at every corner"}
        report.a4 = {"passed": False, "reason": "needs two stable equilibria at every corner"}
        return report

    report.a3 = _check_a3(model, found, config)
    lo, hi = found["p_min"], found["p_max"]
    margin = cone_x.array * (lo.bullet.x_star - hi.star.x_star)
    report.a4 = {
        "passed": bool(strictly_less(hi.star.x_star, lo.bullet.x_star, cone_x)),
        "x_bullet_p_min": lo.bullet.x_star.tolist(),
        "x_star_p_max": hi.star.x_star.tolist(),
        "margin": margin.tolist(),
    }
    report.equilibrium_order = equilibrium_order(found, cone_x, pbox)
    return report


def _check_a3(model, found: dict, config: BoundsConfig) -> dict:
    pairs = []
    ok = True
    for src in found.values():
        for dst in found.values():
            if src is dst:
                continue
            o_star, o_bullet = dst.oracles(model, config)
            s = o_star(src.star.x_star) == 0
            b = o_bullet(src.bullet.x_star) == 0
            ok &= s and b
            pairs.append({"from": src.label, "under": dst.label, "x_star_converges": bool(s), "x_bullet_converges": bool(b)})
    return {"passed": bool(ok), "pairs": pairs}


def equilibrium_order(found: dict, cone_x: OrthantCone, pbox: ParameterBox) -> dict:
    """Check that both equilibria are ordered like the parameters, corner to corner."""
    lo, hi = found["p_min"], found["p_max"]
    out = {"parameters_ordered": bool(leq(pbox.p_min, pbox.p_max, pbox.cone_p))}
    for name in ("star", "bullet"):
        a = getattr(lo, name).x_star
        b = getattr(hi, name).x_star
        rel, _ = compare(b, a, cone_x)
        out[f"x_{name}_p_max_above_p_min"] = rel in (Relation.GREATER, Relation.EQUAL)
    return out


# -- nesting ------------------------------------------------------------------------


def _ordered_pairs(corners: list, cone_p: OrthantCone) -> list:
    """Index pairs ``(i, j)`` with corner ``i`` above corner ``j``.

    The box corners are ordered by their labels, so a box with swapped
    corners is tested as labelled; interior values are compared in ``cone_p``.
    """
    out = []
    last = len(corners) - 1
    for i in range(len(corners)):
        for j in range(len(corners)):
            if i == j:
                continue
            interior = 0 < i < last and 0 < j < last
            if not interior:
                if (j == 0 or i == last) and not (i == 0 or j == last):
                    out.append((i, j))
            elif leq(corners[j].p, corners[i].p, cone_p) and corners[i].p != corners[j].p:
                out.append((i, j))
    return out


def _classify(model, corner: CornerEquilibria, config: BoundsConfig):
    o_star, o_bullet = corner.oracles(model, config)

    def fn(x):
        if o_star(x) == 0:
            return "star"
        if o_bullet(x) == 0:
            return "bullet"
        return "none"

    return fn


def check_nesting(
    model: VectorFieldModel,
    pbox: ParameterBox,
    cone_x: OrthantCone,
    config: BoundsConfig,
    p_test: Sequence = (),
    n_points: int = 500,
    sample_box=None,
    rng: Optional[np.random.Generator] = None,
    equilibria: Optional[dict] = None,
    executor: Optional[Executor] = None,
) -> BoundsReport:
    """Classify sampled states at every parameter value and look for nesting violations.

    Parameter values are ordered by their labels ``p_min <= p_test <= p_max``.
    For each ordered pair ``q1 >= q2`` a state in the basin of ``x*(q1)`` but
    not of ``x*(q2)`` is a violation, and so is a state in the basin of
    ``x.(q2)`` but not of ``x.(q1)``. States whose trajectory reaches neither
    equilibrium by ``T`` at some parameter value are indeterminate and left
    out of the comparison.
    """
    if not p_test:
        p_test = [pbox.midpoint]
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    labels = _corner_list(pbox, p_test)
    report = BoundsReport()
    corners = []
    for label, q in labels:
        ce = None if equilibria is None else equilibria.get(label)
        if ce is None:
            ce, eqs = corner_equilibria(model, label, q, cone_x, config)
            if ce is None:
                raise EquilibriumSearchError(f"{label}: expected 2 stable equilibria, found {len(eqs)}")
        corners.append(ce)
    report.equilibria = {c.label: c for c in corners}

    box = sample_box if sample_box is not None else config.search_box
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    pts = lo + (hi - lo) * rng.random((n_points, model.n))
    own_pool = None
    if executor is None and config.threads > 1:
        own_pool = executor = ThreadPoolExecutor(max_workers=config.threads)
    try:
        mapper = map if executor is None else executor.map
        cls = np.array([list(mapper(_classify(model, c, config), pts)) for c in corners])  # (q, point)
    finally:
        if own_pool is not None:
            own_pool.shutdown()

    determinate = np.all(cls != "none", axis=0)
    report.samples_tested = n_points
    report.indeterminate = int(np.count_nonzero(~determinate))
    star = cls == "star"
    bullet = cls == "bullet"
    for i, j in _ordered_pairs(corners, pbox.cone_p):
        hi_c, lo_c = corners[i], corners[j]
        bad_star = determinate & star[i] & ~star[j]
        bad_bullet = determinate & bullet[j] & ~bullet[i]
        for k in np.flatnonzero(bad_star):
            report.inclusion_violations.append(
                {"x": pts[k].tolist(), "kind": "x_star", "in_basin_at": hi_c.label, "not_at": lo_c.label}
            )
        for k in np.flatnonzero(bad_bullet):
            report.inclusion_violations.append(
                {"x": pts[k].tolist(), "kind": "x_bullet", "in_basin_at": lo_c.label, "not_at": hi_c.label}
            )
    if report.indeterminate_fraction > INDETERMINATE_LIMIT:
        report.notes.append(
            f"{report.indeterminate} of {n_points} states indeterminate (> {INDETERMINATE_LIMIT:.0%}); "
            "increase T or loosen eps"
        )
    return report


# -- level sets per corner -----------------------------------------------------------


def nested_levelsets(
    model: VectorFieldModel,
    pbox: ParameterBox,
    cone_x: OrthantCone,
    frame: StandardFrame,
    state_lo,
    state_hi,
    sampler: SamplerConfig,
    config: BoundsConfig,
    alpha: float = math.inf,
    p=None,
    equilibria: Optional[dict] = None,
    threads: int = 1,
) -> dict:
    """Run the level-set sampler for ``p_min``, ``p`` and ``p_max``.

    ``alpha = inf`` brackets the basin of ``x*``; a finite ``alpha`` brackets
    the isostable ``s1 = alpha``. Returns ``{label: LevelSetResult}``.
    """
    p = pbox.midpoint if p is None else p
    b0, b1 = frame.box_to_z(state_lo, state_hi)
    lower = frame.lower_limit(model.domain_box)
    out = {}
    for label, q in _corner_list(pbox, [p]):
        ce = None if equilibria is None else equilibria.get(label)
        if ce is None:
            ce, eqs = corner_equilibria(model, label, q, cone_x, config)
            if ce is None:
                raise EquilibriumSearchError(f"{label}: expected 2 stable equilibria, found {len(eqs)}")
        if math.isinf(alpha):
            oracle, _ = ce.oracles(model, config)
        else:
            eps = config.eps if config.eps is not None else ce.eps
            oracle = IsostableOracle(model, ce.p, ce.star, alpha=alpha, T=config.T, eps=eps, side="upper")
        desc = oracle.describe()
        desc["parameters"] = list(ce.p)
        desc["label"] = label
        out[label] = run_algorithm1(
            frame.wrap(oracle),
            b0,
            b1,
            sampler,
            threads=threads,
            lower_limit=lower,
            frame=frame,
            oracle_description=desc,
        )
    return out


def write_overlay(results: dict, path) -> Path:
    """Multi-series .dat: one block per (parameter label, set), in free state coordinates."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for label, res in results.items():
            cols = sorted(res.frame.order) if res.frame is not None else list(range(res.m_min.n))
            for kind in ("min", "max"):
                pts = res.states(kind)[:, cols]
                # sort along the first free coordinate so line plots read cleanly
                pts = pts[np.argsort(pts[:, 0], kind="stable")]
                fh.write(f"# {label} m_{kind} columns: " + " ".join(f"x{c + 1}" for c in cols) + "\n")
                for row in pts:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
                fh.write("\n\n")
    return path


def evaluate_inner_set(inner: LevelSetResult, oracle: Callable) -> np.ndarray:
    """Oracle values of ``inner.m_min`` states under another parameter's oracle (all 0 if nested)."""
    return np.array([oracle(x) for x in inner.states("min")], dtype=int)

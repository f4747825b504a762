"""Equilibria, Jacobian spectra, the dominant Koopman eigenfunction and the two oracles.

The dominant eigenfunction is estimated pointwise with the observable
``g(y) = w1 . (y - x*)``: following the flow, ``g(phi(t, x)) exp(-lambda1 t)``
converges to ``s1(x)``. Because ``w1`` annihilates every sub-dominant right
eigenvector, the remaining error is quadratic in the distance to ``x*`` and
the estimate improves at the rate ``exp(lambda1 t)``.

Trajectories are integrated in deviation coordinates ``y - x*`` so that the
error control resolves the deviation relative to its own size rather than
relative to ``|x*|``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .expr import ExpressionError
from .models import VectorFieldModel
from .ode import DormandPrince, IntegrationError, flow_endpoint
from .order import OrthantCone

log = logging.getLogger(__name__)

__all__ = [
    "SpectralData",
    "EigenfunctionEstimate",
    "EquilibriumSearchError",
    "jacobian",
    "dominant_eigenpair",
    "spectral_data",
    "newton_refine",
    "find_equilibria",
    "laplace_average_s1",
    "default_T",
    "default_eps",
    "IsostableOracle",
    "BasinOracle",
    "oracle_isostable",
    "oracle_basin",
]

DIVERGENCE_GUARD = 1e12
LADDER_FACTOR = 1.5
LADDER_START = 5.0  # in units of 1/|lambda1|


class EquilibriumSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralData:
    x_star: np.ndarray
    lambda1: complex
    v1: np.ndarray
    w1: np.ndarray
    jacobian: np.ndarray
    all_eigenvalues: np.ndarray
    simple: bool = True
    residual: float = 0.0

    @property
    def rate(self) -> float:
        """``-Re(lambda1)``, the asymptotic decay rate."""
        return -float(np.real(self.lambda1))

    @property
    def stable(self) -> bool:
        return bool(np.all(np.real(self.all_eigenvalues) < 0))

    def to_dict(self) -> dict:
        lam = complex(self.lambda1)
        return {
            "x_star": self.x_star.tolist(),
            "lambda1": lam.real if lam.imag == 0 else [lam.real, lam.imag],
            "v1": np.real(self.v1).tolist(),
            "w1": np.real(self.w1).tolist(),
            "eigenvalues": [[complex(e).real, complex(e).imag] for e in self.all_eigenvalues],
            "simple": self.simple,
            "residual": self.residual,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass
class EigenfunctionEstimate:
    value: float
    truncation_time: float
    converged: bool
    trace: list = field(default_factory=list)  # [(t, estimate), ...]
    diverged: bool = False
    resolution_limited: bool = False

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "estimate"])
            for t, v in self.trace:
                w.writerow([repr(float(t)), repr(float(v))])


# -- linear algebra -------------------------------------------------------------


def jacobian(model: VectorFieldModel, x, p, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian ``df/dx`` at ``x``."""
    x = np.asarray(x, dtype=float)
    params = model.params(p)
    n = model.n
    J = np.empty((n, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (np.asarray(model.rhs(xp, params)) - np.asarray(model.rhs(xm, params))) / (2 * h)
    return J


def dominant_eigenpair(J, sigma=None, tie_tol: float = 1e-12) -> tuple:
    """Eigenvalue of largest real part with right/left eigenvectors.

    Returns ``(lambda1, v1, w1, simple)`` with ``|v1| = 1``, ``w1 . v1 = 1``
    and the sign chosen so that ``sigma * v1`` has a nonnegative sum.
    ``simple`` is False when another eigenvalue ties on real part or when the
    eigenvalue is defective (left and right vectors orthogonal); in the latter
    case ``w1`` is only unit-normalized.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    if J.shape != (n, n):
        raise ValueError("Jacobian must be square")
    if n > 32:
        raise ValueError("dense eigen-decomposition limited to n <= 32")
    vals, vecs = np.linalg.eig(J)
    order = np.argsort(-vals.real, kind="stable")
    i1 = order[0]
    lam = vals[i1]
    simple = not (n > 1 and abs(vals[order[1]].real - lam.real) <= tie_tol * max(1.0, abs(lam.real)))
    v = vecs[:, i1]
    lvals, lvecs = np.linalg.eig(J.T)
    w = lvecs[:, int(np.argmin(np.abs(lvals - lam)))]
    if abs(lam.imag) == 0 or np.allclose(v.imag, 0) and np.allclose(w.imag, 0):
        v = v.real
        w = w.real
        lam = complex(lam.real, 0.0)
    v = v / np.linalg.norm(v)
    s = np.ones(n) if sigma is None else np.asarray(sigma, dtype=float)
    if np.real(np.sum(s * v)) < 0:
        v = -v
    d = np.dot(w, v)
    if abs(d) < 1e-12 * np.linalg.norm(w):
        # defective (Jordan-type) eigenvalue: no biorthogonal pair exists, so
        # keep a unit left vector and flag the pair as non-simple
        simple = False
        w = w / np.linalg.norm(w)
        if np.real(np.sum(s * w)) < 0:
            w = -w
    else:
        w = w / d
    if lam.imag == 0:
        lam = float(lam.real)
    return lam, v, w, simple


def spectral_data(model: VectorFieldModel, x_star, p, sigma=None, residual=None) -> SpectralData:
    J = jacobian(model, x_star, p)
    lam, v, w, simple = dominant_eigenpair(J, sigma)
    if residual is None:
        residual = float(np.linalg.norm(model.f(x_star, p)))
    return SpectralData(
        x_star=np.asarray(x_star, dtype=float).copy(),
        lambda1=lam,
        v1=v,
        w1=w,
        jacobian=J,
        all_eigenvalues=np.linalg.eigvals(J),
        simple=simple,
        residual=residual,
    )


# -- equilibria -------------------------------------------------------------------


def newton_refine(model: VectorFieldModel, x0, p, eq_tol=None, max_iter: int = 60):
    """Newton's method with finite-difference Jacobians and backtracking.

    Keeps iterating past ``eq_tol`` while the residual still shrinks so the
    result sits at round-off level. Returns ``(x, residual)``; raises
    :class:`EquilibriumSearchError` if ``eq_tol`` is not met.
    """
    x = np.array(x0, dtype=float)
    params = model.params(p)
    tol = eq_tol if eq_tol is not None else 1e-10 * (1.0 + np.linalg.norm(x))
    r = np.asarray(model.rhs(x, params), dtype=float)
    res = float(np.linalg.norm(r))
    polish = 0
    for _ in range(max_iter):
        J = jacobian(model, x, params)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise EquilibriumSearchError(f"singular Jacobian at {x.tolist()}")
        step = 1.0
        while True:
            xn = x + step * dx
            try:
                rn = np.asarray(model.rhs(xn, params), dtype=float)
                resn = float(np.linalg.norm(rn))
            except ExpressionError:
                resn = math.inf
            if resn < res or step < 1e-4:
                break
            step *= 0.5
        if not resn < res:
            break
        x, r, res = xn, rn, resn
        if res <= tol:
            polish += 1
            if polish > 3:
                break
    if not res <= tol:
        raise EquilibriumSearchError(f"Newton did not converge (|f| = {res:.3g}) near {x.tolist()}")
    return x, res


def find_equilibria(
    model: VectorFieldModel,
    p,
    search_box,
    n_starts: int = 64,
    eq_tol: Optional[float] = None,
    t_transient: float = 100.0,
    cone: Optional[OrthantCone] = None,
    seed: int = 0,
    include_unstable: bool = False,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-10,
) -> list:
    """Multi-start search for equilibria in ``search_box``.

    Each quasi-random start (plus, with ``cone``, the two extreme corners of
    the box in the cone order) is integrated for ``t_transient`` and then
    Newton-refined. Duplicates within ``1e-6`` relative distance are merged.
    Stable equilibria are returned (all of them with ``include_unstable``),
    sorted in the order of ``cone`` where comparable, else lexicographically.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in search_box)
    if not np.all(hi > lo):
        raise ValueError("search box must be non-degenerate")
    n = model.n
    sampler = qmc.Sobol(n, scramble=True, seed=seed)
    m = max(1, int(math.ceil(math.log2(max(n_starts, 1)))))
    starts = qmc.scale(sampler.random_base2(m), lo, hi)[:n_starts]
    if cone is not None:
        # for a monotone flow the two extreme corners of the box run to the
        # extreme equilibria, which quasi-random starts can easily miss
        s = cone.array
        corners = np.array([np.where(s > 0, lo, hi), np.where(s > 0, hi, lo)])
        starts = np.vstack([corners, starts])
    found = []
    for x0 in starts:
        x0 = np.clip(x0, lo, hi)
        try:
            xt = flow_endpoint(model, x0, p, t_transient, rel_tol, abs_tol)
            x, res = newton_refine(model, xt, p, eq_tol)
        except (IntegrationError, EquilibriumSearchError, ExpressionError) as exc:
            log.debug("start %s dropped: %s", x0, exc)
            continue
        if not model.in_domain(x):
            continue
        if any(np.linalg.norm(x - y) <= 1e-6 * (1.0 + np.linalg.norm(y)) for y, _ in found):
            continue
        found.append((x, res))
    if not found:
        raise EquilibriumSearchError("no equilibrium converged")
    sigma = None if cone is None else cone.sigma
    out = []
    for x, res in found:
        try:
            sd = spectral_data(model, x, p, sigma, residual=res)
        except np.linalg.LinAlgError as exc:
            log.warning("equilibrium %s dropped: %s", x.tolist(), exc)
            continue
        if sd.stable or include_unstable:
            out.append(sd)
    if not out:
        raise EquilibriumSearchError("no stable equilibrium found")
    s = np.ones(n) if cone is None else cone.array
    # ascending in the cone order: sort by the sign-weighted sum, a linear extension
    out.sort(key=lambda sd: (float(np.sum(s * sd.x_star)), tuple(sd.x_star)))
    return out


# -- Laplace averages -------------------------------------------------------------


def default_T(spec: SpectralData) -> float:
    return 50.0 / spec.rate


def default_eps(spec: SpectralData, other: Optional[SpectralData] = None) -> float:
    if other is not None:
        return 0.05 * float(np.linalg.norm(spec.x_star - other.x_star))
    return 0.05 * (1.0 + float(np.linalg.norm(spec.x_star)))


def _deviation_stepper(model, params, spec, x, rel_tol, abs_tol, extra=None):
    x_star = spec.x_star
    rhs = model.rhs
    domain = None
    if model.domain_box is not None:
        lo, hi = model.domain_box
        # error control is relative to the deviation, so a trajectory heading
        # for an equilibrium on the domain face may graze it by round-off
        slack = 1e3 * rel_tol * (1.0 + float(np.linalg.norm(x_star)))
        domain = (lo - x_star - slack, hi - x_star + slack)
    if extra is None:
        fun = lambda d: rhs(x_star + d, params)  # noqa: E731
        y0 = np.asarray(x, dtype=float) - x_star
    else:
        fun = extra
        y0 = np.concatenate([np.asarray(x, dtype=float) - x_star, [0.0, 0.0]])
        if domain is not None:
            domain = (np.concatenate([domain[0], [-np.inf, -np.inf]]), np.concatenate([domain[1], [np.inf, np.inf]]))
    return DormandPrince(fun, y0, rel_tol, abs_tol, domain)


def laplace_average_s1(
    model: VectorFieldModel,
    p,
    x,
    spec: SpectralData,
    t_max: Optional[float] = None,
    rel_conv_tol: float = 1e-6,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-14,
    form: str = "endpoint",
    extra_times=(),
    on_sample=None,
) -> EigenfunctionEstimate:
    """Estimate ``s1(x)`` on a geometric time ladder.

    Ladder times start at ``5/|lambda1|`` and grow by 1.5. The estimate is
    declared converged when three consecutive values agree to
    ``rel_conv_tol`` (relative, with an absolute floor of ``rel_conv_tol``
    times the natural scale ``|w1| |x - x*|``), or when the trajectory has
    reached ``x*`` to within round-off so no further resolution is
    possible. ``|estimate| > 1e12`` trips the divergence guard.

    ``form="cesaro"`` uses the running time average
    ``(1/t) int_0^t g(phi(s, x)) exp(-lambda1 s) ds`` instead of the endpoint
    value; it converges like ``1/t`` and is meant for cross-checks.

    ``on_sample(t, deviation)`` is called at every ladder time and at each
    of ``extra_times``; the oracles use it to read ``phi(T, x)`` from the
    same integration.
    """
    lam = np.real(spec.lambda1)
    if not lam < 0 or abs(np.imag(spec.lambda1)) > 0:
        raise ValueError("dominant eigenvalue must be real and negative")
    if abs(float(np.dot(np.real(spec.w1), np.real(spec.v1))) - 1.0) > 1e-6:
        raise ValueError("dominant eigenvalue is defective; s1 is not defined by a left eigenvector")
    rate = -float(lam)
    if t_max is None:
        t_max = 200.0 / rate
    x = np.asarray(x, dtype=float)
    params = model.params(p)
    w1 = np.real(spec.w1)
    x_star = spec.x_star
    dist0 = float(np.linalg.norm(x - x_star))
    s_scale = float(np.linalg.norm(w1)) * dist0
    # deviation below which round-off in x* + d dominates the estimate
    noise_floor = 1e8 * np.finfo(float).eps * (1.0 + float(np.linalg.norm(x_star)))

    if dist0 == 0.0:
        for t in extra_times:
            if on_sample is not None:
                on_sample(t, np.zeros(model.n))
        return EigenfunctionEstimate(0.0, 0.0, True, [(0.0, 0.0)])

    if form == "endpoint":
        stepper = _deviation_stepper(model, params, spec, x, rel_tol, abs_tol)
    elif form == "cesaro":
        rhs = model.rhs

        def aug(z):
            d = z[:-2]
            s = z[-1]
            return np.concatenate([rhs(x_star + d, params), [float(np.dot(w1, d)) * math.exp(rate * s), 1.0]])

        stepper = _deviation_stepper(model, params, spec, x, rel_tol, abs_tol, extra=aug)
    else:
        raise ValueError(f"unknown form {form!r}")

    ladder = []
    t = LADDER_START / rate
    while t < t_max:
        ladder.append(t)
        t *= LADDER_FACTOR
    ladder.append(t_max)
    pending_extra = sorted(float(t) for t in extra_times if t > 0)

    trace = []
    values = []
    converged = False
    diverged = False
    limited = False
    t_done = 0.0

    def advance(t_target):
        # hand out extra samples passed on the way to t_target
        while pending_extra and pending_extra[0] <= t_target:
            te = pending_extra.pop(0)
            z = stepper.advance(te)
            if on_sample is not None:
                on_sample(te, z[: model.n])
        return stepper.advance(t_target)

    k = 0
    while k < len(ladder):
        t = ladder[k]
        z = advance(t)
        d = z[: model.n]
        if form == "endpoint":
            est = float(np.dot(w1, d)) * math.exp(rate * t)
        else:
            est = float(z[model.n]) / t
        trace.append((t, est))
        values.append(est)
        t_done = t
        if not math.isfinite(est) or abs(est) > DIVERGENCE_GUARD:
            diverged = True
            break
        if len(values) >= 3:
            a, b, c = values[-3:]
            if abs(a - b) <= rel_conv_tol * max(abs(a), abs(b), s_scale) and abs(
                b - c
            ) <= rel_conv_tol * max(abs(b), abs(c), s_scale):
                converged = True
                break
        if form == "endpoint":
            dist = float(np.linalg.norm(d))
            if limited or dist <= 10 * noise_floor:
                # deviation already at the round-off floor: nothing left to resolve
                limited = converged = True
                break
            if k + 1 < len(ladder):
                # predicted deviation at the next rung; stop short of the floor
                t_next = ladder[k + 1]
                if dist * math.exp(-rate * (t_next - t)) < noise_floor:
                    t_stop = t + math.log(dist / (10 * noise_floor)) / rate
                    limited = True
                    if t_stop > t:
                        ladder.insert(k + 1, t_stop)
        k += 1
    if on_sample is not None:
        for te in pending_extra:
            z = stepper.advance(te)
            on_sample(te, z[: model.n])
    value = values[-1] if values else math.nan
    return EigenfunctionEstimate(
        value=value,
        truncation_time=t_done,
        converged=converged and not diverged,
        trace=trace,
        diverged=diverged,
        resolution_limited=limited,
    )


# -- oracles ------------------------------------------------------------------


@dataclass
class IsostableOracle:
    """0 iff the s1 condition holds and ``|phi(T, x) - x*| < eps``; else 1.

    ``side`` selects the s1 condition: ``"abs"`` is ``|s1(x)| < alpha``
    (sublevel set of ``|s1|``), ``"upper"`` is ``s1(x) < alpha`` and
    ``"lower"`` is ``s1(x) < -alpha``. Only the signed variants have a lower
    set as their 0-region, which the level-set sampler requires.
    ``alpha = inf`` drops the s1 condition (basin oracle).
    """

    model: VectorFieldModel
    p: tuple
    spec: SpectralData
    alpha: float = math.inf
    T: Optional[float] = None
    eps: Optional[float] = None
    side: str = "abs"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    rel_conv_tol: float = 1e-6
    t_max: Optional[float] = None

    def __post_init__(self):
        self.p = self.model.params(self.p)
        if self.T is None:
            self.T = default_T(self.spec)
        if self.eps is None:
            self.eps = default_eps(self.spec)
        if not (self.T > 0 and self.eps > 0):
            raise ValueError("T and eps must be positive")
        if self.side not in ("abs", "upper", "lower"):
            raise ValueError(f"side must be abs, upper or lower, got {self.side!r}")
        if not (self.alpha > 0 or (self.alpha == 0 and self.side != "abs")):
            raise ValueError("alpha must be positive (or zero for a signed side)")

    def describe(self) -> dict:
        return {
            "kind": "basin" if math.isinf(self.alpha) else "isostable",
            "alpha": "inf" if math.isinf(self.alpha) else self.alpha,
            "side": self.side,
            "T": self.T,
            "eps": self.eps,
            "x_star": self.spec.x_star.tolist(),
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
        }

    def _endpoint_ok(self, x) -> bool:
        stepper = _deviation_stepper(self.model, self.p, self.spec, x, self.rel_tol, self.abs_tol)
        d = stepper.advance(self.T)
        return float(np.linalg.norm(d)) < self.eps

    def __call__(self, x) -> int:
        x = np.asarray(x, dtype=float)
        try:
            if math.isinf(self.alpha):
                return 0 if self._endpoint_ok(x) else 1
            at_T = {}
            est = laplace_average_s1(
                self.model,
                self.p,
                x,
                self.spec,
                t_max=self.t_max,
                rel_conv_tol=self.rel_conv_tol,
                rel_tol=self.rel_tol,
                abs_tol=self.abs_tol,
                extra_times=(self.T,),
                on_sample=lambda t, d: at_T.__setitem__("d", d),
            )
        except (IntegrationError, ExpressionError) as exc:
            log.warning("oracle treats %s as outside the basin: %s", x.tolist(), exc)
            return 1
        if est.diverged or not math.isfinite(est.value):
            return 1
        s = est.value
        if self.side == "abs":
            ok = abs(s) < self.alpha
        elif self.side == "upper":
            ok = s < self.alpha
        else:
            ok = s < -self.alpha
        if not ok:
            return 1
        if "d" not in at_T:
            try:
                return 0 if self._endpoint_ok(x) else 1
            except (IntegrationError, ExpressionError):
                return 1
        return 0 if float(np.linalg.norm(at_T["d"])) < self.eps else 1


def BasinOracle(model, p, spec, T=None, eps=None, **kw) -> IsostableOracle:
    """Oracle for the basin of ``spec.x_star``: the isostable oracle with ``alpha = inf``.

    The endpoint test only has to land inside an ``eps``-ball, so it runs at
    looser default tolerances than the eigenfunction estimate.
    """
    kw.setdefault("rel_tol", 1e-8)
    kw.setdefault("abs_tol", 1e-10)
    return IsostableOracle(model, p, spec, alpha=math.inf, T=T, eps=eps, **kw)


def oracle_isostable(model, p, spec, x, alpha, T=None, eps=None, **kw) -> int:
    return IsostableOracle(model, p, spec, alpha=alpha, T=T, eps=eps, **kw)(x)


def oracle_basin(model, p, spec, x, T=None, eps=None, **kw) -> int:
    return BasinOracle(model, p, spec, T=T, eps=eps, **kw)(x)

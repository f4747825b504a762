"""Adaptive Dormand-Prince 5(4) integration of the flow map.

The stepper keeps its step size across calls to :meth:`DormandPrince.advance`,
so a caller sampling the flow at a ladder of times pays for one continuous
integration rather than a restart per sample.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import VectorFieldModel

__all__ = [
    "IntegrationError",
    "StepSizeUnderflow",
    "DomainExit",
    "Trajectory",
    "DormandPrince",
    "integrate",
    "flow_endpoint",
    "rk4_fixed",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
# PI exponents (Hairer & Wanner, DOPRI5 defaults)
BETA = 0.04
EXPO1 = 0.2 - 0.75 * BETA


class IntegrationError(RuntimeError):
    """The integrator could not reach ``t_end``."""

    def __init__(self, message: str, t: float):
        self.t = t
        super().__init__(message)


class StepSizeUnderflow(IntegrationError):
    """Step size fell below round-off level; ``t`` is the apparent blow-up time."""


class DomainExit(IntegrationError):
    """The state left the model's declared domain box."""


# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth-order minus embedded fourth-order weights
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), n)
    accepted_steps: int = 0
    rejected_steps: int = 0

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        n = self.states.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
            for t, y in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in y])


class DormandPrince:
    """Explicit embedded RK 5(4) stepper with a PI step-size controller.

    Parameters
    ----------
    fun : callable
        ``fun(y) -> dy/dt`` for the autonomous system.
    y0 : array_like
        Initial state; ``y`` starts as an exact copy.
    rtol, atol : float
        Mixed error tolerance ``atol + rtol * max(|y|, |y_new|)`` per component.
    domain : (lower, upper) or None
        Raise :class:`DomainExit` if an accepted state leaves this box.
    """

    def __init__(self, fun: Callable, y0, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, domain=None, t0=0.0):
        if rtol <= 0 or atol <= 0:
            raise ValueError("tolerances must be positive")
        self.fun = fun
        self.t = float(t0)
        self.y = np.array(y0, dtype=float)
        self.rtol = rtol
        self.atol = atol
        self.domain = domain
        self.k1 = np.asarray(fun(self.y), dtype=float)
        self.h = None
        self.err_old = 1e-4
        self.last_rejected = False
        self.accepted = 0
        self.rejected = 0

    def _norm(self, v, scale):
        return math.sqrt(float(np.mean((v / scale) ** 2)))

    def _initial_step(self):
        y, f0 = self.y, self.k1
        scale = self.atol + self.rtol * np.abs(y)
        d0 = self._norm(y, scale)
        d1 = self._norm(f0, scale)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        f1 = np.asarray(self.fun(y + h0 * f0), dtype=float)
        d2 = self._norm(f1 - f0, scale) / h0
        dm = max(d1, d2)
        h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
        return min(100 * h0, h1)

    def advance(self, t_end: float, record=None) -> np.ndarray:
        """Integrate to exactly ``t_end`` and return the state there.

        ``record`` is an optional callable ``record(t, y)`` invoked after each
        accepted step.
        """
        fun = self.fun
        if t_end < self.t:
            raise ValueError("cannot integrate backwards")
        if self.h is None:
            self.h = self._initial_step()
        t, y, k1, h = self.t, self.y, self.k1, self.h
        while t < t_end:
            h_min = 16 * np.finfo(float).eps * max(1.0, abs(t))
            if h < h_min:
                self.t, self.y, self.k1 = t, y, k1
                raise StepSizeUnderflow(f"step size underflow at t={t:.6g} (likely blow-up)", t)
            last = t + h >= t_end
            hs = t_end - t if last else h
            k2 = fun(y + hs * (A21 * k1))
            k3 = fun(y + hs * (A31 * k1 + A32 * k2))
            k4 = fun(y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = fun(y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = fun(y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            y_new = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            k7 = fun(y_new)
            err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = self._norm(err_vec, scale)
            if not math.isfinite(err):
                err = math.inf
            if err <= 1.0:
                fac = SAFETY * err ** (-EXPO1) * self.err_old**BETA if err > 0 else FAC_MAX
                fac = min(FAC_MAX, max(FAC_MIN, fac))
                if self.last_rejected:
                    fac = min(fac, 1.0)
                self.err_old = max(err, 1e-4)
                self.last_rejected = False
                t = t_end if last else t + hs
                y = y_new
                k1 = np.asarray(k7, dtype=float)
                self.accepted += 1
                if self.domain is not None:
                    lo, hi = self.domain
                    if np.any(y < lo) or np.any(y > hi):
                        self.t, self.y, self.k1 = t, y, k1
                        raise DomainExit(f"state left the domain box at t={t:.6g}", t)
                if record is not None:
                    record(t, y)
                # a clamped final step says nothing about the natural step size
                if not (last and hs < h):
                    h = hs * fac
            else:
                fac = SAFETY * err ** (-0.2) if math.isfinite(err) else FAC_MIN
                h = hs * max(FAC_MIN, fac)
                self.last_rejected = True
                self.rejected += 1
        self.t, self.y, self.k1, self.h = t, y, k1, h
        return y.copy()


def _check(model: VectorFieldModel, x0, t_end, rel_tol, abs_tol):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n,):
        raise ValueError(f"initial state must have shape ({model.n},), got {x0.shape}")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    if not model.in_domain(x0):
        raise DomainExit("initial state outside the domain box", 0.0)
    return x0


def integrate(
    model: VectorFieldModel,
    x0,
    p,
    t_end: float,
    rel_tol: float = DEFAULT_RTOL,
    abs_tol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Solve ``x' = f(x, p)``, ``x(0) = x0`` on ``[0, t_end]``, keeping every accepted step."""
    x0 = _check(model, x0, t_end, rel_tol, abs_tol)
    params = model.params(p)
    rhs = model.rhs
    stepper = DormandPrince(lambda y: rhs(y, params), x0, rel_tol, abs_tol, model.domain_box)
    times = [0.0]
    states = [x0.copy()]

    def record(t, y):
        times.append(t)
        states.append(y)

    stepper.advance(t_end, record)
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        accepted_steps=stepper.accepted,
        rejected_steps=stepper.rejected,
    )


def flow_endpoint(
    model: VectorFieldModel,
    x0,
    p,
    t_end: float,
    rel_tol: float = DEFAULT_RTOL,
    abs_tol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """``phi(t_end, x0, p)`` without storing the intermediate states."""
    x0 = _check(model, x0, t_end, rel_tol, abs_tol)
    params = model.params(p)
    rhs = model.rhs
    stepper = DormandPrince(lambda y: rhs(y, params), x0, rel_tol, abs_tol, model.domain_box)
    return stepper.advance(t_end)


def rk4_fixed(model: VectorFieldModel, x0, p, t_end: float, h: float) -> np.ndarray:
    """Classical fixed-step RK4; a slow, independent reference for tests."""
    params = model.params(p)
    rhs = model.rhs
    y = np.array(x0, dtype=float)
    steps = int(math.ceil(t_end / h - 1e-9))
    dt = t_end / steps
    for _ in range(steps):
        k1 = rhs(y, params)
        k2 = rhs(y + 0.5 * dt * k1, params)
        k3 = rhs(y + 0.5 * dt * k2, params)
        k4 = rhs(y + dt * k3, params)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y

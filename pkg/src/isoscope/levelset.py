"""Oracle-driven level sets of increasing functions.

A level set ``{z : g(z) = alpha}`` of an increasing ``g`` is represented by
two antichains in the standard (componentwise) order: ``m_min``, the largest
known points with oracle value 0, and ``m_max``, the smallest known points
with oracle value 1. The lower closure of ``m_min`` is certified 0, the upper
closure of ``m_max`` certified 1, and whatever remains of the box is the
unclassified set whose measure serves as the error.

The last coordinate ``z_n`` plays a special role: the level set is treated
as a graph over the first ``n - 1`` coordinates, so random samples are drawn
on the ``z_n = const`` face and then placed in the still-unclassified
interval along ``z_n``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .order import AntichainSet, OracleInconsistency, prune

log = logging.getLogger(__name__)

__all__ = [
    "Distribution",
    "SamplerConfig",
    "LevelSetResult",
    "StandardFrame",
    "BoundsAdjustmentError",
    "AdmissibleSetEmpty",
    "adjust_bounds",
    "greedy_boxes",
    "sample_random",
    "measure_admissible",
    "run_algorithm1",
    "check_sandwich",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1
MAX_REDRAWS = 100


class BoundsAdjustmentError(RuntimeError):
    """The level set does not cross the box within the allowed adjustments."""

    def __init__(self, message: str, face: str, b0, b1):
        self.face = face
        self.b0 = np.asarray(b0, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        super().__init__(message)


class AdmissibleSetEmpty(RuntimeError):
    """No unclassified point could be drawn: the sets classify (almost) the whole box."""


# -- configuration ----------------------------------------------------------------


_BETA_RE = re.compile(r"^\s*beta\s*\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)\s*$")


@dataclass(frozen=True)
class Distribution:
    """Sampling law on ``[0, 1]``, rescaled to an interval by the caller."""

    kind: str = "uniform"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "beta"):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if self.kind == "beta" and not (self.a > 0 and self.b > 0):
            raise ValueError("beta parameters must be positive")

    @classmethod
    def parse(cls, spec) -> "Distribution":
        """Accept ``"uniform"``, ``"beta(a,b)"``, a mapping or a Distribution."""
        if isinstance(spec, Distribution):
            return spec
        if isinstance(spec, dict):
            return cls(**spec)
        text = str(spec).strip().lower()
        if text == "uniform":
            return cls()
        m = _BETA_RE.match(text)
        if m is None:
            raise ValueError(f"cannot parse distribution {spec!r}; use 'uniform' or 'beta(a,b)'")
        return cls("beta", float(m.group(1)), float(m.group(2)))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return rng.random(size)
        return rng.beta(self.a, self.b, size)

    def __str__(self) -> str:
        return "uniform" if self.kind == "uniform" else f"beta({self.a:g},{self.b:g})"


@dataclass(frozen=True)
class SamplerConfig:
    """Sample budget and laws for :func:`run_algorithm1`.

    Attributes
    ----------
    n_greedy, n_random : int
        Greedy and random samples per iteration.
    n_total : int
        Total sample budget; the loop runs ``ceil(n_total / (n_greedy + n_random))`` times.
    dist1, dist2 : Distribution or str
        Laws for greedy samples inside a box and for random samples.
    measure_samples : int
        Monte Carlo points used to estimate the unclassified fraction.
    seed : int
        Master seed; every random stream is derived from it.
    init : str
        ``"corners"`` seeds the antichains with the two box corners,
        ``"faces"`` with the extreme vertices of the adjusted faces.
    growth : float
        Factor for the bound adjustment.
    max_adjust_iters : int
        Adjustment steps before giving up.
    """

    n_greedy: int = 10
    n_random: int = 10
    n_total: int = 1000
    dist1: Distribution = Distribution()
    dist2: Distribution = Distribution()
    measure_samples: int = 20000
    seed: int = 0
    init: str = "corners"
    growth: float = 2.0
    max_adjust_iters: int = 40

    def __post_init__(self):
        object.__setattr__(self, "dist1", Distribution.parse(self.dist1))
        object.__setattr__(self, "dist2", Distribution.parse(self.dist2))
        if self.n_greedy < 0 or self.n_random < 0 or self.n_greedy + self.n_random < 1:
            raise ValueError("need n_greedy + n_random >= 1 with both nonnegative")
        if self.n_total < self.n_greedy + self.n_random:
            raise ValueError("n_total must be at least n_greedy + n_random")
        if self.measure_samples < 1:
            raise ValueError("measure_samples must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.init not in ("corners", "faces"):
            raise ValueError(f"init must be 'corners' or 'faces', got {self.init!r}")
        if not self.growth > 1:
            raise ValueError("growth must exceed 1")

    @property
    def batch(self) -> int:
        return self.n_greedy + self.n_random

    @property
    def iterations(self) -> int:
        return math.ceil(self.n_total / self.batch)

    def to_dict(self) -> dict:
        return {
            "n_greedy": self.n_greedy,
            "n_random": self.n_random,
            "n_total": self.n_total,
            "dist1": str(self.dist1),
            "dist2": str(self.dist2),
            "measure_samples": self.measure_samples,
            "seed": int(self.seed),
            "init": self.init,
            "growth": self.growth,
            "max_adjust_iters": self.max_adjust_iters,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(**d)


# -- coordinates ------------------------------------------------------------------


@dataclass(frozen=True)
class StandardFrame:
    """Map model states to standard-order sampling coordinates.

    ``z`` collects the free coordinates ``sigma_i * x_i`` with the sweep axis
    moved last; ``fixed`` pins coordinates for cross-sections.
    """

    sigma: tuple
    sweep_axis: int
    fixed: tuple = ()  # ((index, value), ...)

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(int(s) for s in self.sigma))
        object.__setattr__(self, "fixed", tuple((int(i), float(v)) for i, v in self.fixed))
        n = len(self.sigma)
        if any(s not in (-1, 1) for s in self.sigma):
            raise ValueError("sigma entries must be +1 or -1")
        fixed_idx = [i for i, _ in self.fixed]
        if not 0 <= self.sweep_axis < n or self.sweep_axis in fixed_idx:
            raise ValueError("sweep axis must be a free coordinate")
        if any(not 0 <= i < n for i in fixed_idx) or len(set(fixed_idx)) != len(fixed_idx):
            raise ValueError("fixed coordinates must be distinct valid indices")

    @property
    def n_state(self) -> int:
        return len(self.sigma)

    @property
    def order(self) -> list:
        fixed_idx = {i for i, _ in self.fixed}
        free = [i for i in range(self.n_state) if i not in fixed_idx and i != self.sweep_axis]
        return free + [self.sweep_axis]

    @property
    def n(self) -> int:
        return len(self.order)

    def to_z(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = self.order
        return np.asarray(self.sigma, dtype=float)[idx] * x[..., idx]

    def to_x(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x = np.zeros(z.shape[:-1] + (self.n_state,))
        for i, v in self.fixed:
            x[..., i] = v
        idx = self.order
        x[..., idx] = np.asarray(self.sigma, dtype=float)[idx] * z
        return x

    def box_to_z(self, lo, hi) -> tuple:
        """Standard-order corners ``(b0, b1)`` of the state box ``[lo, hi]``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        a, b = self.to_z(lo), self.to_z(hi)
        return np.minimum(a, b), np.maximum(a, b)

    def lower_limit(self, domain_box) -> Optional[np.ndarray]:
        """Smallest admissible ``z`` implied by a state domain box, or None."""
        if domain_box is None:
            return None
        lo, hi = (np.asarray(b, dtype=float) for b in domain_box)
        idx = self.order
        s = np.asarray(self.sigma)[idx]
        return np.where(s > 0, lo[idx], -hi[idx])

    def wrap(self, oracle: Callable) -> Callable:
        """Oracle on ``z`` built from an oracle on states."""
        to_x = self.to_x
        return lambda z: oracle(to_x(z))

    def to_dict(self) -> dict:
        return {
            "sigma": list(self.sigma),
            "sweep_axis": self.sweep_axis,
            "fixed": [[i, v] for i, v in self.fixed],
            "z_order": self.order,
        }


# -- oracle bookkeeping ------------------------------------------------------------


class _Evaluator:
    """Caches oracle values, counts calls and checks that every answer is 0 or 1.

    A point is evaluated at most once, so a nondeterministic oracle cannot
    return two values for the same point within one run.
    """

    def __init__(self, oracle: Callable, executor: Optional[Executor] = None):
        self.oracle = oracle
        self.executor = executor
        self.cache: dict = {}
        self.calls = 0

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        keys = [p.tobytes() for p in pts]
        todo = []
        seen = set()
        for k, p in zip(keys, pts):
            if k not in self.cache and k not in seen:
                seen.add(k)
                todo.append((k, p))
        if todo:
            mapper = map if self.executor is None else self.executor.map
            values = list(mapper(self.oracle, [p for _, p in todo]))
            for (k, p), v in zip(todo, values):
                if v not in (0, 1):
                    raise ValueError(f"oracle returned {v!r} at {p.tolist()}; expected 0 or 1")
                self.cache[k] = int(v)
            self.calls += len(todo)
        return np.array([self.cache[k] for k in keys], dtype=int)


# -- bound adjustment ----------------------------------------------------------------


def _face(b0, b1, last: float) -> np.ndarray:
    n = len(b0)
    verts = np.array(list(product(*[(b0[i], b1[i]) for i in range(n - 1)])), dtype=float).reshape(-1, n - 1)
    return np.column_stack([verts, np.full(len(verts), last)])


def adjust_bounds(
    oracle: Callable,
    b0,
    b1,
    growth: float = 2.0,
    max_iters: int = 40,
    lower_limit=None,
) -> tuple:
    """Grow the box along ``z_n`` until its two ``z_n``-faces are classified.

    The top face ``z_n = b1_n`` must be all 1 and the bottom face
    ``z_n = b0_n`` all 0. The top moves up by ``(growth - 1)`` times
    ``max(|b1_n|, b1_n - b0_n)`` per step (plain multiplication when
    ``b1_n`` dominates the width; the width term lets a zero bound move).
    The bottom moves down likewise; once it sits on ``lower_limit[-1]`` the
    first ``n - 1`` coordinates of ``b1`` are pulled toward ``b0`` by
    ``1/growth`` instead.

    ``oracle`` takes a single point, or is an internal evaluator taking a
    batch. Returns the adjusted ``(b0, b1)``.

    Raises
    ------
    BoundsAdjustmentError
        If the faces are still unclassified after ``max_iters`` steps.
    """
    b0 = np.array(b0, dtype=float)
    b1 = np.array(b1, dtype=float)
    if b0.shape != b1.shape or b0.ndim != 1:
        raise ValueError("b0 and b1 must be vectors of equal length")
    if not np.all(b0 < b1):
        raise ValueError("need b0 < b1 componentwise")
    if not growth > 1:
        raise ValueError("growth must exceed 1")
    evaluate = oracle if isinstance(oracle, _Evaluator) else _Evaluator(oracle)
    floor = None if lower_limit is None else float(np.asarray(lower_limit, dtype=float)[-1])
    if floor is not None and b0[-1] < floor:
        raise ValueError("b0 lies below the lower limit")

    for _ in range(max_iters + 1):
        top_ok = bool(np.all(evaluate(_face(b0, b1, b1[-1])) == 1))
        bottom_ok = bool(np.all(evaluate(_face(b0, b1, b0[-1])) == 0))
        if top_ok and bottom_ok:
            return b0, b1
        width = b1[-1] - b0[-1]
        if not top_ok:
            b1[-1] += (growth - 1.0) * max(abs(b1[-1]), width)
        if not bottom_ok:
            step = (growth - 1.0) * max(abs(b0[-1]), width)
            if floor is not None and b0[-1] - step < floor:
                if b0[-1] > floor:
                    b0[-1] = floor
                else:
                    b1[:-1] = b0[:-1] + (b1[:-1] - b0[:-1]) / growth
            else:
                b0[-1] -= step
    face = "top (needs oracle 1)" if not top_ok else "bottom (needs oracle 0)"
    raise BoundsAdjustmentError(
        f"level set does not cross the box after {max_iters} adjustments; failing face: {face}",
        face.split()[0],
        b0,
        b1,
    )


# -- sampling -------------------------------------------------------------------------


def greedy_boxes(m_min: AntichainSet, m_max: AntichainSet, n_greedy: int) -> list:
    """The ``n_greedy`` largest boxes spanned by a 0-point and a 1-point above it.

    For every ``z`` in the union of the sets, candidate partners are the
    points ``w >= z`` of the union with no third union point between them;
    the largest such box is kept per ``z``. Boxes are ranked by volume,
    ties broken by the lexicographic order of ``(z, w)``; zero-volume boxes
    are skipped. Returns ``[(lower, upper, volume), ...]``.

    Within one antichain no two points are ordered, so a box with a positive
    volume can only join a point of ``m_min`` to a point of ``m_max``, and a
    point strictly between them would contradict one of the two antichains.
    The "no intermediate point" condition therefore holds for every such pair
    and the scan reduces to ``m_min`` x ``m_max``.
    """
    if n_greedy <= 0 or len(m_min) == 0 or len(m_max) == 0:
        return []
    A = m_min.points
    B = m_max.points
    ge = np.ones((len(A), len(B)), dtype=bool)
    vol = np.ones((len(A), len(B)))
    for k in range(A.shape[1]):
        diff = B[None, :, k] - A[:, None, k]
        ge &= diff > 0
        vol *= np.maximum(diff, 0.0)
    vol = np.where(ge, vol, 0.0)
    cands = []
    for i in np.flatnonzero(vol.max(axis=1) > 0):
        row = vol[i]
        best = row.max()
        js = np.flatnonzero(row == best)
        # equal-volume partners: keep the lexicographically smallest corner
        j = min(js, key=lambda j: tuple(B[j]))
        cands.append((float(best), tuple(A[i]), tuple(B[j])))
    cands.sort(key=lambda c: (-c[0], c[1], c[2]))
    return [(np.array(lo), np.array(hi), v) for v, lo, hi in cands[:n_greedy]]


def _interval(m_min: AntichainSet, m_max: AntichainSet, head, b0n: float, b1n: float) -> tuple:
    """Unclassified ``z_n`` interval ``(L, U)`` above the face point ``head``."""
    L, U = b0n, b1n
    if len(m_min):
        P = m_min.points
        mask = np.all(P[:, :-1] >= head, axis=1)
        if mask.any():
            L = max(L, float(P[mask, -1].max()))
    if len(m_max):
        P = m_max.points
        mask = np.all(P[:, :-1] <= head, axis=1)
        if mask.any():
            U = min(U, float(P[mask, -1].min()))
    return L, U


def sample_random(
    m_min: AntichainSet,
    m_max: AntichainSet,
    box,
    dist2,
    n_random: int,
    rng: np.random.Generator,
    max_redraws: int = MAX_REDRAWS,
) -> list:
    """Draw ``n_random`` points in the unclassified part of ``box``.

    The first ``n - 1`` coordinates come from ``dist2`` over the box face;
    ``z_n`` is then drawn from ``dist2`` rescaled to the interval that
    neither closure has classified. An empty interval triggers a redraw.

    Raises
    ------
    AdmissibleSetEmpty
        If every sample exhausted its redraws.
    """
    dist2 = Distribution.parse(dist2)
    b0, b1 = (np.asarray(b, dtype=float) for b in box)
    out = []
    skipped = 0
    for _ in range(n_random):
        for _ in range(max_redraws):
            head = b0[:-1] + (b1[:-1] - b0[:-1]) * dist2.sample(rng, len(b0) - 1)
            L, U = _interval(m_min, m_max, head, b0[-1], b1[-1])
            if L < U:
                zn = L + (U - L) * float(dist2.sample(rng, 1)[0])
                out.append(np.append(head, zn))
                break
        else:
            skipped += 1
    if n_random > 0 and skipped == n_random:
        raise AdmissibleSetEmpty(f"no unclassified point found in {n_random * max_redraws} draws")
    if skipped:
        log.warning("skipped %d of %d random samples after %d redraws each", skipped, n_random, max_redraws)
    return out


def _uniform_points(box, count: int, rng: np.random.Generator) -> np.ndarray:
    b0, b1 = (np.asarray(b, dtype=float) for b in box)
    return b0 + (b1 - b0) * rng.random((count, len(b0)))


def measure_admissible(
    m_min: AntichainSet,
    m_max: AntichainSet,
    box,
    measure_samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo fraction of ``box`` covered by neither closure."""
    pts = _uniform_points(box, measure_samples, rng)
    classified = m_min.covers(pts) | m_max.covers(pts)
    return float(np.count_nonzero(~classified)) / measure_samples


def _measure_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0,)))


def _iteration_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1, i)))


# -- the algorithm ---------------------------------------------------------------------


@dataclass
class LevelSetResult:
    """Output of :func:`run_algorithm1` in sampling coordinates ``z``."""

    m_min: AntichainSet
    m_max: AntichainSet
    box: tuple
    error_trace: list  # [(iteration, unclassified fraction, oracle calls), ...]
    seed: int
    oracle_calls: int
    config: SamplerConfig
    frame: Optional[StandardFrame] = None
    oracle_description: Optional[dict] = None
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def final_fraction(self) -> float:
        return self.error_trace[-1][1]

    def states(self, kind: str) -> np.ndarray:
        """Members of ``m_min`` (``"min"``) or ``m_max`` (``"max"``) as model states."""
        pts = (self.m_min if kind == "min" else self.m_max).points
        return pts if self.frame is None else self.frame.to_x(pts)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "seed": int(self.seed),
            "config": self.config.to_dict(),
            "box": {"b0": self.box[0].tolist(), "b1": self.box[1].tolist()},
            "oracle": self.oracle_description,
            "oracle_calls": self.oracle_calls,
            "stopped_early": self.stopped_early,
            "n_min": len(self.m_min),
            "n_max": len(self.m_max),
            "error_trace": [[int(i), float(a), int(c)] for i, a, c in self.error_trace],
        }
        if self.frame is not None:
            out["frame"] = self.frame.to_dict()
        out.update(self.extra)
        return out

    def _write_csv(self, path: Path, kind: str) -> None:
        pts = self.states(kind)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["set"] + [f"x{i + 1}" for i in range(pts.shape[1])])
            for row in pts:
                w.writerow([kind] + [repr(float(v)) for v in row])

    def write_dat(self, path) -> Optional[Path]:
        """Two gnuplot data blocks (``m_min`` then ``m_max``) over the free state coordinates.

        Only written for two or three free coordinates; returns the path or None.
        """
        if self.frame is None:
            cols = list(range(self.m_min.n))
        else:
            cols = sorted(self.frame.order)
        if len(cols) not in (2, 3):
            return None
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + " ".join(f"x{c + 1}" for c in cols) + "\n")
            for kind in ("min", "max"):
                fh.write(f"# m_{kind}\n")
                for row in self.states(kind)[:, cols]:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
                fh.write("\n\n")
        return path

    def save(self, outdir, prefix: str = "") -> dict:
        """Write the JSON manifest, two CSVs and (2-D/3-D) a .dat file; return the paths."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {
            "manifest": outdir / f"{prefix}manifest.json",
            "m_min": outdir / f"{prefix}m_min.csv",
            "m_max": outdir / f"{prefix}m_max.csv",
        }
        self._write_csv(paths["m_min"], "min")
        self._write_csv(paths["m_max"], "max")
        dat = self.write_dat(outdir / f"{prefix}levelset.dat")
        if dat is not None:
            paths["dat"] = dat
        with open(paths["manifest"], "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")
        return paths


def run_algorithm1(
    oracle: Callable,
    b0,
    b1,
    config: SamplerConfig,
    *,
    threads: int = 1,
    executor: Optional[Executor] = None,
    lower_limit=None,
    frame: Optional[StandardFrame] = None,
    oracle_description: Optional[dict] = None,
) -> LevelSetResult:
    """Compute the level set where ``oracle`` switches from 0 to 1.

    ``oracle(z)`` must be deterministic with a lower set as its 0-region in
    the componentwise order. Oracle calls within an iteration run on
    ``executor`` (or a pool of ``threads`` workers); all random numbers are
    drawn serially from streams split off ``config.seed``, so the result does
    not depend on the number of workers.

    Raises
    ------
    BoundsAdjustmentError
        If the box cannot be adjusted.
    OracleInconsistency
        If the oracle contradicts itself at a point.
    """
    own_pool = None
    if executor is None and threads > 1:
        own_pool = executor = ThreadPoolExecutor(max_workers=threads)
    try:
        return _run(oracle, b0, b1, config, executor, lower_limit, frame, oracle_description)
    finally:
        if own_pool is not None:
            own_pool.shutdown()


def _run(oracle, b0, b1, config, executor, lower_limit, frame, description) -> LevelSetResult:
    evaluate = _Evaluator(oracle, executor)
    b0, b1 = adjust_bounds(evaluate, b0, b1, config.growth, config.max_adjust_iters, lower_limit)
    box = (b0, b1)
    n = len(b0)
    m_min = AntichainSet("lower", n=n)
    m_max = AntichainSet("upper", n=n)
    if config.init == "corners":
        init0, init1 = b0[None, :], b1[None, :]
    else:
        init0 = _face(b0, b1, b0[-1])
        init1 = _face(b0, b1, b1[-1])
    v0, v1 = evaluate(init0), evaluate(init1)
    if np.any(v0 != 0) or np.any(v1 != 1):
        raise OracleInconsistency("box corners do not bracket the level set after adjustment")
    m_min = prune(m_min, init0)
    m_max = prune(m_max, init1)

    # fixed measurement points: the unclassified mask can only shrink
    mc = _uniform_points(box, config.measure_samples, _measure_rng(config.seed))
    classified = m_min.covers(mc) | m_max.covers(mc)
    trace = [(0, float(np.count_nonzero(~classified)) / len(mc), evaluate.calls)]
    stopped = False
    conflicts = 0

    for it in range(1, config.iterations + 1):
        rng = _iteration_rng(config.seed, it)
        batch = []
        for lo, hi, _ in greedy_boxes(m_min, m_max, config.n_greedy):
            batch.append(lo + (hi - lo) * config.dist1.sample(rng, n))
        if config.n_random:
            try:
                batch.extend(sample_random(m_min, m_max, box, config.dist2, config.n_random, rng))
            except AdmissibleSetEmpty:
                if not batch:
                    log.info("no unclassified points left after %d iterations", it - 1)
                    stopped = True
                    break
        if not batch:
            stopped = True
            break
        pts = np.array(batch)
        vals = evaluate(pts)
        zeros, ones = pts[vals == 0], pts[vals == 1]
        # a 0 above a known 1 (or the reverse) means the oracle is not monotone
        # here; such points are kept out of the sets and counted
        bad0 = m_max.covers(zeros) if len(zeros) else np.zeros(0, dtype=bool)
        bad1 = m_min.covers(ones) if len(ones) else np.zeros(0, dtype=bool)
        if bad0.any() or bad1.any():
            conflicts += int(bad0.sum() + bad1.sum())
            log.warning("iteration %d: %d samples contradict the order of earlier ones", it, bad0.sum() + bad1.sum())
            zeros, ones = zeros[~bad0], ones[~bad1]
        m_min = prune(m_min, zeros)
        m_max = prune(m_max, ones)
        un = ~classified
        if len(zeros):
            classified[un] |= AntichainSet("lower", zeros, n).covers(mc[un])
        un = ~classified
        if len(ones):
            classified[un] |= AntichainSet("upper", ones, n).covers(mc[un])
        trace.append((it, float(np.count_nonzero(~classified)) / len(mc), evaluate.calls))

    return LevelSetResult(
        m_min=m_min,
        m_max=m_max,
        box=box,
        error_trace=trace,
        seed=int(config.seed),
        oracle_calls=evaluate.calls,
        config=config,
        frame=frame,
        oracle_description=description,
        stopped_early=stopped,
        extra={"monotonicity_conflicts": conflicts},
    )


def check_sandwich(
    result: LevelSetResult,
    oracle: Callable,
    n_pairs: int = 10,
    rng: Optional[np.random.Generator] = None,
    depth: int = 20,
) -> list:
    """Bisect between random ordered pairs ``m <= M`` (``m`` in ``m_min``, ``M`` in ``m_max``).

    Returns one record per pair: ``(m, M, flip_point, flipped)`` where
    ``flipped`` says the oracle read 0 at ``m`` and 1 at ``M`` and the
    bisection closed in on a switch. ``oracle`` works in the same
    coordinates as the result sets.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    A, B = result.m_min.points, result.m_max.points
    ordered = np.argwhere(np.all(A[:, None, :] <= B[None, :, :], axis=2))
    if len(ordered) == 0:
        return []
    pick = rng.choice(len(ordered), size=min(n_pairs, len(ordered)), replace=False)
    out = []
    for i, j in ordered[np.sort(pick)]:
        lo, hi = A[i].copy(), B[j].copy()
        flipped = oracle(lo) == 0 and oracle(hi) == 1
        a, b = 0.0, 1.0
        if flipped:
            for _ in range(depth):
                c = 0.5 * (a + b)
                if oracle(lo + c * (hi - lo)) == 0:
                    a = c
                else:
                    b = c
        out.append((A[i], B[j], lo + 0.5 * (a + b) * (hi - lo), bool(flipped)))
    return out

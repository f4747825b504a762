"""Command-line front end.

Every subcommand resolves a single JSON run configuration (defaults, then
``--config FILE``, then flags), writes it to ``<out>/config.json`` and then
does its work, so any run can be repeated from its own output directory.

Exit codes: 0 success, 1 a checked property failed, 2 usage or configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import re
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from .bounds import BoundsConfig, ParameterBox, check_assumptions, check_nesting, nested_levelsets, write_overlay
from .expr import ExpressionError, compile_expression, parse_expression
from .levelset import (
    SCHEMA_VERSION,
    BoundsAdjustmentError,
    SamplerConfig,
    StandardFrame,
    run_algorithm1,
)
from .models import (
    BUILTIN_NAMES,
    PRESETS,
    TOGGLE2_CONE_P,
    VectorFieldModel,
    builtin_model,
    model_from_expressions,
    resolve_preset,
)
from .ode import IntegrationError
from .order import OracleInconsistency, OrthantCone, check_kamke_muller
from .spectral import (
    BasinOracle,
    EquilibriumSearchError,
    IsostableOracle,
    default_eps,
    find_equilibria,
    laplace_average_s1,
    spectral_data,
)

log = logging.getLogger("isoscope")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# -- configuration ------------------------------------------------------------------

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "threads": None,
    "out": "isoscope-out",
    "model": "toggle2",
    "params": None,
    "cone_x": None,
    "state_box": None,
    "search_box": None,
    "sweep_axis": None,
    "fix": {},
    "integrator": {"rel_tol": 1e-8, "abs_tol": 1e-10},
    "oracle": {"alpha": "inf", "side": "upper", "T": None, "eps": None, "analytic": None},
    "sampler": {k: v for k, v in SamplerConfig().to_dict().items() if k != "seed"},
    "monotone": {"grid_density": 11, "fd_step": 1e-6, "with_params": False},
    "equilibria": {"n_starts": 64, "t_transient": 100.0},
    "bounds": {
        "p_min": None,
        "p_max": None,
        "cone_p": None,
        "p_test": None,
        "n_points": 500,
        "sample_box": None,
        "swap_corners": False,
        "levelsets": True,
    },
}

# per-builtin defaults; boxes are [lower, upper]
MODEL_DEFAULTS = {
    "linear2": {
        "params": "linear2:default",
        "state_box": [[-2.0, -2.0], [2.0, 2.0]],
        "search_box": [[-2.0, -2.0], [2.0, 2.0]],
    },
    "toggle2": {
        "params": "toggle2:nominal",
        "state_box": [[0.0, 0.0], [2500.0, 2500.0]],
        "search_box": [[0.0, 0.0], [2500.0, 2500.0]],
        "bounds": {"p_min": "toggle2:pmin", "p_max": "toggle2:pmax", "cone_p": list(TOGGLE2_CONE_P)},
    },
    "toggle4": {
        "params": "toggle4:nominal",
        # x3 starts above 0: the corner x3 = x4 = 0 of the x1 = 0 face lies
        # outside the basin of the low-x1 equilibrium
        "state_box": [[0.0, 0.0, 5.0, 0.0], [150.0, 2.5, 500.0, 1.0]],
        "search_box": [[0.0, 0.0, 0.0, 0.0], [2500.0, 2500.0, 500.0, 2.0]],
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "fix":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_box(text: str) -> list:
    """``"lo1,lo2:hi1,hi2"`` -> ``[[lo1, lo2], [hi1, hi2]]``."""
    try:
        lo, hi = text.split(":")
        return [[float(v) for v in lo.split(",")], [float(v) for v in hi.split(",")]]
    except ValueError:
        raise ConfigError(f"cannot parse box {text!r}; expected 'lo1,lo2,...:hi1,hi2,...'")


def _parse_fix(items) -> dict:
    out = {}
    for item in items or []:
        m = re.fullmatch(r"\s*x(\d+)\s*=\s*(\S+)\s*", item)
        if m is None:
            raise ConfigError(f"cannot parse --fix {item!r}; expected xk=value")
        out[f"x{int(m.group(1))}"] = float(m.group(2))
    return out


def _parse_alpha(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    if str(text).strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"alpha must be a number or 'inf', got {text!r}")


def flags_to_config(args) -> dict:
    """Config overrides from explicitly given command-line flags."""
    over: dict = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.threads is not None:
        over["threads"] = args.threads
    if args.out is not None:
        over["out"] = args.out
    if args.model is not None:
        name = args.model
        over["model"] = name.split(":", 1)[0]
        if ":" in name:
            over["params"] = name
    if args.params is not None:
        over["params"] = args.params if args.params in PRESETS else [float(v) for v in args.params.split(",")]
    if args.cone is not None:
        over["cone_x"] = [int(v) for v in args.cone.split(",")]
    if args.box is not None:
        over["state_box"] = _parse_box(args.box)
    if args.fix:
        over["fix"] = _parse_fix(args.fix)
    if args.sweep_axis is not None:
        over["sweep_axis"] = args.sweep_axis - 1
    oracle = {}
    if args.alpha is not None:
        _parse_alpha(args.alpha)
        oracle["alpha"] = args.alpha
    if args.oracle_analytic is not None:
        oracle["analytic"] = args.oracle_analytic
    if oracle:
        over["oracle"] = oracle
    sampler = {}
    for key in ("n_total", "n_greedy", "n_random"):
        v = getattr(args, key)
        if v is not None:
            sampler[key] = v
    if sampler:
        over["sampler"] = sampler
    bounds = {}
    if args.n_points is not None:
        bounds["n_points"] = args.n_points
    if args.swap_corners:
        bounds["swap_corners"] = True
    if args.no_levelsets:
        bounds["levelsets"] = False
    if bounds:
        over["bounds"] = bounds
    if args.with_params:
        over["monotone"] = {"with_params": True}
    return over


def resolve_config(file_cfg: Optional[dict], flag_cfg: dict) -> dict:
    """Merge defaults, the config file and flags, then fill model defaults."""
    cfg = _merge(DEFAULTS, file_cfg or {})
    cfg = _merge(cfg, flag_cfg)
    analytic = cfg["oracle"].get("analytic")
    if analytic and cfg["state_box"] is None:
        _, n, _ = _analytic_oracle(analytic)
        cfg["state_box"] = [[0.0] * n, [1.5] * n]
    model = cfg["model"]
    if isinstance(model, str):
        if model not in BUILTIN_NAMES:
            raise ConfigError(f"unknown model {model!r}; builtins are {', '.join(BUILTIN_NAMES)}")
        md = MODEL_DEFAULTS[model]
        for key in ("params", "state_box", "search_box"):
            if cfg[key] is None:
                cfg[key] = copy.deepcopy(md[key])
        for key, v in md.get("bounds", {}).items():
            if cfg["bounds"].get(key) is None:
                cfg["bounds"][key] = copy.deepcopy(v)
    if cfg["threads"] is None:
        cfg["threads"] = os.cpu_count() or 1
    if cfg["search_box"] is None:
        cfg["search_box"] = copy.deepcopy(cfg["state_box"])
    cfg["schema_version"] = SCHEMA_VERSION
    return cfg


def build_model(cfg: dict) -> VectorFieldModel:
    spec = cfg["model"]
    if isinstance(spec, str):
        return builtin_model(spec)
    if not isinstance(spec, dict) or "rhs" not in spec:
        raise ConfigError("model must be a builtin name or {'rhs': [...], 'params': [...]}")
    n = len(spec["rhs"])
    domain = None
    if spec.get("domain") == "nonneg":
        domain = (np.zeros(n), np.full(n, np.inf))
    try:
        return model_from_expressions(
            spec["rhs"],
            spec.get("params", []),
            name=spec.get("name", "custom"),
            domain_box=domain,
            cone_x=spec.get("cone_x"),
            sweep_axis=spec.get("sweep_axis"),
        )
    except ExpressionError as exc:
        raise ConfigError(f"model expression: {exc}")


def _param_values(model: VectorFieldModel, value) -> tuple:
    if value is None:
        if model.m == 0:
            return ()
        raise ConfigError("no parameter values given")
    if isinstance(value, str):
        try:
            return resolve_preset(value)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]))
    try:
        return model.params(value)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _cone_x(model: VectorFieldModel, cfg: dict) -> OrthantCone:
    sigma = cfg["cone_x"] if cfg["cone_x"] is not None else model.cone_x
    if sigma is None:
        sigma = (1,) * model.n
    cone = OrthantCone(tuple(sigma))
    if cone.n != model.n:
        raise ConfigError(f"cone_x has {cone.n} entries for a model of dimension {model.n}")
    return cone


def _box(cfg: dict, key: str, n: int) -> tuple:
    box = cfg[key]
    if box is None:
        raise ConfigError(f"{key} is required for this model")
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if lo.shape != (n,) or hi.shape != (n,):
        raise ConfigError(f"{key} must have {n} lower and {n} upper bounds")
    return lo, hi


def _frame(model: VectorFieldModel, cfg: dict, cone: OrthantCone) -> StandardFrame:
    fixed = []
    for name, v in cfg["fix"].items():
        k = int(name[1:]) - 1
        if not 0 <= k < model.n:
            raise ConfigError(f"--fix {name}: no such state variable")
        fixed.append((k, v))
    axis = cfg["sweep_axis"]
    if axis is None:
        axis = model.sweep_axis if model.sweep_axis is not None else model.n - 1
    try:
        return StandardFrame(cone.sigma, axis, tuple(sorted(fixed)))
    except ValueError as exc:
        raise ConfigError(str(exc))


def _sampler(cfg: dict) -> SamplerConfig:
    try:
        return SamplerConfig(**cfg["sampler"], seed=cfg["seed"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sampler: {exc}")


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _gnuplot_script(path: Path, dat_files: list, dims: int, labels: list) -> None:
    """Plot script for one or more .dat files of (min, max) block pairs."""
    cmd = "splot" if dims == 3 else "plot"
    series = []
    for dat, label in zip(dat_files, labels):
        for block, kind in ((0, "m_min"), (1, "m_max")):
            cols = "1:2:3" if dims == 3 else "1:2"
            series.append(f"'{dat.name}' index {block} using {cols} with points title '{label} {kind}'")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("set key outside\n")
        fh.write(f"{cmd} " + ", \\\n     ".join(series) + "\n")


def _overlay_script(path: Path, dat: Path, labels: list, dims: int) -> None:
    cmd = "splot" if dims == 3 else "plot"
    cols = "1:2:3" if dims == 3 else "1:2"
    series = []
    block = 0
    for label in labels:
        for kind in ("m_min", "m_max"):
            series.append(f"'{dat.name}' index {block} using {cols} with points title '{label} {kind}'")
            block += 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("set key outside\n")
        fh.write(f"{cmd} " + ", \\\n     ".join(series) + "\n")


# -- commands -------------------------------------------------------------------------


def cmd_check_monotone(cfg: dict, out: Path) -> int:
    model = build_model(cfg)
    p = _param_values(model, cfg["params"])
    cone = _cone_x(model, cfg)
    lo, hi = _box(cfg, "state_box", model.n)
    mono = cfg["monotone"]
    param_box = cone_p = None
    if mono["with_params"]:
        b = cfg["bounds"]
        param_box = (_param_values(model, b["p_min"]), _param_values(model, b["p_max"]))
        cone_p = OrthantCone(tuple(b["cone_p"]))
    report = check_kamke_muller(
        model,
        (lo, hi),
        p,
        cone,
        param_box=param_box,
        cone_p=cone_p,
        grid_density=mono["grid_density"],
        fd_step=mono["fd_step"],
    )
    _write_json(out / "monotone.json", report.to_dict())
    status = "pass" if report.passed else "FAIL"
    print(f"Kamke-Muller {status}: worst entry {report.worst_violation:.3g} over {report.nodes} nodes")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def _equilibria(model, p, cfg, cone):
    lo, hi = _box(cfg, "search_box", model.n)
    eq = cfg["equilibria"]
    return find_equilibria(
        model, p, (lo, hi), n_starts=eq["n_starts"], t_transient=eq["t_transient"], cone=cone, seed=cfg["seed"]
    )


def cmd_equilibria(cfg: dict, out: Path) -> int:
    model = build_model(cfg)
    p = _param_values(model, cfg["params"])
    cone = _cone_x(model, cfg)
    eqs = _equilibria(model, p, cfg, cone)
    _write_json(out / "equilibria.json", {"schema_version": SCHEMA_VERSION, "equilibria": [e.to_dict() for e in eqs]})
    for e in eqs:
        print(f"x = {np.array2string(e.x_star, precision=6)}  lambda1 = {np.real(e.lambda1):.6g}")
    return EXIT_OK


def _analytic_oracle(text: str):
    """``"expr<value>"`` -> (oracle on states, dimension)."""
    m = re.fullmatch(r"(.+?)(<=|<)(.+)", text)
    if m is None:
        raise ConfigError(f"analytic oracle {text!r} must look like 'expr<value'")
    lhs, op, rhs = m.groups()
    idx = [int(k) for k in re.findall(r"\bx(\d+)\b", lhs)]
    n = max(idx) if idx else 1
    try:
        e = parse_expression(lhs, n, ())
        level = float(rhs)
    except (ExpressionError, ValueError) as exc:
        raise ConfigError(f"analytic oracle: {exc}")
    fn = compile_expression(e)
    strict = op == "<"

    def oracle(x):
        v = fn(x, ())
        return 0 if (v < level if strict else v <= level) else 1

    return oracle, n, {"kind": "analytic", "expression": text}


def _levelset_command(cfg: dict, out: Path, alpha: float) -> int:
    sampler = _sampler(cfg)
    analytic = cfg["oracle"].get("analytic")
    if analytic:
        oracle_x, n, desc = _analytic_oracle(analytic)
        sigma = cfg["cone_x"] or (1,) * n
        lo, hi = (np.asarray(b, dtype=float) for b in cfg["state_box"])
        if lo.shape != (n,):
            raise ConfigError(f"state_box must have {n} bounds for the analytic oracle")
        axis = cfg["sweep_axis"] if cfg["sweep_axis"] is not None else n - 1
        frame = StandardFrame(tuple(sigma), axis, tuple(sorted((int(k[1:]) - 1, v) for k, v in cfg["fix"].items())))
        lower = None
    else:
        model = build_model(cfg)
        p = _param_values(model, cfg["params"])
        cone = _cone_x(model, cfg)
        lo, hi = _box(cfg, "state_box", model.n)
        frame = _frame(model, cfg, cone)
        eqs = _equilibria(model, p, cfg, cone)
        star = eqs[0]
        orc = cfg["oracle"]
        eps = orc["eps"] if orc["eps"] is not None else default_eps(star, eqs[1] if len(eqs) > 1 else None)
        integ = cfg["integrator"]
        if math.isinf(alpha):
            oracle_x = BasinOracle(model, p, star, T=orc["T"], eps=eps, rel_tol=integ["rel_tol"], abs_tol=integ["abs_tol"])
        else:
            oracle_x = IsostableOracle(model, p, star, alpha=alpha, T=orc["T"], eps=eps, side=orc["side"])
        desc = oracle_x.describe()
        desc["parameters"] = list(p)
        lower = frame.lower_limit(model.domain_box)
        spectral = star.to_dict()
        _write_json(out / "spectral.json", spectral)
    b0, b1 = frame.box_to_z(lo, hi)
    t0 = time.perf_counter()
    result = run_algorithm1(
        frame.wrap(oracle_x),
        b0,
        b1,
        sampler,
        threads=int(cfg["threads"]),
        lower_limit=lower,
        frame=frame,
        oracle_description=desc,
    )
    elapsed = time.perf_counter() - t0
    paths = result.save(out)
    if "dat" in paths:
        _gnuplot_script(out / "levelset.gp", [paths["dat"]], frame.n, ["level set"])
    print(
        f"{len(result.m_min)} m_min / {len(result.m_max)} m_max points, "
        f"unclassified fraction {result.final_fraction:.4g}, {result.oracle_calls} oracle calls, {elapsed:.1f} s"
    )
    return EXIT_OK


def cmd_basin(cfg: dict, out: Path) -> int:
    return _levelset_command(cfg, out, math.inf)


def cmd_isostable(cfg: dict, out: Path) -> int:
    alpha = _parse_alpha(cfg["oracle"]["alpha"])
    if not alpha > 0 and cfg["oracle"]["side"] == "abs":
        raise ConfigError("alpha must be positive")
    return _levelset_command(cfg, out, alpha)


def _parameter_box(model, cfg) -> ParameterBox:
    b = cfg["bounds"]
    if b["p_min"] is None or b["p_max"] is None or b["cone_p"] is None:
        raise ConfigError("bounds.p_min, bounds.p_max and bounds.cone_p are required")
    pmin = _param_values(model, b["p_min"])
    pmax = _param_values(model, b["p_max"])
    cone_p = OrthantCone(tuple(b["cone_p"]))
    try:
        box = ParameterBox(pmin, pmax, cone_p)
    except ValueError as exc:
        raise ConfigError(str(exc))
    return box.swapped() if b["swap_corners"] else box


def cmd_param_bounds(cfg: dict, out: Path) -> int:
    model = build_model(cfg)
    cone = _cone_x(model, cfg)
    pbox = _parameter_box(model, cfg)
    p = _param_values(model, cfg["params"])
    b = cfg["bounds"]
    p_test = [p] if b["p_test"] is None else [_param_values(model, q) for q in b["p_test"]]
    integ = cfg["integrator"]
    bcfg = BoundsConfig(
        search_box=_box(cfg, "search_box", model.n),
        state_box=_box(cfg, "state_box", model.n),
        n_starts=cfg["equilibria"]["n_starts"],
        km_grid=cfg["monotone"]["grid_density"],
        T=cfg["oracle"]["T"],
        eps=cfg["oracle"]["eps"],
        rel_tol=integ["rel_tol"],
        abs_tol=integ["abs_tol"],
        threads=int(cfg["threads"]),
        seed=cfg["seed"],
    )
    report = check_assumptions(model, pbox, cone, bcfg, p=p_test[0])
    if report.a1["stable_counts"] and all(c == 2 for c in report.a1["stable_counts"].values()):
        sample_box = _box(cfg, "sample_box", model.n) if b["sample_box"] is not None else bcfg.state_box
        nest = check_nesting(
            model,
            pbox,
            cone,
            bcfg,
            p_test=p_test,
            n_points=b["n_points"],
            sample_box=sample_box,
            rng=np.random.default_rng(np.random.SeedSequence(cfg["seed"], spawn_key=(2,))),
        )
        report.inclusion_violations = nest.inclusion_violations
        report.samples_tested = nest.samples_tested
        report.indeterminate = nest.indeterminate
        report.notes.extend(nest.notes)
        if b["levelsets"]:
            frame = _frame(model, cfg, cone)
            results = nested_levelsets(
                model,
                pbox,
                cone,
                frame,
                *bcfg.state_box,
                _sampler(cfg),
                bcfg,
                p=p_test[0],
                equilibria=report.equilibria,
                threads=int(cfg["threads"]),
            )
            for label, res in results.items():
                res.save(out, prefix=f"{label}_")
            dat = write_overlay(results, out / "overlay.dat")
            if frame.n in (2, 3):
                _overlay_script(out / "overlay.gp", dat, list(results), frame.n)
    report.to_json(out / "bounds.json")
    ok = report.assumptions_passed and report.nesting_passed
    for name in ("a1", "a2", "a3", "a4"):
        print(f"{name.upper()}: {'pass' if getattr(report, name)['passed'] else 'FAIL'}")
    print(
        f"nesting: {len(report.inclusion_violations)} violations, "
        f"{report.indeterminate}/{report.samples_tested} indeterminate"
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_selftest(cfg: dict, out: Path) -> int:
    """Fast end-to-end checks with known answers."""
    checks = []
    lin = builtin_model("linear2")
    p = resolve_preset("linear2:default")
    sd = spectral_data(lin, np.zeros(2), p, (1, 1))
    for x in ((2.0, 2.0), (1.0, -1.0), (0.5, 1.5)):
        est = laplace_average_s1(lin, p, x, sd)
        exact = float(np.dot(sd.w1, x))
        checks.append((f"linear s1 at {x}", abs(est.value - exact) <= 1e-6 * max(1.0, abs(exact))))
    km = check_kamke_muller(lin, ([-2, -2], [2, 2]), p, OrthantCone((1, 1)), grid_density=5)
    checks.append(("Metzler matrix is cooperative", km.passed))
    res = run_algorithm1(
        lambda z: 0 if z[0] + z[1] < 1 else 1,
        [0.0, 0.0],
        [1.5, 1.5],
        SamplerConfig(n_total=400, seed=cfg["seed"]),
    )
    fr = [a for _, a, _ in res.error_trace]
    checks.append(("level set error trace nonincreasing", all(b <= a for a, b in zip(fr, fr[1:]))))
    checks.append(("level set classifications", bool(np.all(res.m_min.points.sum(1) < 1) and np.all(res.m_max.points.sum(1) >= 1))))
    _write_json(out / "selftest.json", {name: bool(ok) for name, ok in checks})
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_VIOLATION


COMMANDS = {
    "check-monotone": cmd_check_monotone,
    "equilibria": cmd_equilibria,
    "isostable": cmd_isostable,
    "basin": cmd_basin,
    "param-bounds": cmd_param_bounds,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--model", help="builtin model, optionally with a preset (toggle2:pmin)")
    common.add_argument("--params", help="preset name or comma-separated values")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for oracle batches")
    common.add_argument("--fix", action="append", metavar="xk=v", help="pin a state for a cross-section")
    common.add_argument("--alpha", help="isostable level, or inf for the basin")
    common.add_argument("--oracle-analytic", metavar="EXPR<V", help="replace the ODE oracle by an analytic one")
    common.add_argument("--cone", help="state orthant signs, e.g. 1,-1")
    common.add_argument("--box", help="state box lo1,lo2,...:hi1,hi2,...")
    common.add_argument("--sweep-axis", type=int, help="1-based state index used as the graph axis")
    common.add_argument("--n-total", type=int, help="sample budget")
    common.add_argument("--n-greedy", type=int, help="greedy samples per iteration")
    common.add_argument("--n-random", type=int, help="random samples per iteration")
    common.add_argument("--n-points", type=int, help="states sampled for the nesting check")
    common.add_argument("--swap-corners", action="store_true", help="swap p_min and p_max (negative control)")
    common.add_argument("--no-levelsets", action="store_true", help="skip the per-corner level sets")
    common.add_argument("--with-params", action="store_true", help="also check monotonicity in the parameters")

    parser = argparse.ArgumentParser(prog="isoscope", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check-monotone": "grid certificate of orthant monotonicity",
        "equilibria": "stable equilibria with their dominant eigenpairs",
        "isostable": "bracket an isostable with the level-set sampler",
        "basin": "bracket the basin boundary with the level-set sampler",
        "param-bounds": "assumption checks and basin nesting over a parameter box",
        "selftest": "quick checks with known answers",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("ISOSCOPE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_cfg = None
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        flags = flags_to_config(args)
        cfg = resolve_config(file_cfg, flags)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        echo = dict(cfg, command=args.command)
        _write_json(out / "config.json", echo)
        return COMMANDS[args.command](cfg, out)
    except (IntegrationError, EquilibriumSearchError, BoundsAdjustmentError, OracleInconsistency, ExpressionError) as exc:
        print(f"isoscope: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        # json.JSONDecodeError is a ValueError
        print(f"isoscope: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line experiment runner.

    siglo run CONFIG.json [--output DIR]
    siglo example NAME [--output DIR]
    siglo validate [--skip-slow] [--theta1-ref X] [--output DIR]
    siglo theta --n 2 --k 256 --restarts 8 --seed 0

Exit codes: 0 success, 1 failed validation, 2 invalid config, 3 the measure
violates a solver hypothesis (plus mass must exceed minus mass).
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .asymptotics import (
    THETA_1,
    closed_form_limit_value,
    convergence_report,
    empirical_measure,
    estimate_theta,
    gamma_limit_value,
    histogram_density,
    known_theta,
    limit_density,
    theta_experiment,
    theta_lower_bound,
)
from .geometry import BallComplementRegion, PointConfig, surface_net
from .measure import GriddedDensity, MeasureComponent, SignedMeasure, bounding_ball, discretize
from .objective import eval_F, eval_F_region
from .region import (
    balanced_projection_residual,
    canonicalize,
    first_variation,
    mass_check,
    optimize_radii,
    separation_check,
)
from .solve_k import PreconditionError, SolverConfig, brute_force, grid_candidates, local_search, nonexistence_probe
from .validation import run_all

log = logging.getLogger("siglo")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3

TASKS = ("solve_k", "region", "theta", "density", "converge", "probe", "validate", "example")

TASK_DEFAULTS = {
    "solve_k": {
        "k": 1,
        "method": "local",
        "restarts": 4,
        "max_iters": 200,
        "init_step": 0.25,
        "step_decay": 0.5,
        "tol": 1e-7,
        "init": "nodes",
        "candidates": None,
    },
    "region": {"mesh": 1e-3, "max_iters": 50, "radii": None, "sigma": None, "minus_step": None},
    "theta": {"n": 2, "k": 256, "restarts": 8, "grid_res": 256, "init": "nodes", "max_iters": 200},
    "density": {"centers": None, "radii": None, "theta": None},
    "converge": {"k_schedule": [16, 64, 256], "restarts": 1, "centers": None, "radii": None, "mesh": None, "theta": None},
    "probe": {"radii": [0.5 * i for i in range(21)], "circle_nodes": 10_000},
    "validate": {"skip_slow": False, "theta1_ref": THETA_1},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 1):
        super().__init__(message)
        self.line = line


# ----------------------------------------------------------------------------------------------
# built-in scenarios


def _builtin(name: str) -> dict:
    if name == "fermat-weber-line":
        return {
            "name": name,
            "dimension": 1,
            "seed": 0,
            "task": "solve_k",
            "measure": {"plus": {"atoms": [[1, 2], [8, 6]]}, "minus": {"atoms": [[0, 1], [4, 4]]}},
            "params": {"k": 2, "method": "brute", "candidates": {"lo": [0], "hi": [8], "resolution": [16]}},
        }
    if name == "nonexistence-circle":
        return {"name": name, "dimension": 2, "seed": 0, "task": "probe", "params": {}}
    if name == "canonical-ball":
        return {
            "name": name,
            "dimension": 2,
            "seed": 0,
            "task": "region",
            "measure": {
                "plus": {
                    "densities": [
                        {
                            "lo": [-2, -2],
                            "hi": [2, 2],
                            "resolution": 800,
                            "subsamples": 2,
                            "expression": "where(x**2 + y**2 < 4, 1 / (2 * pi), 0)",
                        }
                    ]
                },
                "minus": {"atoms": [[0, 0, 1]]},
            },
            "params": {"mesh": 2e-4, "radii": [1.0]},
        }
    raise KeyError(name)


EXAMPLES = ("fermat-weber-line", "nonexistence-circle", "canonical-ball")


# ----------------------------------------------------------------------------------------------
# config parsing


def _line_of(text: str, key: str) -> int:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return 1


_EXPR_NAMES = {name: getattr(np, name) for name in ("sin", "cos", "exp", "log", "sqrt", "abs", "where", "minimum", "maximum")}
_EXPR_NAMES["pi"] = math.pi


def _density(spec: dict, dim: int, where: str) -> GriddedDensity:
    for key in ("lo", "hi", "resolution"):
        if key not in spec:
            raise ConfigError(f"{where}: density needs {key!r}")
    lo, hi = np.asarray(spec["lo"], dtype=float), np.asarray(spec["hi"], dtype=float)
    if lo.shape != (dim,) or hi.shape != (dim,):
        raise ConfigError(f"{where}: density box must have {dim} coordinates")
    res = spec["resolution"]
    if "values" in spec:
        return GriddedDensity(lo, hi, np.asarray(spec["values"], dtype=float))
    if "expression" in spec:
        names = dict(_EXPR_NAMES)
        variables = ("x", "y", "z")[:dim]

        def func(*coords):
            names.update(zip(variables, coords))
            return eval(spec["expression"], {"__builtins__": {}}, names)  # noqa: S307  numeric names only

        return GriddedDensity.from_function(func, lo, hi, res, int(spec.get("subsamples", 1)))
    return GriddedDensity.uniform(lo, hi, res, float(spec.get("constant", 1.0)))


def _component(spec: dict | None, dim: int, where: str) -> MeasureComponent:
    if not spec:
        return MeasureComponent.empty(dim)
    atoms = np.asarray(spec.get("atoms", []), dtype=float).reshape(-1, dim + 1) if spec.get("atoms") else None
    dens = tuple(_density(d, dim, where) for d in spec.get("densities", []))
    if atoms is None:
        return MeasureComponent(np.zeros((0, dim)), np.zeros(0), dens, dim=dim)
    return MeasureComponent(atoms[:, :dim], atoms[:, dim], dens, dim=dim)


def parse_config(text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    task = cfg.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}, got {task!r}", _line_of(text, "task"))
    dim = cfg.get("dimension")
    if dim not in (1, 2, 3):
        raise ConfigError(f"dimension must be 1, 2 or 3, got {dim!r}", _line_of(text, "dimension"))
    if not isinstance(cfg.get("seed"), int):
        raise ConfigError("seed must be an integer (runs are never seeded from the clock)", _line_of(text, "seed"))
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object", _line_of(text, "params"))
    if task != "example":
        unknown = set(params) - set(TASK_DEFAULTS[task])
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown parameter {key!r} for task {task}", _line_of(text, key))
        cfg["params"] = {**copy.deepcopy(TASK_DEFAULTS[task]), **params}
    needs_measure = task in ("solve_k", "region", "density", "converge")
    if needs_measure:
        m = cfg.get("measure")
        if not isinstance(m, dict) or "plus" not in m:
            raise ConfigError("this task needs a measure with a plus part", _line_of(text, "measure"))
        try:
            cfg["_phi"] = SignedMeasure(
                _component(m["plus"], dim, "measure.plus"), _component(m.get("minus"), dim, "measure.minus")
            )
        except ConfigError as exc:
            raise ConfigError(str(exc), _line_of(text, "plus" if "plus" in str(exc) else "minus")) from None
        except (ValueError, TypeError, SyntaxError, NameError) as exc:
            raise ConfigError(f"bad measure: {exc}", _line_of(text, "measure")) from None
    cfg.setdefault("name", "scenario")
    return cfg


# ----------------------------------------------------------------------------------------------
# output helpers


def _approx(value, bound, kind: str = "error_bound") -> dict:
    return {"value": value, kind: bound}


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _coord_names(dim: int) -> list[str]:
    return ["x", "y", "z"][:dim]


def _write_points(out: Path, dim: int, per_restart: list, k: int) -> None:
    rows = []
    for r, pts in enumerate(per_restart):
        for p in np.asarray(pts).reshape(-1, dim):
            rows.append([k, r, *p.tolist()])
    _write_csv(out / "points.csv", ["k", "restart", *_coord_names(dim)], rows)


def _write_density(out: Path, density: GriddedDensity | None, dim: int) -> None:
    rows = []
    if density is not None:
        rows = [[*p.tolist(), v] for p, v in zip(density.midpoints(), density.values.ravel().tolist())]
    _write_csv(out / "density.csv", [*_coord_names(dim), "value"], rows)


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _plus_density(phi: SignedMeasure) -> GriddedDensity | None:
    return phi.plus.densities[0] if phi.plus.densities else None


def _solver_config(params: dict, seed: int, k: int | None = None) -> SolverConfig:
    return SolverConfig(
        k=int(k if k is not None else params["k"]),
        restarts=int(params["restarts"]),
        seed=seed,
        max_iters=int(params.get("max_iters", 200)),
        init_step=float(params.get("init_step", 0.25)),
        step_decay=float(params.get("step_decay", 0.5)),
        tol=float(params.get("tol", 1e-7)),
        init=params.get("init", "nodes"),
    )


# ----------------------------------------------------------------------------------------------
# tasks


def task_solve_k(cfg: dict, out: Path) -> dict:
    phi, p, dim = cfg["_phi"], cfg["params"], cfg["dimension"]
    if p["method"] == "brute":
        cand_spec = p["candidates"]
        if not cand_spec:
            raise ConfigError("brute force needs params.candidates {lo, hi, resolution}")
        cand = grid_candidates(cand_spec["lo"], cand_spec["hi"], cand_spec["resolution"])
        report = brute_force(phi, cand, int(p["k"]))
    elif p["method"] == "local":
        report = local_search(phi, _solver_config(p, cfg["seed"]))
    else:
        raise ConfigError(f"method must be 'local' or 'brute', got {p['method']!r}")
    pts = report.best.sorted_points()
    per_restart = report.per_restart_points or [report.best.points]
    _write_points(out, dim, per_restart, int(p["k"]))
    for r, trace in enumerate(report.traces):
        _write_csv(out / "plotdata" / f"trace_restart{r}.csv", ["sweep", "F"], enumerate(trace))
    dens = _plus_density(phi)
    _write_density(out, histogram_density(empirical_measure(report.best), dens)[0] if dens is not None else None, dim)
    value = eval_F(report.best, phi)
    return {
        "best": pts,
        "F": _approx(report.value, value.quadrature_step, "quadrature_step"),
        "per_restart_values": report.per_restart_values,
        "iterations_used": report.iterations_used,
        "bounding_radius": report.bounding_radius,
        "certificate_radius": report.certificate_radius,
    }


def _minus_atomic(phi: SignedMeasure, step) -> SignedMeasure:
    if phi.minus.is_atomic:
        return phi
    if not step:
        raise ConfigError("region task needs params.minus_step when the minus part has a density")
    return SignedMeasure(phi.plus, discretize(phi.minus, float(step)))


def task_region(cfg: dict, out: Path) -> dict:
    p, dim = cfg["params"], cfg["dimension"]
    phi = _minus_atomic(cfg["_phi"], p["minus_step"])
    mesh = float(p["mesh"])
    centers = phi.minus.points
    if len(centers) == 0:
        raise ConfigError("region task needs a nonempty minus part")
    if p["sigma"] is not None:
        init = canonicalize(PointConfig(np.asarray(p["sigma"], dtype=float).reshape(-1, dim)), phi)
    else:
        radii = p["radii"]
        if radii is None:
            radii = [0.25 * bounding_ball(phi)[1]] * len(centers)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
        init = BallComplementRegion(centers, radii)
    result = optimize_radii(phi, init, mesh, int(p["max_iters"]))
    m = result.region
    cert = balanced_projection_residual(m, phi, mesh)
    fields = {}
    for i, c in enumerate(m.centers[:8]):

        def radial(q, c=c):
            d = q - c
            return d / np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)

        fields[f"radial_{i}"] = first_variation(m, phi, radial, mesh)
    _write_csv(out / "plotdata" / "radii_trace.csv", ["sweep", "F"], enumerate(result.trace))
    if len(m.radii) == 1:
        r_star = float(m.radii[0])
        rs = np.linspace(mesh, 2 * r_star, 41)
        curve = [(r, eval_F_region(m.with_radii([r]), phi, mesh).value) for r in rs]
        _write_csv(out / "plotdata" / "f_of_r.csv", ["r", "F"], curve)
    net = surface_net(m, max(mesh, 0.01 * float(m.radii.min())))
    _write_csv(out / "plotdata" / "surface_net.csv", _coord_names(dim) if dim > 1 else ["index", "x"],
               net.points if dim > 1 else enumerate(net.points[:, 0]))
    _write_points(out, dim, [m.centers], len(m.centers))
    dens = _plus_density(phi)
    rho = None
    if dens is not None:
        try:
            rho = limit_density(dens, m)
        except ValueError:
            rho = None
    _write_density(out, rho, dim)
    result_radii = m.radii.tolist()
    summary = {
        "centers": m.centers,
        "radii": [_approx(r, mesh, "tolerance") for r in result_radii],
        "F": {
            "value": result.objective.value,
            "quadrature_step": result.objective.quadrature_step,
            "distance_error_bound": result.objective.distance_error_bound,
        },
        "sweeps": result.sweeps,
        "balanced_projection_residual": _approx(cert.balanced_projection_residual, cert.transport_bin, "transport_bin"),
        "mass_gap": cert.mass_gap,
        "region_mass_gap": _approx(mass_check(m, phi), phi.plus.step, "quadrature_step"),
        "dropped_ridge_mass": cert.dropped_ridge_mass,
        "first_variation": {k: {"value": v, "dropped_ridge_mass": d} for k, (v, d) in fields.items()},
        "separation": separation_check(phi).value,
    }
    if len(result_radii) == 1:
        summary["radius"] = _approx(result_radii[0], mesh, "tolerance")
    return summary


def task_theta(cfg: dict, out: Path) -> dict:
    p = cfg["params"]
    n, k = int(p["n"]), int(p["k"])
    report = theta_experiment(n, k, int(p["restarts"]), cfg["seed"], int(p["grid_res"]), p["init"], int(p["max_iters"]))
    est = k ** (1.0 / n) * report.value
    _write_points(out, n, report.per_restart_points, k)
    for r, trace in enumerate(report.traces):
        _write_csv(out / "plotdata" / f"trace_restart{r}.csv", ["sweep", "F"], enumerate(trace))
    grid = GriddedDensity.uniform(np.zeros(n), np.ones(n), min(int(p["grid_res"]), 64))
    _write_density(out, histogram_density(empirical_measure(report.best), grid)[0], n)
    ref = known_theta(n)
    return {
        "theta_estimate": _approx(est, k ** (1.0 / n) / int(p["grid_res"]), "quadrature_step_scaled"),
        "reference": ref,
        "relative_error": None if ref is None else abs(est - ref) / ref,
        "lower_bound": theta_lower_bound(n),
        "per_restart_values": [k ** (1.0 / n) * v for v in report.per_restart_values],
    }


def _region_from_params(p: dict, dim: int) -> BallComplementRegion:
    if p["centers"] is None or p["radii"] is None:
        raise ConfigError("this task needs params.centers and params.radii for the limit region")
    return BallComplementRegion(np.asarray(p["centers"], dtype=float).reshape(-1, dim), np.asarray(p["radii"], dtype=float))


def _theta(p: dict, dim: int) -> float:
    theta = p["theta"] if p["theta"] is not None else known_theta(dim)
    if theta is None:
        raise ConfigError(f"no known quantization constant in dimension {dim}; pass params.theta")
    return float(theta)


def task_density(cfg: dict, out: Path) -> dict:
    phi, p, dim = cfg["_phi"], cfg["params"], cfg["dimension"]
    f = _plus_density(phi)
    if f is None:
        raise ConfigError("density task needs a plus density")
    m = _region_from_params(p, dim)
    theta = _theta(p, dim)
    rho = limit_density(f, m)
    _write_density(out, rho, dim)
    _write_points(out, dim, [m.centers], len(m.centers))
    return {
        "theta": theta,
        "limit_value": _approx(gamma_limit_value(rho, m, f, theta), f.step, "quadrature_step"),
        "closed_form_limit_value": closed_form_limit_value(f, m, theta),
    }


def task_converge(cfg: dict, out: Path) -> dict:
    phi, p, dim = cfg["_phi"], cfg["params"], cfg["dimension"]
    f = _plus_density(phi)
    if f is None:
        raise ConfigError("converge task needs a plus density")
    m = _region_from_params(p, dim)
    theta = _theta(p, dim)
    rho = limit_density(f, m)
    solver = _solver_config({**TASK_DEFAULTS["solve_k"], **p}, cfg["seed"], k=1)
    rows = convergence_report(phi, p["k_schedule"], solver, m, rho, p["mesh"])
    header = ["k", "F", "rescaled_gap", "hausdorff_to_M", "w1_to_rho"]
    _write_csv(
        out / "plotdata" / "convergence.csv",
        header,
        [[r.k, r.F_value, r.rescaled_gap, r.hausdorff_to_M, r.w1_to_rho] for r in rows],
    )
    _write_csv(out / "plotdata" / "rescaled_gap.csv", ["k", "rescaled_gap"], [[r.k, r.rescaled_gap] for r in rows])
    _write_csv(out / "plotdata" / "w1_to_rho.csv", ["k", "w1_to_rho"], [[r.k, r.w1_to_rho] for r in rows])
    _write_density(out, rho, dim)
    _write_points(out, dim, [], 0)
    mesh = p["mesh"] if p["mesh"] is not None else float(np.min(rho.cell_size))
    return {
        "theta": theta,
        "limit_value": _approx(closed_form_limit_value(f, m, theta), f.step, "quadrature_step"),
        "region_value": _approx(eval_F_region(m, phi, mesh).value, mesh, "mesh"),
        "extrapolated": dim < 2,
        "rows": [
            {
                "k": r.k,
                "F": r.F_value,
                "rescaled_gap": r.rescaled_gap,
                "hausdorff_to_M": r.hausdorff_to_M,
                "w1_to_rho": r.w1_to_rho,
                "per_restart_values": list(r.per_restart_values),
            }
            for r in rows
        ],
    }


def task_probe(cfg: dict, out: Path) -> dict:
    p = cfg["params"]
    probe = nonexistence_probe(p["radii"], int(p["circle_nodes"]))
    _write_csv(out / "plotdata" / "f_of_r.csv", ["r", "f"], probe.table())
    _write_points(out, 2, [[[r, 0.0] for r in probe.radii]], 1)
    _write_density(out, None, 2)
    quad = 2 * math.pi / int(p["circle_nodes"])
    return {
        "f": [_approx(v, quad, "arc_step") for v in probe.values.tolist()],
        "radii": probe.radii,
        "strictly_decreasing": probe.strictly_decreasing,
        # equal plus and minus masses: no bounded minimizing sequence, and f keeps falling
        "no_minimizer_evidence": probe.strictly_decreasing,
    }


def task_validate(cfg: dict, out: Path) -> dict:
    p = cfg["params"]
    checks = run_all(float(p["theta1_ref"]), bool(p["skip_slow"]), log=log.info)
    _write_validation(out, checks)
    return {"checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks],
            "all_passed": all(c.passed for c in checks)}


def _write_validation(out: Path, checks) -> None:
    """Pass/fail table plus the measured numbers of every check."""
    _write_csv(
        out / "validation.csv",
        ["check", "passed", "seconds", "detail"],
        [[c.name, c.passed, round(c.seconds, 1), c.detail] for c in checks],
    )
    with open(out / "validation.json", "w") as fh:
        json.dump(_jsonable([dataclasses.asdict(c) for c in checks]), fh, indent=2)
        fh.write("\n")


TASK_RUNNERS = {
    "solve_k": task_solve_k,
    "region": task_region,
    "theta": task_theta,
    "density": task_density,
    "converge": task_converge,
    "probe": task_probe,
    "validate": task_validate,
}


# ----------------------------------------------------------------------------------------------
# driver


def _setup_log(out: Path) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def execute(cfg: dict, out: Path) -> int:
    """Run a parsed scenario and write its result files; returns the exit code."""
    task = cfg["task"]
    if task == "example":
        name = cfg.get("params", {}).get("name")
        try:
            cfg = parse_config(json.dumps(_builtin(name)))
        except KeyError:
            raise ConfigError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None
        task = cfg["task"]
    handler = _setup_log(out)
    try:
        log.info("scenario %s task %s seed %s", cfg["name"], task, cfg["seed"])
        t = time.perf_counter()
        summary = TASK_RUNNERS[task](cfg, out)
        log.info("finished in %.2fs", time.perf_counter() - t)
    finally:
        log.removeHandler(handler)
        handler.close()
    results = {
        "scenario": cfg["name"],
        "task": task,
        "seed": cfg["seed"],
        "dimension": cfg["dimension"],
        "config": {k: v for k, v in cfg.items() if not k.startswith("_")},
        "versions": {"siglo": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "results": summary,
    }
    with open(out / "results.json", "w") as fh:
        json.dump(_jsonable(results), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if task == "validate" and not summary["all_passed"]:
        return EXIT_FAILED
    return EXIT_OK


def _run_guarded(fn, source: str) -> int:
    try:
        return fn()
    except ConfigError as exc:
        print(f"{source}:{exc.line}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


def cmd_run(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"{path}:1: cannot read config: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG

    def go():
        cfg = parse_config(text)
        out = Path(args.output or cfg.get("output") or f"siglo-out/{cfg['name']}")
        return execute(cfg, out)

    return _run_guarded(go, str(path))


def cmd_example(args) -> int:
    if args.name not in EXAMPLES:
        print(f"unknown example {args.name!r}; choose from {', '.join(EXAMPLES)}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.output or f"siglo-out/{args.name}")
    code = _run_guarded(lambda: execute(parse_config(json.dumps(_builtin(args.name))), out), args.name)
    if code == EXIT_OK:
        print((out / "results.json").read_text())
    return code


def cmd_validate(args) -> int:
    out = Path(args.output or "siglo-out/validate")
    handler = _setup_log(out)
    try:

        def report(line: str) -> None:
            print(line, flush=True)
            log.info(line)

        checks = run_all(args.theta1_ref, args.skip_slow, log=report)
    finally:
        log.removeHandler(handler)
        handler.close()
    _write_validation(out, checks)
    failed = [c.name for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        print("failed: " + "; ".join(failed), file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_theta(args) -> int:
    if args.n not in (1, 2, 3):
        print("--n must be 1, 2 or 3", file=sys.stderr)
        return EXIT_CONFIG
    est = estimate_theta(args.n, args.k, args.restarts, args.seed, args.grid_res, args.init)
    ref = known_theta(args.n)
    line = f"theta_{args.n} ~ {est:.6f} (k={args.k}, restarts={args.restarts}, seed={args.seed})"
    if ref is not None:
        line += f"; reference {ref:.6f}, relative error {abs(est - ref) / ref:.2%}"
    print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="siglo", description="Signed-measure facility location experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON scenario config")
    p.add_argument("config")
    p.add_argument("--output", "-o", help="output directory (default: config 'output' or siglo-out/<name>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("example", help="run a built-in scenario")
    p.add_argument("name", choices=EXAMPLES)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("validate", help="run invariant checks and the acceptance battery")
    p.add_argument("--skip-slow", action="store_true", help="skip the multi-minute convergence and theta_2 checks")
    p.add_argument("--theta1-ref", type=float, default=THETA_1, help="reference value the theta_1 check compares to")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("theta", help="estimate the quantization constant on the unit cube")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=256)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-res", type=int, default=256)
    p.add_argument("--init", choices=("nodes", "midpoint"), default="nodes")
    p.set_defaults(func=cmd_theta)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``run``, ``sweep``, ``export-lp`` and ``calibrate``.

Exit codes: 0 success, 2 invalid configuration or grid, 3 a scheme failed
(the message names the seed and iteration to replay).
"""

from __future__ import annotations

import argparse
import itertools
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .association import calibrate_sigma, export_lp, pooled_misalignment, solve_optimal
from .association.lpfile import read_lp, solve_lp_problem
from .channel import RainModel, parse_shares
from .config import ConfigError, RunSpec, load_config, to_dict
from .output import LONG_COLUMNS, SUMMARY_COLUMNS, long_rows, summary_rows, write_csv, write_json, write_report
from .scenario import SchemeFailure, calibration_runs, canonical_scheme, realize, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SCHEME = 0, 2, 3
GRID_AXES = ("lambda_u", "theta_b_deg", "s", "rain_mm_h")


class GridError(ValueError):
    pass


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _build_id() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        if rev.returncode == 0:
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _overrides(spec: RunSpec, args) -> RunSpec:
    cfg = spec.scenario
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_(seed=args.seed)
    if getattr(args, "iterations", None) is not None:
        cfg = cfg.with_(iterations=args.iterations)
    schemes = spec.schemes
    if getattr(args, "schemes", None):
        schemes = tuple(dict.fromkeys(canonical_scheme(s) for s in args.schemes.split(",") if s.strip()))
    return RunSpec(cfg, schemes)


def _load(args) -> RunSpec:
    try:
        return _overrides(load_config(args.config), args)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError([("<cli>", str(exc))]) from exc


def _manifest(spec: RunSpec, outputs: dict, timings: dict) -> dict:
    return {
        "build": _build_id(),
        "seed": spec.scenario.seed,
        "config": to_dict(spec),
        "outputs": {k: str(v) for k, v in outputs.items()},
        "wall_clock_s": timings,
    }


def _run_one(spec: RunSpec, out_dir: Path, focal_bs=None) -> tuple:
    t0 = time.perf_counter()
    report = run_experiment(spec.scenario, spec.schemes, focal_bs=focal_bs)
    t1 = time.perf_counter()
    outputs = write_report(out_dir, report)
    t2 = time.perf_counter()
    outputs["manifest"] = out_dir / "manifest.json"
    write_json(outputs["manifest"], _manifest(spec, outputs, {"simulate": t1 - t0, "write": t2 - t1}))
    return report, outputs


def cmd_run(args) -> int:
    spec = _load(args)
    out = Path(args.out_dir)
    report, _ = _run_one(spec, out, args.focal_bs)
    for name, s in report.per_scheme.items():
        print(f"{name:12s} users={s.n_users:6d} capacity={s.mean_user_capacity / 1e6:9.2f} Mbps "
              f"satisfaction={s.mean_satisfaction:.3f} disconnected={s.disconnected_fraction:.3f}")
    print(f"results in {out}")
    return EXIT_OK


def parse_grid(expr: str | None) -> list[tuple[str, list]]:
    """``"lambda_u=100,250;s=1,inf"`` -> ``[("lambda_u", [100.0, 250.0]), ("s", [1, inf])]``."""
    if expr is None or not expr.strip():
        return []
    axes = []
    for part in expr.split(";"):
        if not part.strip():
            continue
        if part.count("=") != 1:
            raise GridError(f"grid axis {part!r} must look like name=v1,v2")
        name, values = (p.strip() for p in part.split("="))
        if name not in GRID_AXES:
            raise GridError(f"unknown grid axis {name!r}; choose from {GRID_AXES}")
        if name in (a for a, _ in axes):
            raise GridError(f"grid axis {name!r} given twice")
        raw = [v.strip() for v in values.split(",")]
        if not raw or any(not v for v in raw):
            raise GridError(f"grid axis {name!r} has an empty value")
        try:
            vals = [parse_shares(v) for v in raw] if name == "s" else [float(v) for v in raw]
        except ValueError as exc:
            raise GridError(f"grid axis {name!r}: {exc}") from exc
        axes.append((name, vals))
    return axes


def apply_cell(spec: RunSpec, cell: dict) -> RunSpec:
    cfg = spec.scenario
    radio, users, rain = cfg.radio, cfg.users, cfg.rain
    for name, v in cell.items():
        if name == "lambda_u":
            users = replace(users, lambda_u=v)
        elif name == "theta_b_deg":
            radio = replace(radio, theta_b_deg=v)
        elif name == "s":
            radio = replace(radio, s=v)
        elif name == "rain_mm_h":
            rain = None if v == 0 else replace(rain or RainModel(), rate_mm_h=v)
    return RunSpec(cfg.with_(radio=radio, users=users, rain=rain), spec.schemes)


def _cell_name(cell: dict) -> str:
    if not cell:
        return "base"
    return "__".join(f"{k}={'inf' if v == float('inf') else f'{v:g}'}" for k, v in cell.items())


def cmd_sweep(args) -> int:
    spec = _load(args)
    try:
        axes = parse_grid(args.grid)
    except GridError as exc:
        return _fail(EXIT_CONFIG, f"--grid: {exc}")
    names = [a for a, _ in axes]
    cells = [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in axes))]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    long_all, summary_all = [], []
    for cell in cells:
        try:
            cell_spec = apply_cell(spec, cell)
        except ValueError as exc:
            return _fail(EXIT_CONFIG, f"grid cell {_cell_name(cell)}: {exc}")
        report, _ = _run_one(cell_spec, out / _cell_name(cell))
        prefix = tuple(cell[n] for n in names)
        long_all += [prefix + row for row in long_rows(report)]
        summary_all += [prefix + row for row in summary_rows(report)]
        print(f"cell {_cell_name(cell)} done")
    write_csv(out / "sweep_long.csv", (*names, *LONG_COLUMNS), long_all)
    write_csv(out / "sweep_summary.csv", (*names, *SUMMARY_COLUMNS), summary_all)
    print(f"{len(cells)} cells in {out}")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    spec = _load(args)
    cfg = spec.scenario
    real = realize(cfg, args.iteration)
    path = export_lp(real.instance, cfg.solver, args.out)
    problem = read_lp(path)
    n_x = sum(n.startswith("x_") for n in problem.names)
    n_y = sum(n.startswith("y_") for n in problem.names)
    n_p = sum(n.startswith("p_") for n in problem.names)
    print(f"wrote {path}: {real.instance.n_users} users, {real.instance.n_bs} base stations")
    print(f"variables: {len(problem.names)} (x={n_x}, y={n_y}, p={n_p}); constraints: {problem.A.shape[0]}")
    if args.verify:
        try:
            ext = solve_lp_problem(problem, time_limit=cfg.solver.time_limit, scale=cfg.radio.r_min_bps)
            internal = solve_optimal(real.instance, replace(cfg.solver, mode="internal"))
        except Exception as exc:
            raise SchemeFailure("optimal", cfg.seed, args.iteration, exc) from exc
        rel = abs(ext.objective - internal.objective) / max(1.0, abs(internal.objective))
        print(f"external objective {ext.objective!r} ({ext.status}); internal {internal.objective!r} "
              f"(optimal={internal.optimal}); relative difference {rel:.3g}")
        if rel > max(cfg.solver.gap_tolerance, 1e-6) and internal.optimal and ext.status == "optimal":
            return _fail(EXIT_SCHEME, "external and internal optima disagree")
    return EXIT_OK


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError([("<cli>", f"bad number list {text!r}")]) from exc


def cmd_calibrate(args) -> int:
    spec = _load(args)
    thetas = _floats(args.theta)
    lambdas = _floats(args.lambda_u)
    runs = list(calibration_runs(spec.scenario, thetas, lambdas))
    try:
        sigma = calibrate_sigma(runs)
    except ValueError as exc:
        return _fail(EXIT_SCHEME, str(exc))
    pooled = pooled_misalignment(runs)
    table = {
        "sigma_deg": {f"{t:g}": sigma[t] for t in sorted(sigma)},
        "calibration": {
            "rule": "min(2 * population std of active-link BS misalignment, theta_b / 2)",
            "theta_b_deg": thetas,
            "lambda_u": lambdas,
            "seed": spec.scenario.seed,
            "iterations_per_cell": spec.scenario.iterations,
            "layout": to_dict(spec)["layout"],
            "shares_per_beam": to_dict(spec)["radio"]["s"],
            "solver": to_dict(spec)["solver"],
            "links": {f"{t:g}": int(len(pooled[t])) for t in sorted(pooled)},
            "two_std_deg": {f"{t:g}": 2.0 * float(np.std(pooled[t])) for t in sorted(pooled)},
            "instances": len(runs),
            "proven_optimal": sum(bool(a.optimal) for a, _ in runs),
            "max_gap": max((float(a.gap) for a, _ in runs), default=0.0),
        },
    }
    write_json(args.out, table)
    for t in sorted(sigma):
        print(f"theta_b={t:g} deg: sigma={sigma[t]:.4f} deg from {len(pooled[t])} links")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmwave-assoc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="override experiment.seed")
        sp.add_argument("--iterations", type=int, help="override experiment.iterations")

    r = sub.add_parser("run", help="run the configured schemes and write metrics")
    common(r)
    r.add_argument("--schemes", help="comma list, e.g. beam-align,snr-1,snr-dynamic")
    r.add_argument("--out-dir", default="results/run")
    r.add_argument("--focal-bs", type=int, help="also map P(connect to this BS) per 1 m cell")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="cartesian sweep over lambda_u, theta_b_deg, s, rain_mm_h")
    common(s)
    s.add_argument("--schemes")
    s.add_argument("--grid", default="", help='e.g. "lambda_u=100,250,500,750,1000;s=1,2,inf"')
    s.add_argument("--out-dir", default="results/sweep")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("export-lp", help="write one realization's optimization model as a CPLEX LP file")
    common(e)
    e.add_argument("--iteration", type=int, default=0)
    e.add_argument("--out", default="p1.lp")
    e.add_argument("--verify", action="store_true", help="solve the file externally and compare with the internal solver")
    e.set_defaults(func=cmd_export_lp)

    c = sub.add_parser("calibrate", help="derive the beam-align misalignment threshold from optimal runs")
    common(c)
    c.add_argument("--theta", default="5,10,15", help="BS beamwidths in degrees")
    c.add_argument("--lambda-u", default="100,250,500,750,1000", help="user densities per km^2")
    c.add_argument("--out", default="sigma_table.json")
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for path, msg in exc.problems:
            print(f"config error at {path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemeFailure as exc:
        return _fail(EXIT_SCHEME, str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))


if __name__ == "__main__":
    sys.exit(main())

"""Exact throughput-maximizing association (P1)."""

from __future__ import annotations

import enum
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..channel import satisfaction
from .instance import Association, Instance, p1_objective, user_capacities
from .lpfile import read_lp, solve_lp_problem, write_lp
from .milp import MilpModel, branch_and_bound, build_p1_model, complete_solution


class SolverMode(str, enum.Enum):
    INTERNAL = "internal"
    EXPORT_LP = "export_lp"


@dataclass(frozen=True)
class SolverConfig:
    penalty_m: float | None = None  # None -> 2 * R_min
    mode: SolverMode = SolverMode.INTERNAL
    time_limit: float = 60.0
    gap_tolerance: float = 1e-6
    node_limit: int | None = None  # deterministic alternative to time_limit
    overhead_in_rate: bool = True
    lp_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", SolverMode(self.mode))
        if self.penalty_m is not None and self.penalty_m < 0:
            raise ValueError("penalty M must be non-negative")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")

    def penalty(self, r_min_bps: float) -> float:
        return 2.0 * r_min_bps if self.penalty_m is None else float(self.penalty_m)


def _association_from_x(instance: Instance, model: MilpModel, x_values, scheme: str) -> Association:
    radio = instance.radio
    shape = (instance.n_users, instance.n_bs)
    x = np.zeros(shape, dtype=int)
    share = np.zeros(shape)
    links = model.x_links
    vals = np.asarray(x_values, dtype=float)
    if radio.unbounded:
        vals = np.clip(vals, 0.0, 1.0)
        vals[vals < 1e-9] = 0.0
        share[links[:, 0], links[:, 1]] = vals
        x[links[:, 0], links[:, 1]] = (vals > 0).astype(int)
    else:
        ints = np.rint(vals).astype(int)
        x[links[:, 0], links[:, 1]] = ints
        share = x / radio.s
    p = np.atleast_1d(satisfaction(user_capacities(instance, share), radio.r_min_bps))
    return Association(x, share, p, scheme)


def solve_optimal(instance: Instance, solver: SolverConfig = SolverConfig()) -> Association:
    """Maximize throughput minus ``M`` per unit of unsatisfied demand, subject to C1-C6.

    The internal mode runs branch and bound with LP bounds; the export mode
    writes the model as an LP file and solves it with HiGHS, mimicking an
    external solver.
    """
    radio = instance.radio
    m = solver.penalty(radio.r_min_bps)
    if solver.mode is SolverMode.EXPORT_LP:
        return _solve_via_lp_file(instance, solver, m)

    # work in units of R_min for conditioning
    model = build_p1_model(instance, m, scale=radio.r_min_bps, overhead_in_rate=solver.overhead_in_rate)

    def evaluate(z):
        zz = complete_solution(model, z[: model.n_x])
        return zz, model.objective(zz)

    zero = complete_solution(model, np.zeros(model.n_x))
    res = branch_and_bound(model, time_limit=solver.time_limit, gap_tolerance=solver.gap_tolerance,
                           node_limit=solver.node_limit, evaluate=evaluate, incumbent=zero)
    assoc = _association_from_x(instance, model, res.z[: model.n_x], "optimal")
    assoc.objective = p1_objective(instance, assoc.time_share, m, solver.overhead_in_rate)
    assoc.optimal = res.status == "optimal"
    assoc.gap = res.gap
    assoc.info = {"nodes": res.nodes, "status": res.status, "bound": res.bound * model.scale}
    return assoc


def _solve_via_lp_file(instance: Instance, solver: SolverConfig, m: float) -> Association:
    if solver.lp_path:
        path = export_lp(instance, solver, solver.lp_path)
        sol = solve_lp_problem(read_lp(path), time_limit=solver.time_limit, scale=instance.radio.r_min_bps)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            path = export_lp(instance, solver, Path(tmp) / "p1.lp")
            sol = solve_lp_problem(read_lp(path), time_limit=solver.time_limit, scale=instance.radio.r_min_bps)
    model = build_p1_model(instance, m, overhead_in_rate=solver.overhead_in_rate)
    x_vals = np.array([sol.values.get(n, 0.0) for n in model.names[: model.n_x]])
    assoc = _association_from_x(instance, model, x_vals, "optimal")
    assoc.objective = p1_objective(instance, assoc.time_share, m, solver.overhead_in_rate)
    assoc.optimal = sol.status == "optimal"
    assoc.info = {"status": sol.status, "external_objective": sol.objective}
    return assoc


def export_lp(instance: Instance, solver: SolverConfig, path) -> Path:
    """Write P1 for ``instance`` in CPLEX LP format, coefficients in bps."""
    radio = instance.radio
    m = solver.penalty(radio.r_min_bps)
    model = build_p1_model(instance, m, overhead_in_rate=solver.overhead_in_rate)
    s_txt = "inf" if radio.unbounded else str(radio.s)
    comment = (f"user association: {instance.n_users} users, {instance.n_bs} base stations, s={s_txt}, "
               f"M={m!r}\n{model.n_x} x-variables, {len(model.p_index)} p-variables, "
               f"{len(model.row_names)} constraints")
    return write_lp(model, path, comment)

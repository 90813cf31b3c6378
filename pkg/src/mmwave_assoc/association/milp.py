"""The throughput-maximizing association MILP and a best-first branch-and-bound solver.

The model is kept in plain matrix form (maximize ``c @ z + constant``
subject to ``A_ub @ z <= b_ub``, variable bounds, integrality flags) so the
same object feeds the internal solver and the LP-file writer.

The user-beam constraint needs to know whether a link is active at all, not
how many shares it holds, so links whose user beam is contested by several
BSs get a binary indicator ``y`` with ``x <= s*y`` and at most one ``y`` per
user beam.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .instance import Instance

log = logging.getLogger(__name__)


@dataclass
class MilpModel:
    names: list[str]
    c: np.ndarray
    constant: float
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    row_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    # index bookkeeping back to the instance
    x_links: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    y_of_x: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    p_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    rate_coef: np.ndarray = field(default_factory=lambda: np.zeros(0))
    r_min: float = 1.0
    scale: float = 1.0

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_x(self) -> int:
        return len(self.x_links)

    def objective(self, z) -> float:
        return float(self.c @ z + self.constant)


def build_p1_model(instance: Instance, penalty_m: float, scale: float = 1.0,
                   overhead_in_rate: bool = True) -> MilpModel:
    """Assemble P1 for ``instance``; every coefficient is divided by ``scale``.

    With finite ``s`` the ``x`` variables are integer share counts in
    ``[0, s]``. With unbounded ``s`` they are continuous airtime fractions in
    ``[0, 1]``, the ``s -> inf`` limit of ``x/s``.
    """
    radio = instance.radio
    s_eff = 1.0 if radio.unbounded else float(radio.s)
    cand = np.argwhere(instance.candidate)  # row-major: sorted by (user, bs)
    n_u, n_x = instance.n_users, len(cand)
    full_rate = instance.link_rate(with_overhead=True)[cand[:, 0], cand[:, 1]] if n_x else np.zeros(0)
    obj_coef = full_rate / s_eff / scale
    rate_coef = (full_rate if overhead_in_rate else full_rate / (1 - radio.xi)) / s_eff / scale

    names = [f"x_{i}_{j}" for i, j in cand]
    lb = [0.0] * n_x
    ub = [s_eff] * n_x
    integ = [0 if radio.unbounded else 1] * n_x
    c = list(obj_coef)

    rows: list[tuple[list[int], list[float], float, str]] = []

    # C1: BS beam share budget
    bkey = instance.bs_beam_key[cand[:, 0], cand[:, 1]] if n_x else np.zeros(0, dtype=int)
    for key in np.unique(bkey):
        members = np.flatnonzero(bkey == key)
        if len(members) > 1:
            j, d = divmod(int(key), radio.m_bs)
            rows.append((list(members), [1.0] * len(members), s_eff, f"c1_b{j}_d{d}"))

    # C2: one BS per user beam, via indicators on contested user beams
    y_of_x = np.full(n_x, -1, dtype=int)
    ukey = instance.user_beam_key[cand[:, 0], cand[:, 1]] if n_x else np.zeros(0, dtype=int)
    for key in np.unique(ukey):
        members = np.flatnonzero(ukey == key)
        if len(members) < 2:
            continue
        ys = []
        for k in members:
            i, j = cand[k]
            y_of_x[k] = len(names)
            ys.append(len(names))
            names.append(f"y_{i}_{j}")
            lb.append(0.0)
            ub.append(1.0)
            integ.append(1)
            c.append(0.0)
            rows.append(([int(k), y_of_x[k]], [1.0, -s_eff], 0.0, f"c2_link_{i}_{j}"))
        i, d = divmod(int(key), radio.m_user)
        rows.append((ys, [1.0] * len(ys), 1.0, f"c2_u{i}_d{d}"))

    # C4: p_i * R_min <= rate_i
    p_index = np.arange(len(names), len(names) + n_u)
    for i in range(n_u):
        names.append(f"p_{i}")
        lb.append(0.0)
        ub.append(1.0)
        integ.append(0)
        c.append(penalty_m / scale)
    user_of_x = cand[:, 0] if n_x else np.zeros(0, dtype=int)
    for i in range(n_u):
        ks = np.flatnonzero(user_of_x == i)
        rows.append(([int(p_index[i])] + list(ks), [radio.r_min_bps / scale] + list(-rate_coef[ks]), 0.0,
                     f"c4_u{i}"))

    n = len(names)
    if rows:
        data, ri, ci = [], [], []
        for r, (cols, vals, _, _) in enumerate(rows):
            ri.extend([r] * len(cols))
            ci.extend(cols)
            data.extend(vals)
        A = sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
    else:
        A = sparse.csr_matrix((0, n))
    return MilpModel(
        names=names, c=np.array(c, dtype=float), constant=-penalty_m * n_u / scale, A_ub=A,
        b_ub=np.array([r[2] for r in rows], dtype=float), row_names=[r[3] for r in rows],
        lb=np.array(lb, dtype=float), ub=np.array(ub, dtype=float), integrality=np.array(integ, dtype=int),
        x_links=cand.astype(int), y_of_x=y_of_x, p_index=p_index, rate_coef=rate_coef,
        r_min=radio.r_min_bps / scale, scale=scale)


def complete_solution(model: MilpModel, x_values) -> np.ndarray:
    """Full variable vector for given ``x`` values: indicators set, each ``p`` at its best value."""
    z = np.zeros(model.n_vars)
    x = np.asarray(x_values, dtype=float)
    z[: model.n_x] = x
    has_y = model.y_of_x >= 0
    z[model.y_of_x[has_y]] = (x[has_y] > 1e-12).astype(float)
    rate = np.zeros(len(model.p_index))
    if model.n_x:
        np.add.at(rate, model.x_links[:, 0], model.rate_coef * x)
    z[model.p_index] = np.minimum(1.0, rate / model.r_min)
    return z


def round_to_feasible(model: MilpModel, z_lp) -> np.ndarray:
    """Cheap primal heuristic: floor integer shares and keep one BS per contested user beam."""
    x = np.asarray(z_lp[: model.n_x], dtype=float).copy()
    integer = model.integrality[: model.n_x] == 1
    x[integer] = np.floor(x[integer] + 1e-9)
    x = np.clip(x, 0.0, model.ub[: model.n_x])
    # user-beam conflicts: rows named c2_u* list the indicators of one user beam
    x_of_y = {int(y): k for k, y in enumerate(model.y_of_x) if y >= 0}
    A = model.A_ub
    for r, name in enumerate(model.row_names):
        if not name.startswith("c2_u"):
            continue
        ks = [x_of_y[int(col)] for col in A.indices[A.indptr[r]:A.indptr[r + 1]]]
        live = [k for k in ks if x[k] > 1e-12]
        if len(live) > 1:
            best = max(live, key=lambda k: (model.c[k] * x[k], -k))
            for k in live:
                if k != best:
                    x[k] = 0.0
    return complete_solution(model, greedy_fill(model, x))


def _link_groups(model: MilpModel):
    """Per x variable: its C1 row (or -1) and its contested user-beam group (or -1)."""
    A = model.A_ub
    c1_row = np.full(model.n_x, -1, dtype=int)
    c2_group = np.full(model.n_x, -1, dtype=int)
    x_of_y = {int(y): k for k, y in enumerate(model.y_of_x) if y >= 0}
    for r, name in enumerate(model.row_names):
        cols = A.indices[A.indptr[r]:A.indptr[r + 1]]
        if name.startswith("c1_"):
            c1_row[cols] = r
        elif name.startswith("c2_u"):
            c2_group[[x_of_y[int(col)] for col in cols]] = r
    return c1_row, c2_group


def greedy_fill(model: MilpModel, x) -> np.ndarray:
    """Hand out leftover beam shares one at a time to the link with the largest objective gain."""
    x = np.asarray(x, dtype=float).copy()
    n_x = model.n_x
    if n_x == 0:
        return x
    if getattr(model, "_groups", None) is None:
        model._groups = _link_groups(model)
    c1_row, c2_group = model._groups
    n_rows = len(model.row_names)
    users = model.x_links[:, 0]
    penalty = model.c[model.p_index][users]
    step = np.where(model.integrality[:n_x] == 1, 1.0, model.ub[:n_x])
    ub = model.ub[:n_x]
    has_c1 = c1_row >= 0
    row_load = np.bincount(c1_row[has_c1], weights=x[has_c1], minlength=n_rows)
    has_c2 = c2_group >= 0
    group_busy = np.bincount(c2_group[has_c2], weights=(x[has_c2] > 0), minlength=n_rows)
    rate = np.bincount(users, weights=model.rate_coef * x, minlength=len(model.p_index))
    obj_coef = model.c[:n_x]
    while True:
        room = np.where(has_c1, model.b_ub[np.maximum(c1_row, 0)] - row_load[np.maximum(c1_row, 0)], np.inf)
        inc = np.minimum(np.minimum(step, ub - x), room)
        sat = np.minimum(1.0, rate[users] / model.r_min)
        new_sat = np.minimum(1.0, (rate[users] + model.rate_coef * inc) / model.r_min)
        gain = obj_coef * inc + penalty * (new_sat - sat)
        blocked = has_c2 & (x == 0) & (group_busy[np.maximum(c2_group, 0)] > 0)
        gain[(inc <= 1e-12) | blocked] = -np.inf
        k = int(np.argmax(gain))
        if not gain[k] > 0:
            return x
        if has_c2[k] and x[k] == 0:
            group_busy[c2_group[k]] += 1
        x[k] += inc[k]
        if has_c1[k]:
            row_load[c1_row[k]] += inc[k]
        rate[users[k]] += model.rate_coef[k] * inc[k]


@dataclass
class BnBResult:
    z: np.ndarray
    objective: float
    bound: float
    status: str  # "optimal", "time_limit" or "node_limit"
    nodes: int

    @property
    def gap(self) -> float:
        return max(0.0, (self.bound - self.objective) / max(1.0, abs(self.objective)))


def _solve_lp(c, A_ub, b_ub, lb, ub):
    res = linprog(-c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  bounds=np.column_stack([lb, ub]), method="highs")
    if res.status != 0:
        return None, -math.inf
    return res.x, -res.fun


def branch_and_bound(model: MilpModel, time_limit: float = math.inf, gap_tolerance: float = 1e-6,
                     node_limit: int | None = None, lp_tolerance: float = 1e-7, integrality_tolerance: float = 1e-6,
                     heuristic=round_to_feasible, evaluate=None, incumbent=None) -> BnBResult:
    """Best-first branch and bound on the LP relaxation of ``model`` (maximization).

    ``evaluate(z) -> (z, objective)`` polishes integral LP points; it
    defaults to the model objective. ``incumbent`` is an optional feasible
    starting point. Nodes are pruned only when their LP bound, inflated by
    ``lp_tolerance`` to absorb simplex round-off, cannot beat the incumbent by
    more than ``gap_tolerance`` (relative). ``node_limit`` caps the number of
    LP relaxations solved; unlike ``time_limit`` it stops at the same point
    on every machine.
    """
    start = time.monotonic()
    c = model.c
    if model.n_vars == 0:
        return BnBResult(np.zeros(0), float(model.constant), float(model.constant), "optimal", 0)
    integer = np.flatnonzero(model.integrality == 1)
    if evaluate is None:
        evaluate = lambda z: (z, model.objective(z))  # noqa: E731

    best_z, best_obj = (None, -math.inf) if incumbent is None else evaluate(incumbent)

    def consider(z):
        nonlocal best_z, best_obj
        z, obj = evaluate(z)
        if obj > best_obj:
            best_z, best_obj = z, obj

    def prunable(bound: float) -> bool:
        slack = lp_tolerance * max(1.0, abs(bound))
        return bound + slack <= best_obj + gap_tolerance * max(1.0, abs(best_obj))

    counter = itertools.count()
    heap: list = []
    nodes = 0

    def push(lb, ub):
        nonlocal nodes
        nodes += 1
        z, bound = _solve_lp(c, model.A_ub, model.b_ub, lb, ub)
        if z is None:
            return
        bound += model.constant
        frac = np.abs(z[integer] - np.round(z[integer])) if len(integer) else np.zeros(0)
        if len(integer) == 0 or frac.max() <= integrality_tolerance:
            zi = z.copy()
            zi[integer] = np.round(zi[integer])
            consider(zi)
            return
        if heuristic is not None:
            consider(heuristic(model, z))
        if not prunable(bound):
            heapq.heappush(heap, (-bound, next(counter), lb, ub, z))

    push(model.lb.copy(), model.ub.copy())
    status = "optimal"
    while heap:
        neg_bound, _, lb, ub, z = heapq.heappop(heap)
        if prunable(-neg_bound):
            continue
        stop = ("node_limit" if node_limit is not None and nodes >= node_limit
                else "time_limit" if time.monotonic() - start > time_limit else None)
        if stop:
            heapq.heappush(heap, (neg_bound, next(counter), lb, ub, z))
            status = stop
            break
        vals = z[integer]
        live = np.abs(vals - np.round(vals)) > integrality_tolerance
        # branch on the variable whose fractional part is closest to 1/2
        score = np.where(live, np.abs(vals - np.floor(vals) - 0.5), np.inf)
        k = integer[int(np.argmin(score))]
        lo_ub = ub.copy()
        lo_ub[k] = math.floor(z[k])
        hi_lb = lb.copy()
        hi_lb[k] = math.ceil(z[k])
        push(lb, lo_ub)
        push(hi_lb, ub)

    if best_z is None:
        raise RuntimeError("branch and bound found no feasible point")
    open_bound = max((-h[0] for h in heap), default=-math.inf)
    bound = best_obj if status == "optimal" else max(best_obj, open_bound)
    return BnBResult(best_z, best_obj, bound, status, nodes)

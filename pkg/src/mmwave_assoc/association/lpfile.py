"""CPLEX LP text format: writer, a reader for the subset we emit, and an external MILP solve.

The reader understands objective/constraint expressions of the form
``[sign] [coef] name ...``, the ``<=``/``>=``/``=`` senses, double- and
single-sided bounds, ``free``, and the General/Binary sections. That is
enough to round-trip our own files and typical solver-written ones.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

from .milp import MilpModel

_LINE_WIDTH = 250


def _num(v: float) -> str:
    if v == 0:
        return "0"
    return repr(float(v)) if not float(v).is_integer() or abs(v) >= 1e16 else str(int(v))


def _expr(coefs, names) -> list[str]:
    terms = []
    for a, n in zip(coefs, names):
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        terms.append(f"{sign} {n}" if mag == 1 else f"{sign} {_num(mag)} {n}")
    return terms


def _wrap(head: str, terms: list[str], tail: str = "") -> list[str]:
    lines, cur = [], head
    for t in terms + ([tail] if tail else []):
        if len(cur) + len(t) + 1 > _LINE_WIDTH:
            lines.append(cur)
            cur = "  " + t
        else:
            cur = f"{cur} {t}"
    lines.append(cur)
    return lines


def format_lp(model: MilpModel, comment: str = "") -> str:
    out = []
    for line in comment.splitlines():
        out.append(f"\\ {line}")
    out.append("Maximize")
    obj_terms = _expr(model.c, model.names)
    if model.constant:
        obj_terms.append(f"{'-' if model.constant < 0 else '+'} {_num(abs(model.constant))}")
    if not obj_terms:
        obj_terms = ["0 " + model.names[0]] if model.names else ["0"]
    out.extend(_wrap(" obj:", obj_terms))
    out.append("Subject To")
    A = model.A_ub.tocsr()
    for r, name in enumerate(model.row_names):
        cols = A.indices[A.indptr[r]:A.indptr[r + 1]]
        vals = A.data[A.indptr[r]:A.indptr[r + 1]]
        terms = _expr(vals, [model.names[c] for c in cols]) or [f"0 {model.names[0]}"]
        out.extend(_wrap(f" {name}:", terms, f"<= {_num(model.b_ub[r])}"))
    out.append("Bounds")
    binaries, generals = [], []
    for n, lo, hi, it in zip(model.names, model.lb, model.ub, model.integrality):
        if it and lo == 0 and hi == 1 and n.startswith("y_"):
            binaries.append(n)
            continue
        if it:
            generals.append(n)
        hi_s = "+inf" if math.isinf(hi) else _num(hi)
        out.append(f" {_num(lo)} <= {n} <= {hi_s}")
    if generals:
        out.append("General")
        out.extend(_wrap("", generals))
    if binaries:
        out.append("Binary")
        out.extend(_wrap("", binaries))
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(model: MilpModel, path, comment: str = "") -> Path:
    path = Path(path)
    path.write_text(format_lp(model, comment))
    return path


@dataclass
class LpProblem:
    sense: str  # "max" or "min"
    names: list[str]
    c: np.ndarray
    constant: float
    A: sparse.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    row_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray

    def index(self, name: str) -> int:
        return self.names.index(name)


_SECTIONS = {
    "maximize": "max", "maximise": "max", "maximum": "max", "max": "max",
    "minimize": "min", "minimise": "min", "minimum": "min", "min": "min",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "general": "gen", "generals": "gen", "gen": "gen", "integers": "gen",
    "binary": "bin", "binaries": "bin", "bin": "bin",
    "end": "end",
}
_UNUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf(?:inity)?\b"
_NUM = rf"[+-]?\s*(?:{_UNUM})"
_TOKEN = re.compile(rf"\s*(<=|>=|=<|=>|<|>|=|[+-]|{_UNUM}|[A-Za-z_][\w.\[\]]*)", re.IGNORECASE)


def _tokens(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse LP expression near {text[pos:pos + 30]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _parse_linear(tokens: list[str]) -> tuple[dict[str, float], float]:
    """Linear expression -> ({name: coef}, constant)."""
    coefs: dict[str, float] = {}
    const = 0.0
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            if coef is not None:
                const += sign * coef
                coef = None
            sign = 1.0 if tok == "+" else -1.0
        elif _is_number(tok):
            coef = float(tok) if coef is None else coef * float(tok)
        else:
            coefs[tok] = coefs.get(tok, 0.0) + sign * (1.0 if coef is None else coef)
            sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return coefs, const


def _split_label(stmt: str) -> tuple[str | None, str]:
    m = re.match(r"\s*([A-Za-z_][\w.\[\]]*)\s*:(.*)$", stmt, re.S)
    if m:
        return m.group(1), m.group(2)
    return None, stmt


def parse_lp(text: str) -> LpProblem:
    # strip comments and join statements per section
    lines = [ln.split("\\", 1)[0].rstrip() for ln in text.splitlines()]
    sections: list[tuple[str, list[str]]] = []
    for ln in lines:
        if not ln.strip():
            continue
        key = ln.strip().lower()
        if key in _SECTIONS:
            sections.append((_SECTIONS[key], []))
            continue
        if not sections:
            raise ValueError(f"content before any section: {ln!r}")
        sections[-1][1].append(ln)

    sense, obj_lines, st_lines, bound_lines, gen, binv = "max", [], [], [], [], []
    for sec, body in sections:
        if sec in ("max", "min"):
            sense, obj_lines = sec, body
        elif sec == "st":
            st_lines = body
        elif sec == "bounds":
            bound_lines = body
        elif sec == "gen":
            gen.extend(" ".join(body).split())
        elif sec == "bin":
            binv.extend(" ".join(body).split())

    order: dict[str, int] = {}

    def var(name: str) -> int:
        if name not in order:
            order[name] = len(order)
        return order[name]

    _, obj_text = _split_label(" ".join(obj_lines))
    obj, constant = _parse_linear(_tokens(obj_text))
    for n in obj:
        var(n)

    # a constraint statement continues until its right-hand side number
    stmts, cur = [], ""
    for ln in st_lines:
        cur = f"{cur} {ln}" if cur else ln
        if re.search(rf"(<=|>=|=<|=>|<|>|=)\s*({_NUM})\s*$", cur, re.IGNORECASE):
            stmts.append(cur)
            cur = ""
    if cur.strip():
        raise ValueError(f"unterminated constraint: {cur!r}")

    rows, row_lo, row_hi, row_names = [], [], [], []
    for k, st in enumerate(stmts):
        label, body = _split_label(st)
        toks = _tokens(body)
        op_at = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=<", "=>", "<", ">", "="))
        lhs, lconst = _parse_linear(toks[:op_at])
        rhs = float("".join(toks[op_at + 1:]))
        rhs -= lconst
        op = toks[op_at]
        lo, hi = -math.inf, math.inf
        if op in ("<=", "=<", "<"):
            hi = rhs
        elif op in (">=", "=>", ">"):
            lo = rhs
        else:
            lo = hi = rhs
        for n in lhs:
            var(n)
        rows.append(lhs)
        row_lo.append(lo)
        row_hi.append(hi)
        row_names.append(label or f"R{k}")

    bounds: dict[str, list[float]] = {}
    for ln in bound_lines:
        toks = _tokens(ln)
        if len(toks) == 2 and toks[1].lower() == "free":
            bounds[toks[0]] = [-math.inf, math.inf]
            var(toks[0])
            continue
        names = [t for t in toks if not _is_number(t) and t not in ("<=", ">=", "=<", "=>", "<", ">", "=", "+", "-")]
        if len(names) != 1:
            raise ValueError(f"cannot parse bound {ln!r}")
        name = names[0]
        var(name)
        lo, hi = bounds.get(name, [0.0, math.inf])
        i = toks.index(name)
        left, right = toks[:i], toks[i + 1:]
        if left:
            val = float("".join(left[:-1]))
            if left[-1] in ("<=", "=<", "<"):
                lo = val
            elif left[-1] in (">=", "=>", ">"):
                hi = val
            else:
                lo = hi = val
        if right:
            val = float("".join(right[1:]))
            if right[0] in ("<=", "=<", "<"):
                hi = val
            elif right[0] in (">=", "=>", ">"):
                lo = val
            else:
                lo = hi = val
        bounds[name] = [lo, hi]
    for n in gen + binv:
        var(n)

    names = list(order)
    n = len(names)
    c = np.zeros(n)
    for name, v in obj.items():
        c[order[name]] = v
    data, ri, ci = [], [], []
    for r, lhs in enumerate(rows):
        for name, v in lhs.items():
            ri.append(r)
            ci.append(order[name])
            data.append(v)
    A = sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
    lb = np.zeros(n)
    ub = np.full(n, math.inf)
    for name, (lo, hi) in bounds.items():
        lb[order[name]], ub[order[name]] = lo, hi
    integ = np.zeros(n, dtype=int)
    for name in gen:
        integ[order[name]] = 1
    for name in binv:
        k = order[name]
        integ[k] = 1
        lb[k], ub[k] = max(lb[k], 0.0), min(ub[k], 1.0)
    return LpProblem(sense, names, c, constant, A, np.array(row_lo), np.array(row_hi), row_names, lb, ub, integ)


def read_lp(path) -> LpProblem:
    return parse_lp(Path(path).read_text())


@dataclass
class ExternalSolution:
    status: str
    objective: float
    values: dict[str, float]


def solve_lp_problem(problem: LpProblem, time_limit: float | None = None, mip_rel_gap: float = 1e-9,
                     scale: float = 1.0) -> ExternalSolution:
    """Solve a parsed LP file with HiGHS (through ``scipy.optimize.milp``).

    ``scale`` divides objective and constraint rows by a common factor for
    conditioning; the returned objective is in the file's units.
    """
    sign = -1.0 if problem.sense == "max" else 1.0
    c = sign * problem.c / scale
    constraints = []
    if problem.A.shape[0]:
        row_scale = np.maximum(1.0, abs(problem.A).max(axis=1).toarray().ravel())
        D = sparse.diags(1.0 / row_scale)
        constraints.append(LinearConstraint(D @ problem.A, problem.row_lo / row_scale, problem.row_hi / row_scale))
    options = {"mip_rel_gap": mip_rel_gap}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(c, constraints=constraints, integrality=problem.integrality,
               bounds=Bounds(problem.lb, problem.ub), options=options)
    if res.x is None:
        return ExternalSolution(res.message, math.nan, {})
    x = res.x.copy()
    x[problem.integrality == 1] = np.round(x[problem.integrality == 1])
    obj = float(problem.c @ x + problem.constant)
    status = "optimal" if res.status == 0 else res.message
    return ExternalSolution(status, obj, dict(zip(problem.names, x)))

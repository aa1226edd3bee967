"""Exact solver for linear programs over binary variables plus a few
continuous auxiliaries.

The reference backend is a best-first branch-and-bound on LP relaxations
(solved with HiGHS through :func:`scipy.optimize.linprog`). Binaries come
first in the variable vector, continuous variables after them.
"""

from __future__ import annotations

import heapq
import itertools
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp
from scipy.sparse import csr_matrix

INT_TOL = 1e-6
FEAS_TOL = 1e-6
RELATIONS = ("<=", "=", ">=")


@dataclass
class BinaryLinearProgram:
    num_binary: int
    num_continuous: int = 0
    objective: np.ndarray | None = None
    constraints: list[tuple[dict[int, float], str, float]] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    row_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        n = self.num_vars
        self.objective = np.zeros(n) if self.objective is None else np.asarray(self.objective, dtype=float)
        if self.objective.shape != (n,):
            raise ValueError(f"objective has {self.objective.size} entries, expected {n}")
        if self.lower is None:
            self.lower = np.zeros(n)
        if self.upper is None:
            self.upper = np.concatenate([np.ones(self.num_binary), np.full(self.num_continuous, np.inf)])
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")

    @property
    def num_vars(self) -> int:
        return self.num_binary + self.num_continuous

    def add_constraint(self, row: dict[int, float], rel: str, rhs: float, name: str | None = None) -> None:
        if rel not in RELATIONS:
            raise ValueError(f"unknown relation {rel!r}")
        row = {int(j): float(a) for j, a in row.items() if a != 0}
        if not all(math.isfinite(a) for a in row.values()) or not math.isfinite(rhs):
            raise ValueError("constraint coefficients must be finite")
        if any(j < 0 or j >= self.num_vars for j in row):
            raise ValueError("constraint references an unknown variable")
        self.constraints.append((row, rel, float(rhs)))
        self.row_names.append(name or f"c{len(self.constraints) - 1}")

    def fix(self, var: int, value: float) -> None:
        self.lower[var] = self.upper[var] = value

    def copy(self) -> "BinaryLinearProgram":
        return BinaryLinearProgram(
            self.num_binary, self.num_continuous, self.objective.copy(),
            [(dict(r), rel, rhs) for r, rel, rhs in self.constraints],
            self.lower.copy(), self.upper.copy(), list(self.row_names),
        )

    def activity(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([sum(a * x[j] for j, a in row.items()) for row, _, _ in self.constraints])

    def is_feasible(self, x, tol: float = FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        nb = self.num_binary
        if np.any(np.abs(x[:nb] - np.round(x[:nb])) > 0):
            return False
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        for (row, rel, rhs), act in zip(self.constraints, self.activity(x)):
            if rel == "<=" and act > rhs + tol:
                return False
            if rel == ">=" and act < rhs - tol:
                return False
            if rel == "=" and abs(act - rhs) > tol:
                return False
        return True

    def matrices(self):
        """(A_ub, b_ub, A_eq, b_eq) in sparse form, ``>=`` rows negated."""
        ub_r, ub_c, ub_v, b_ub = [], [], [], []
        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        for row, rel, rhs in self.constraints:
            if rel == "=":
                k = len(b_eq)
                for j, a in row.items():
                    eq_r.append(k), eq_c.append(j), eq_v.append(a)
                b_eq.append(rhs)
            else:
                sign = 1.0 if rel == "<=" else -1.0
                k = len(b_ub)
                for j, a in row.items():
                    ub_r.append(k), ub_c.append(j), ub_v.append(sign * a)
                b_ub.append(sign * rhs)
        n = self.num_vars
        a_ub = csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n)) if b_ub else None
        a_eq = csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n)) if b_eq else None
        return a_ub, (np.array(b_ub) if b_ub else None), a_eq, (np.array(b_eq) if b_eq else None)


@dataclass
class SolveOutcome:
    status: str  # optimal | infeasible | limit
    x: np.ndarray | None
    objective: float | None
    gap: float
    nodes: int
    seconds: float

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class SolverLimitError(RuntimeError):
    """A node or time cap stopped the search before optimality was proven."""


def solve_exact(program: BinaryLinearProgram, node_limit: int | None = None,
                time_limit: float | None = None, backend: str = "bnb") -> SolveOutcome:
    """Solve ``min c.x`` to proven optimality.

    ``backend="bnb"`` runs the in-repo branch-and-bound; ``"highs"``
    delegates the whole search to the HiGHS MIP solver.
    """
    if backend == "highs":
        return _solve_highs(program, node_limit, time_limit)
    if backend != "bnb":
        raise ValueError(f"unknown backend {backend!r}")
    return _BranchAndBound(program, node_limit, time_limit).run()


class _BranchAndBound:
    def __init__(self, program, node_limit, time_limit):
        self.p = program
        self.node_limit = node_limit
        self.time_limit = time_limit
        self.a_ub, self.b_ub, self.a_eq, self.b_eq = program.matrices()
        self.nodes = 0
        self.start = time.perf_counter()

    def _lp(self, lower, upper):
        self.nodes += 1
        if np.any(lower > upper):
            return None
        res = linprog(
            self.p.objective, A_ub=self.a_ub, b_ub=self.b_ub, A_eq=self.a_eq, b_eq=self.b_eq,
            bounds=np.column_stack([lower, upper]), method="highs",
        )
        if res.status == 2:
            return None
        if res.status != 0:
            raise RuntimeError(f"LP relaxation failed: {res.message}")
        return res.fun, res.x

    def _over_limit(self):
        if self.node_limit is not None and self.nodes >= self.node_limit:
            return True
        return self.time_limit is not None and time.perf_counter() - self.start > self.time_limit

    def _integral(self, x, lower, upper):
        """Round binaries; re-optimize continuous parts with binaries fixed."""
        nb = self.p.num_binary
        xb = np.round(x[:nb])
        lo, hi = lower.copy(), upper.copy()
        lo[:nb] = hi[:nb] = xb
        if self.p.num_continuous:
            sol = self._lp(lo, hi)
            if sol is None:
                return None
            x = sol[1].copy()
        else:
            x = x.copy()
        x[:nb] = xb
        if not self.p.is_feasible(x):
            return None
        return float(self.p.objective @ x), x

    def _prunable(self, bound, best_obj):
        return bound >= best_obj - 1e-9 * max(1.0, abs(best_obj))

    def run(self) -> SolveOutcome:
        """Best-first search; until an incumbent exists each node dives depth-first."""
        nb = self.p.num_binary
        best_obj, best_x = math.inf, None
        counter = itertools.count()
        heap = []
        root = self._lp(self.p.lower.copy(), self.p.upper.copy())
        if root is not None:
            heapq.heappush(heap, (root[0], next(counter), root[1], self.p.lower.copy(), self.p.upper.copy()))
        limited = False
        while heap and not limited:
            bound, _, x, lower, upper = heapq.heappop(heap)
            if self._prunable(bound, best_obj):
                heap.clear()
                break
            while True:
                if self._over_limit():
                    heapq.heappush(heap, (bound, next(counter), x, lower, upper))
                    limited = True
                    break
                xb = x[:nb]
                frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
                if nb == 0 or frac.max() <= INT_TOL:
                    cand = self._integral(x, lower, upper)
                    if cand is not None:
                        if cand[0] < best_obj:
                            best_obj, best_x = cand
                        break
                    # rounding broke feasibility: keep branching if anything is fractional
                    if nb == 0 or frac.max() == 0:
                        break
                var = int(np.argmax(frac))
                children = []
                for value in (0.0, 1.0):
                    lo, hi = lower.copy(), upper.copy()
                    lo[var] = hi[var] = value
                    child = self._lp(lo, hi)
                    if child is not None and not self._prunable(child[0], best_obj):
                        children.append((child[0], next(counter), child[1], lo, hi))
                if not children:
                    break
                if best_x is not None:
                    for ch in children:
                        heapq.heappush(heap, ch)
                    break
                # dive toward the child the relaxation leans to
                lean = 1.0 if x[var] >= 0.5 else 0.0
                children.sort(key=lambda ch: ch[3][var] != lean)
                for ch in children[1:]:
                    heapq.heappush(heap, ch)
                bound, _, x, lower, upper = children[0]
        seconds = time.perf_counter() - self.start
        if limited:
            gap = best_obj - min(h[0] for h in heap) if best_x is not None else math.inf
            return SolveOutcome("limit", best_x, None if best_x is None else best_obj, gap, self.nodes, seconds)
        if best_x is None:
            return SolveOutcome("infeasible", None, None, 0.0, self.nodes, seconds)
        return SolveOutcome("optimal", best_x, best_obj, 0.0, self.nodes, seconds)


def _solve_highs(program, node_limit, time_limit) -> SolveOutcome:
    start = time.perf_counter()
    a_ub, b_ub, a_eq, b_eq = program.matrices()
    cons = []
    if a_ub is not None:
        cons.append(LinearConstraint(a_ub, -np.inf, b_ub))
    if a_eq is not None:
        cons.append(LinearConstraint(a_eq, b_eq, b_eq))
    integrality = np.concatenate([np.ones(program.num_binary), np.zeros(program.num_continuous)])
    options = {"mip_rel_gap": 0.0}
    if node_limit is not None:
        options["node_limit"] = node_limit
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(program.objective, constraints=cons, integrality=integrality,
               bounds=Bounds(program.lower, program.upper), options=options)
    seconds = time.perf_counter() - start
    if res.status == 0:
        x = res.x.copy()
        x[:program.num_binary] = np.round(x[:program.num_binary])
        return SolveOutcome("optimal", x, float(program.objective @ x), 0.0, 0, seconds)
    if res.status == 2:
        return SolveOutcome("infeasible", None, None, 0.0, 0, seconds)
    x = None if res.x is None else res.x
    return SolveOutcome("limit", x, None if x is None else float(res.fun), math.inf, 0, seconds)


def linearize_abs(program: BinaryLinearProgram, c) -> BinaryLinearProgram:
    """Return a copy minimizing ``|c.x|`` through a new continuous ``w``.

    ``c`` is a dense vector over the existing variables or a sparse dict.
    The original objective is discarded.
    """
    if not isinstance(c, dict):
        c = {j: float(a) for j, a in enumerate(np.asarray(c, dtype=float)) if a != 0}
    n = program.num_vars
    out = BinaryLinearProgram(
        program.num_binary, program.num_continuous + 1, np.zeros(n + 1),
        [(dict(r), rel, rhs) for r, rel, rhs in program.constraints],
        np.append(program.lower, 0.0), np.append(program.upper, np.inf), list(program.row_names),
    )
    out.objective[n] = 1.0
    upper_row = dict(c)
    upper_row[n] = -1.0
    lower_row = dict(c)
    lower_row[n] = 1.0
    out.add_constraint(upper_row, "<=", 0.0, "abs_upper")
    out.add_constraint(lower_row, ">=", 0.0, "abs_lower")
    return out


def brute_force(program: BinaryLinearProgram) -> tuple[float | None, np.ndarray | None]:
    """Enumerate every binary point; only for programs without continuous variables."""
    if program.num_continuous:
        raise ValueError("brute force handles pure binary programs only")
    nb = program.num_binary
    pts = ((np.arange(2 ** nb)[:, None] >> np.arange(nb)) & 1).astype(float)
    ok = np.all((pts >= program.lower - 1e-12) & (pts <= program.upper + 1e-12), axis=1)
    a_ub, b_ub, a_eq, b_eq = program.matrices()
    if a_ub is not None:
        ok &= np.all(a_ub @ pts.T <= b_ub[:, None] + FEAS_TOL, axis=0)
    if a_eq is not None:
        ok &= np.all(np.abs(a_eq @ pts.T - b_eq[:, None]) <= FEAS_TOL, axis=0)
    if not ok.any():
        return None, None
    vals = pts[ok] @ program.objective
    i = int(np.argmin(vals))
    return float(vals[i]), pts[ok][i]


# --------------------------------------------------------------------------
# LP-exchange text format (CPLEX LP layout)

def _var(program, j):
    return f"x{j}" if j < program.num_binary else f"y{j - program.num_binary}"


def _expr(program, row) -> str:
    if not row:
        return "0 x0" if program.num_vars else "0"
    return " ".join(f"{'+' if a >= 0 else '-'} {float(abs(a))!r} {_var(program, j)}" for j, a in sorted(row.items()))


def export_lp(program: BinaryLinearProgram, path) -> None:
    rel_text = {"<=": "<=", ">=": ">=", "=": "="}
    obj = {j: a for j, a in enumerate(program.objective) if a != 0}
    lines = ["\\ binary linear program", "Minimize", f" obj: {_expr(program, obj)}", "Subject To"]
    for name, (row, rel, rhs) in zip(program.row_names, program.constraints):
        lines.append(f" {name}: {_expr(program, row)} {rel_text[rel]} {float(rhs)!r}")
    lines.append("Bounds")
    for j in range(program.num_vars):
        lo, hi = program.lower[j], program.upper[j]
        is_bin = j < program.num_binary
        if is_bin and lo == 0 and hi == 1:
            continue
        hi_s = "+inf" if math.isinf(hi) else repr(float(hi))
        lo_s = "-inf" if math.isinf(lo) else repr(float(lo))
        lines.append(f" {lo_s} <= {_var(program, j)} <= {hi_s}")
    lines.append("Binaries")
    if program.num_binary:
        lines.append(" " + " ".join(_var(program, j) for j in range(program.num_binary)))
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")


_TERM = re.compile(r"([+-])\s*(\S+)\s+([xy])(\d+)")


def _parse_expr(text, nb):
    row = {}
    for sign, coef, kind, idx in _TERM.findall(text):
        j = int(idx) if kind == "x" else nb + int(idx)
        a = float(coef) * (1 if sign == "+" else -1)
        if a != 0:
            row[j] = row.get(j, 0.0) + a
    return row


def import_lp(path) -> BinaryLinearProgram:
    """Read a file written by :func:`export_lp`."""
    text = Path(path).read_text().splitlines()
    sections: dict[str, list[str]] = {}
    current = None
    for line in text:
        s = line.strip()
        if not s or s.startswith("\\"):
            continue
        if s in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
            current = s
            sections.setdefault(s, [])
            continue
        sections[current].append(s)
    binaries = " ".join(sections.get("Binaries", [])).split()
    nb = len(binaries)
    ys = set()
    for chunk in sections.get("Subject To", []) + sections.get("Bounds", []) + sections.get("Minimize", []):
        ys.update(int(m) for m in re.findall(r"\by(\d+)\b", chunk))
    nc = max(ys) + 1 if ys else 0
    obj_row = _parse_expr(sections["Minimize"][0].split(":", 1)[1], nb)
    c = np.zeros(nb + nc)
    for j, a in obj_row.items():
        c[j] = a
    prog = BinaryLinearProgram(nb, nc, c)
    for line in sections.get("Subject To", []):
        name, body = line.split(":", 1)
        m = re.match(r"(.*)\s(<=|>=|=)\s(\S+)$", body.strip())
        prog.add_constraint(_parse_expr(m.group(1), nb), m.group(2), float(m.group(3)), name.strip())
    for line in sections.get("Bounds", []):
        lo, var, hi = re.match(r"(\S+)\s*<=\s*([xy]\d+)\s*<=\s*(\S+)", line).groups()
        j = int(var[1:]) if var[0] == "x" else nb + int(var[1:])
        prog.lower[j] = float(lo)
        prog.upper[j] = float(hi)
    return prog

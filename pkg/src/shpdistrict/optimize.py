"""Plan selection over a sample tree: dynamic programming for linear
objectives, and one master selection problem per root partition for the
fairness objective."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse import csc_matrix

from .affiliation import AffiliationModel
from .solver import BinaryLinearProgram, SolveOutcome, linearize_abs, solve_exact
from .tree import ColumnSet, DistrictColumn, SampleTree, SampleTreeNode, TreeError


def tree_dp(tree, leaf_cost, sense: str = "min") -> tuple[float, tuple[int, ...]]:
    """Best plan value and its leaf ids for an objective additive over districts.

    ``leaf_cost`` maps a leaf node to its cost (callable) or leaf id to cost
    (mapping). Ties keep the earliest sample.
    """
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    root = tree.root if isinstance(tree, SampleTree) else tree
    better = (lambda a, b: a < b) if sense == "min" else (lambda a, b: a > b)
    cost = leaf_cost if callable(leaf_cost) else (lambda leaf: leaf_cost[leaf.leaf_id])

    def best(node: SampleTreeNode):
        if node.is_leaf:
            return float(cost(node)), (node.leaf_id,)
        if node.status != "complete" or not node.partitions:
            raise TreeError(f"node {node.path} is {node.status}")
        top = None
        for part in node.partitions:
            value, plan = 0.0, ()
            for child in part:
                v, p = best(child)
                value += v
                plan += p
            if top is None or better(value, top[0]):
                top = (value, plan)
        return top

    return best(root)


def block_district_matrix(columns: list[DistrictColumn], n_blocks: int) -> csc_matrix:
    """Binary matrix with a[i, j] = 1 iff block i lies in column j."""
    if not columns:
        raise ValueError("no columns")
    rows, cols = [], []
    for j, col in enumerate(columns):
        for b in sorted(col.blocks):
            rows.append(b)
            cols.append(j)
    return csc_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n_blocks, len(columns)))


@dataclass
class MspInstance:
    columns: list[DistrictColumn]
    costs: np.ndarray
    k: int
    blocks: frozenset
    extra_constraints: list[tuple[dict[int, float], str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float)
        if len(self.costs) != len(self.columns):
            raise ValueError("need one cost per column")

    def uncovered(self) -> set[int]:
        covered = set().union(*(c.blocks for c in self.columns)) if self.columns else set()
        return set(self.blocks) - covered


def build_msp(inst: MspInstance) -> BinaryLinearProgram:
    """Exact cover by exactly k columns, minimizing |sum c_j x_j|."""
    n = len(inst.columns)
    prog = BinaryLinearProgram(n)
    rows: dict[int, dict[int, float]] = {b: {} for b in sorted(inst.blocks)}
    for j, col in enumerate(inst.columns):
        for b in col.blocks:
            rows[b][j] = 1.0
    for b, row in rows.items():
        prog.add_constraint(row, "=", 1.0, f"cover_{b}")
    prog.add_constraint({j: 1.0 for j in range(n)}, "=", float(inst.k), "cardinality")
    for i, (row, rel, rhs) in enumerate(inst.extra_constraints):
        prog.add_constraint(row, rel, rhs, f"extra_{i}")
    return linearize_abs(prog, {j: float(c) for j, c in enumerate(inst.costs)})


@dataclass
class MspResult:
    root_index: int
    status: str  # optimal | infeasible | limit | skipped | error
    objective: float | None = None
    columns: list[int] = field(default_factory=list)  # global column ids
    expected_seats: float | None = None
    seconds: float = 0.0
    message: str = ""


def _solve_one(args) -> MspResult:
    root_index, inst, backend, node_limit, time_limit, win = args
    try:
        out: SolveOutcome = solve_exact(build_msp(inst), node_limit=node_limit, time_limit=time_limit,
                                        backend=backend)
    except Exception as exc:  # isolate per-root failures
        return MspResult(root_index, "error", message=str(exc))
    if out.status != "optimal":
        return MspResult(root_index, out.status, seconds=out.seconds)
    chosen = [j for j in range(len(inst.columns)) if out.x[j] > 0.5]
    cols = [inst.columns[j].column_id for j in chosen]
    seats = float(sum(win[j] for j in chosen))
    return MspResult(root_index, "optimal", float(out.objective), cols, seats, out.seconds)


def msp_instances(tree: SampleTree, columns: ColumnSet, model: AffiliationModel,
                  extra: Callable[[list[DistrictColumn]], list] | None = None):
    """One MSP per root partition; yields (root_index, instance, win probs, trivial)."""
    by_root = columns.by_root()
    for i, part in enumerate(tree.root.partitions):
        cols = by_root.get(i, [])
        win = np.array([model.win_probability(c.blocks) for c in cols])
        costs = model.target - win
        inst = MspInstance(cols, costs, tree.k, tree.root.region, extra(cols) if extra else [])
        yield i, inst, win, len(part) == tree.k


def solve_all_msps(tree: SampleTree, columns: ColumnSet, model: AffiliationModel, backend: str = "bnb",
                   workers: int = 1, node_limit: int | None = None, time_limit: float | None = None,
                   extra: Callable | None = None, include_trivial: bool = False) -> list[MspResult]:
    """Solve every root partition's MSP independently.

    Roots whose partition already has k children express a single plan and
    are skipped unless ``include_trivial``.
    """
    jobs, results = [], {}
    for i, inst, win, trivial in msp_instances(tree, columns, model, extra):
        if trivial and not include_trivial:
            results[i] = MspResult(i, "skipped")
            continue
        if inst.uncovered():
            results[i] = MspResult(i, "infeasible", message="some blocks are covered by no column")
            continue
        jobs.append((i, inst, backend, node_limit, time_limit, win))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(_solve_one, jobs))
    else:
        solved = [_solve_one(job) for job in jobs]
    for res in solved:
        results[res.root_index] = res
    return [results[i] for i in sorted(results)]


def objective_histogram(results: list[MspResult], width: float = 0.1, threshold: float = 0.1) -> dict:
    """Histogram of per-root optimal objectives (seats from ideal)."""
    values = np.array([r.objective for r in results if r.status == "optimal"], dtype=float)
    if values.size == 0:
        return {"bins": [], "counts": [], "fractions": [], "within": float("nan"), "n": 0}
    top = max(width, math.ceil(values.max() / width + 1e-9) * width)
    edges = np.arange(0.0, top + width / 2, width)
    counts, edges = np.histogram(values, bins=edges)
    return {
        "bins": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
        "fractions": [float(c) / values.size for c in counts],
        "within": float(np.mean(values <= threshold + 1e-12)),
        "n": int(values.size),
    }

"""Partition integer program: split a region among capacitated centers so
that each subregion is a subtree of its center's shortest-path tree."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geo_graph import AdjacencyGraph, is_contiguous, region_distance_table
from .solver import BinaryLinearProgram, SolverLimitError, solve_exact


def epsilon_schedule(epsilon_p: float, s: int) -> float:
    """Population tolerance for a node of capacity ``s``: eps / ceil(log2 s)."""
    if s < 2:
        raise ValueError("leaves (capacity 1) are never partitioned")
    return epsilon_p / math.ceil(math.log2(s))


@dataclass
class PartitionInstance:
    region: np.ndarray  # sorted block ids
    centers: list[int]
    capacities: list[int]
    alpha: float
    epsilon: float
    ideal_population: float
    population: np.ndarray  # aligned with region
    distances: np.ndarray  # [center, region position]
    pred_sets: list[dict[int, list[int]]]  # per center: region position -> predecessor positions

    @property
    def n(self) -> int:
        return len(self.region)

    @property
    def z(self) -> int:
        return len(self.centers)

    def var(self, i: int, j: int) -> int:
        return i * self.n + j


@dataclass
class PartitionResult:
    assignment: dict[int, int]  # block -> center block
    subregions: list[frozenset[int]]  # aligned with centers
    objective: float
    seconds: float = 0.0
    nodes: int = 0
    stats: dict = field(default_factory=dict)


def build_pred_sets(graph: AdjacencyGraph, region, center: int, distances=None) -> dict[int, list[int]]:
    """Neighbors of each block strictly closer to ``center`` within the region.

    Keys and values are block ids; the center itself gets no entry.
    """
    region = np.asarray(sorted(int(b) for b in region), dtype=int)
    if distances is None:
        distances = region_distance_table(graph, region, [center])[0]
    pos = {int(b): i for i, b in enumerate(region)}
    if np.any(np.isinf(distances)):
        raise ValueError("region is not connected: some blocks are unreachable from the center")
    out = {}
    for j, b in enumerate(region):
        if b == center:
            continue
        out[int(b)] = [nb for nb in graph.neighbors[b] if nb in pos and distances[pos[nb]] < distances[j]]
    return out


def make_instance(graph: AdjacencyGraph, region, centers, capacities, alpha: float, epsilon: float,
                  ideal_population: float) -> PartitionInstance:
    region = np.asarray(sorted(int(b) for b in region), dtype=int)
    centers = [int(c) for c in centers]
    if len(set(centers)) != len(centers):
        raise ValueError("centers must be distinct")
    pos = {int(b): i for i, b in enumerate(region)}
    dist = region_distance_table(graph, region, centers)
    preds = []
    for i, c in enumerate(centers):
        sets = build_pred_sets(graph, region, c, dist[i])
        preds.append({pos[b]: [pos[k] for k in ks] for b, ks in sets.items()})
    return PartitionInstance(region, centers, list(capacities), alpha, epsilon, ideal_population,
                             graph.population[region], dist, preds)


def build_pip(inst: PartitionInstance) -> BinaryLinearProgram:
    """Variables x[i, j] (center i, region position j) laid out center-major."""
    n, z = inst.n, inst.z
    cost = np.zeros(n * z)
    for i in range(z):
        cost[i * n:(i + 1) * n] = inst.distances[i] ** inst.alpha * inst.population
    prog = BinaryLinearProgram(n * z, 0, cost)
    for j in range(n):
        prog.add_constraint({inst.var(i, j): 1.0 for i in range(z)}, "=", 1.0, f"assign_{j}")
    p_hat = inst.ideal_population
    for i in range(z):
        row = {inst.var(i, j): float(inst.population[j]) for j in range(n)}
        prog.add_constraint(row, "<=", p_hat * (inst.capacities[i] + inst.epsilon), f"pop_hi_{i}")
        prog.add_constraint(row, ">=", p_hat * (inst.capacities[i] - inst.epsilon), f"pop_lo_{i}")
    pos = {int(b): j for j, b in enumerate(inst.region)}
    for i, c in enumerate(inst.centers):
        prog.fix(inst.var(i, pos[c]), 1.0)
        for j in range(n):
            if j == pos[c]:
                continue
            row = {inst.var(i, k): 1.0 for k in inst.pred_sets[i][j]}
            row[inst.var(i, j)] = row.get(inst.var(i, j), 0.0) - 1.0
            prog.add_constraint(row, ">=", 0.0, f"tree_{i}_{j}")
    return prog


def decode(inst: PartitionInstance, x: np.ndarray) -> dict[int, int]:
    x = np.round(np.asarray(x)[: inst.n * inst.z]).reshape(inst.z, inst.n)
    owner = np.argmax(x, axis=0)
    return {int(b): inst.centers[int(owner[j])] for j, b in enumerate(inst.region)}


def dispersion(inst: PartitionInstance, assignment: dict[int, int]) -> float:
    """Objective recomputed directly from an assignment."""
    idx = {c: i for i, c in enumerate(inst.centers)}
    total = 0.0
    for j, b in enumerate(inst.region):
        i = idx[assignment[int(b)]]
        total += inst.distances[i, j] ** inst.alpha * inst.population[j]
    return total


def solve_partition(graph: AdjacencyGraph, region, centers, capacities, alpha: float, epsilon: float,
                    ideal_population: float, backend: str = "bnb", node_limit: int | None = None,
                    time_limit: float | None = None) -> PartitionResult | None:
    """Optimal partition of ``region``, or ``None`` if the PIP is infeasible.

    Raises :class:`SolverLimitError` if a cap stops the search first.
    """
    start = time.perf_counter()
    inst = make_instance(graph, region, centers, capacities, alpha, epsilon, ideal_population)
    prog = build_pip(inst)
    out = solve_exact(prog, node_limit=node_limit, time_limit=time_limit, backend=backend)
    if out.status == "infeasible":
        return None
    if out.status == "limit":
        raise SolverLimitError(f"partition search stopped after {out.nodes} nodes")
    assignment = decode(inst, out.x)
    subregions = [frozenset(b for b, c in assignment.items() if c == center) for center in inst.centers]
    lo_hi = [(ideal_population * (s - epsilon), ideal_population * (s + epsilon)) for s in inst.capacities]
    for sub, (lo, hi) in zip(subregions, lo_hi):
        pop = graph.population[list(sub)].sum()
        if not (lo - 1e-6 <= pop <= hi + 1e-6):
            raise AssertionError("decoded subregion violates the population bounds")
        if not is_contiguous(graph, sub):
            raise AssertionError("decoded subregion is not contiguous")
    return PartitionResult(assignment, subregions, dispersion(inst, assignment),
                           time.perf_counter() - start, out.nodes,
                           {"variables": prog.num_vars, "constraints": len(prog.constraints)})

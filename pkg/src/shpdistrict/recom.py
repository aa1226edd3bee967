"""Recombination Markov chain: merge two adjacent districts, draw a uniform
spanning tree of the union, cut one balanced edge."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geo_graph import AdjacencyGraph, ProblemSpec, is_contiguous

TREE_RETRIES = 50


class ChainError(RuntimeError):
    pass


@dataclass
class ChainState:
    plan: tuple[frozenset, ...]
    step: int = 0
    accepted: int = 0
    rejected: int = 0


@dataclass
class ChainRun:
    plans: list[tuple[frozenset, ...]]
    distinct_districts: int
    distinct_plans: int
    accepted: int
    rejected: int
    districts: set = field(default_factory=set, repr=False)

    @property
    def leverage(self) -> float:
        return math.log10(self.distinct_plans / self.distinct_districts)


def plan_is_feasible(graph: AdjacencyGraph, plan, spec: ProblemSpec) -> bool:
    seen = set()
    for d in plan:
        if not d or seen & d:
            return False
        seen |= d
        if not spec.is_balanced(graph.region_population(d)) or not is_contiguous(graph, d):
            return False
    return len(seen) == graph.n and len(plan) == spec.k


def _adjacent_pairs(graph: AdjacencyGraph, plan) -> list[tuple[int, int]]:
    label = np.empty(graph.n, dtype=int)
    for i, d in enumerate(plan):
        label[list(d)] = i
    e = graph.edge_array()
    a, b = label[e[:, 0]], label[e[:, 1]]
    cross = a != b
    pairs = np.unique(np.sort(np.stack([a[cross], b[cross]], axis=1), axis=1), axis=0)
    return [tuple(map(int, p)) for p in pairs]


def wilson_tree(graph: AdjacencyGraph, region, rng: np.random.Generator) -> dict[int, int]:
    """Uniform spanning tree of the induced subgraph as a child -> parent map."""
    nodes = sorted(region)
    inside = set(nodes)
    nbrs = {u: [v for v in graph.neighbors[u] if v in inside] for u in nodes}
    root = nodes[rng.integers(len(nodes))]
    in_tree = {root}
    parent: dict[int, int] = {}
    for start in nodes:
        if start in in_tree:
            continue
        nxt = {}
        u = start
        while u not in in_tree:
            nb = nbrs[u]
            nxt[u] = nb[rng.integers(len(nb))]
            u = nxt[u]
        # retrace the loop-erased path
        u = start
        while u not in in_tree:
            parent[u] = nxt[u]
            in_tree.add(u)
            u = nxt[u]
    return parent


def balanced_cuts(graph: AdjacencyGraph, parent: dict[int, int], region, spec: ProblemSpec) -> list[int]:
    """Nodes v whose edge to parent[v] splits the tree into two balanced parts."""
    children: dict[int, list[int]] = {u: [] for u in region}
    root = None
    for u in region:
        if u in parent:
            children[parent[u]].append(u)
        else:
            root = u
    order, stack = [], [root]
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(children[u])
    sub = {}
    for u in reversed(order):
        sub[u] = graph.population[u] + sum(sub[c] for c in children[u])
    total = sub[root]
    return sorted(v for v in parent if spec.is_balanced(sub[v]) and spec.is_balanced(total - sub[v]))


def _split(parent: dict[int, int], region, cut: int) -> frozenset:
    children: dict[int, list[int]] = {}
    for u, p in parent.items():
        children.setdefault(p, []).append(u)
    side, stack = {cut}, [cut]
    while stack:
        u = stack.pop()
        for c in children.get(u, ()):
            side.add(c)
            stack.append(c)
    return frozenset(side)


def recom_step(graph: AdjacencyGraph, state: ChainState, spec: ProblemSpec, rng: np.random.Generator,
               max_pairs: int = 100) -> ChainState:
    """One recombination move; a step that finds no balanced cut keeps the plan."""
    pairs = _adjacent_pairs(graph, state.plan)
    if not pairs:
        raise ChainError("plan has no adjacent district pair")
    for _ in range(max_pairs):
        i, j = pairs[rng.integers(len(pairs))]
        merged = state.plan[i] | state.plan[j]
        for _ in range(TREE_RETRIES):
            parent = wilson_tree(graph, merged, rng)
            cuts = balanced_cuts(graph, parent, merged, spec)
            if cuts:
                a = _split(parent, merged, cuts[rng.integers(len(cuts))])
                plan = list(state.plan)
                plan[i], plan[j] = a, merged - a
                return ChainState(tuple(plan), state.step + 1, state.accepted + 1, state.rejected)
    return ChainState(state.plan, state.step + 1, state.accepted, state.rejected + 1)


def _canonical(plan) -> tuple:
    return tuple(sorted(tuple(sorted(d)) for d in plan))


def run_chain(graph: AdjacencyGraph, initial, steps: int, spec: ProblemSpec, seed: int = 0,
              district_budget: int | None = None) -> ChainRun:
    """Run ``steps`` moves, or stop early before the distinct-district count
    would pass ``district_budget``."""
    plan = tuple(frozenset(int(b) for b in d) for d in initial)
    if not plan_is_feasible(graph, plan, spec):
        raise ChainError("initial plan is infeasible")
    rng = np.random.default_rng(seed)
    state = ChainState(plan)
    plans = [plan]
    districts = set(plan)
    seen = {_canonical(plan)}
    for _ in range(steps):
        state = recom_step(graph, state, spec, rng)
        if district_budget is not None and len(districts | set(state.plan)) > district_budget:
            break
        plans.append(state.plan)
        districts.update(state.plan)
        seen.add(_canonical(state.plan))
    return ChainRun(plans, len(districts), len(seen), state.accepted, state.rejected, districts)


def snake_plan(width: int, height: int, k: int) -> tuple[frozenset, ...]:
    """Equal-size contiguous districts along a boustrophedon path of a grid."""
    order = []
    for r in range(height):
        cols = range(width) if r % 2 == 0 else range(width - 1, -1, -1)
        order.extend(r * width + c for c in cols)
    return tuple(frozenset(int(b) for b in chunk) for chunk in np.array_split(np.array(order), k))

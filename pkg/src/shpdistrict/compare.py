"""SHP versus recombination-chain ensembles at an equal budget of distinct
districts: expected seat share and cut edges per plan."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affiliation import AffiliationModel
from .geo_graph import AdjacencyGraph, ProblemSpec
from .metrics import boundary_edges, cut_edges
from .optimize import tree_dp
from .recom import run_chain
from .tree import SampleTree, count_plans, enumerate_plans, sample_plan


@dataclass
class MethodSample:
    method: str
    seat_share: np.ndarray
    cut_edges_mean: np.ndarray
    distinct_districts: int
    seat_range: tuple[float, float]

    @property
    def seat_span(self) -> float:
        return self.seat_range[1] - self.seat_range[0]


@dataclass
class Comparison:
    shp: MethodSample
    recom: MethodSample
    chain_steps: int
    notes: list[str] = field(default_factory=list)

    @property
    def shp_range_wider(self) -> bool:
        return self.shp.seat_span >= self.recom.seat_span - 1e-12

    def rows(self):
        for m in (self.shp, self.recom):
            for i, (s, c) in enumerate(zip(m.seat_share, m.cut_edges_mean)):
                yield [m.method, i, repr(float(s)), repr(float(c))]

    def summary(self) -> dict:
        return {
            "district_budget_shp": self.shp.distinct_districts,
            "district_budget_recom": self.recom.distinct_districts,
            "chain_steps": self.chain_steps,
            "shp_seat_range": list(self.shp.seat_range),
            "recom_seat_range": list(self.recom.seat_range),
            "shp_range_wider": self.shp_range_wider,
            "notes": self.notes,
        }


def shp_sample(tree: SampleTree, graph: AdjacencyGraph, model: AffiliationModel, n_samples: int = 2000,
               seed: int = 0) -> MethodSample:
    """All plans when there are at most ``n_samples``, else a uniform sample.

    The seat range is exact over every plan (tree dynamic program).
    """
    leaves = tree.leaf_index()
    k = tree.k
    if count_plans(tree) <= n_samples:
        plans = list(enumerate_plans(tree, n_samples))
    else:
        rng = np.random.default_rng(seed)
        plans = [sample_plan(tree, rng) for _ in range(n_samples)]
    seats = np.array([sum(model.win_probability(leaves[i].region) for i in p) / k for p in plans])
    cuts = np.array([cut_edges(graph, [leaves[i].region for i in p])[1] for p in plans])
    win = lambda leaf: model.win_probability(leaf.region)
    lo, hi = tree_dp(tree, win, "min")[0] / k, tree_dp(tree, win, "max")[0] / k
    distinct = len({leaf.region for leaf in tree.leaves()})
    return MethodSample("shp", seats, cuts, distinct, (lo, hi))


def compare_methods(tree: SampleTree, graph: AdjacencyGraph, model: AffiliationModel, spec: ProblemSpec,
                    max_steps: int = 100_000, n_samples: int = 2000, seed: int = 0) -> Comparison:
    """Run a chain from the most compact SHP plan until it has generated as
    many distinct districts as the SHP tree holds."""
    shp = shp_sample(tree, graph, model, n_samples, seed)
    leaves = tree.leaf_index()
    half = lambda leaf: boundary_edges(graph, leaf.region) / 2
    _, start = tree_dp(tree, half, "min")
    initial = [leaves[i].region for i in start]
    run = run_chain(graph, initial, max_steps, spec, seed=seed, district_budget=shp.distinct_districts)
    seen, plans = set(), []
    for p in run.plans:
        key = frozenset(p)
        if key not in seen:
            seen.add(key)
            plans.append(p)
    k = spec.k
    seats = np.array([sum(model.win_probability(d) for d in p) / k for p in plans])
    cuts = np.array([cut_edges(graph, p)[1] for p in plans])
    recom = MethodSample("recom", seats, cuts, run.distinct_districts, (float(seats.min()), float(seats.max())))
    notes = []
    if len(run.plans) - 1 == max_steps:
        notes.append(f"chain stopped at {len(run.plans) - 1} steps with {run.distinct_districts} "
                     f"of {shp.distinct_districts} districts")
    return Comparison(shp, recom, len(run.plans) - 1, notes)

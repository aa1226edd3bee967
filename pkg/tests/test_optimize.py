import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shpdistrict.optimize import (MspInstance, MspResult, block_district_matrix, build_msp, objective_histogram,
                                  solve_all_msps, tree_dp)
from shpdistrict.solver import solve_exact
from shpdistrict.tree import DistrictColumn, collect_columns, enumerate_plans, tree_from_partitions

from helpers import random_tree


class StubModel:
    """Win probability looked up per block set; fixed target."""

    def __init__(self, win, target):
        self.win = win
        self.target = target

    def win_probability(self, blocks):
        return self.win[frozenset(blocks)]


def _stub_for(tree, rng, target=0.5):
    return StubModel({leaf.region: float(rng.random()) for leaf in tree.leaves()}, target)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.integers(1, 3), st.integers(1, 3))
def test_tree_dp_matches_enumeration(seed, k, w_root, w):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, k, w_root, w)
    cost = {leaf.leaf_id: float(rng.normal()) for leaf in t.leaves()}
    values = [sum(cost[i] for i in p) for p in enumerate_plans(t)]
    lo, plan_lo = tree_dp(t, cost, "min")
    hi, plan_hi = tree_dp(t, cost, "max")
    assert lo == pytest.approx(min(values), abs=1e-9)
    assert hi == pytest.approx(max(values), abs=1e-9)
    assert sum(cost[i] for i in plan_lo) == pytest.approx(lo, abs=1e-12)
    assert tuple(plan_hi) in set(enumerate_plans(t))


def test_tree_dp_callable_and_bad_sense():
    t = random_tree(np.random.default_rng(0), 3, 2, 1)
    v, _ = tree_dp(t, lambda leaf: len(leaf.region))
    assert v == len(t.root.region)
    with pytest.raises(ValueError):
        tree_dp(t, lambda leaf: 0.0, "median")


def test_block_district_matrix():
    cols = [DistrictColumn(0, frozenset({0, 1}), 0), DistrictColumn(1, frozenset({2}), 0)]
    a = block_district_matrix(cols, 4).toarray()
    assert a.tolist() == [[1, 0], [1, 0], [0, 1], [0, 0]]
    with pytest.raises(ValueError):
        block_district_matrix([], 3)


def test_msp_picks_smaller_absolute_sum():
    # two plans over four blocks: one has sum(c) = -0.4, the other +0.1
    cols = [DistrictColumn(0, frozenset({0, 1}), 0), DistrictColumn(1, frozenset({2, 3}), 0),
            DistrictColumn(2, frozenset({0, 2}), 0), DistrictColumn(3, frozenset({1, 3}), 0)]
    inst = MspInstance(cols, [-0.3, -0.1, 0.25, -0.15], 2, frozenset(range(4)))
    out = solve_exact(build_msp(inst))
    assert out.objective == pytest.approx(0.1, abs=1e-9)
    assert out.x[:4].round().tolist() == [0, 0, 1, 1]


def test_msp_cardinality_row_matters():
    # a 1-column cover exists, but exactly k=2 columns are required
    cols = [DistrictColumn(0, frozenset({0, 1}), 0), DistrictColumn(1, frozenset({0}), 0),
            DistrictColumn(2, frozenset({1}), 0)]
    inst = MspInstance(cols, [0.0, 0.4, 0.3], 2, frozenset({0, 1}))
    out = solve_exact(build_msp(inst))
    assert out.objective == pytest.approx(0.7)
    prog = build_msp(inst)
    assert "cardinality" in prog.row_names


def test_msp_instance_validation():
    with pytest.raises(ValueError):
        MspInstance([DistrictColumn(0, frozenset({0}), 0)], [0.1, 0.2], 1, frozenset({0}))
    inst = MspInstance([DistrictColumn(0, frozenset({0}), 0)], [0.1], 1, frozenset({0, 1}))
    assert inst.uncovered() == {1}


def _exact_cover_oracle(cols, costs, k, blocks):
    best = None
    for sub in itertools.combinations(range(len(cols)), k):
        covered = [b for j in sub for b in cols[j].blocks]
        if len(covered) == len(blocks) and set(covered) == set(blocks):
            v = abs(sum(costs[j] for j in sub))
            best = v if best is None else min(best, v)
    return best


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 5), st.integers(1, 3), st.integers(1, 3))
def test_msps_match_cover_oracle_and_enumeration(seed, k, w_root, w):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, k, w_root, w)
    cols = collect_columns(t)
    model = _stub_for(t, rng, target=float(rng.uniform(0.3, 0.7)))
    results = solve_all_msps(t, cols, model, include_trivial=True)
    by_root = cols.by_root()
    for res in results:
        root_cols = by_root[res.root_index]
        costs = [model.target - model.win_probability(c.blocks) for c in root_cols]
        oracle = _exact_cover_oracle(root_cols, costs, k, t.root.region)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(oracle, abs=1e-9)
        # enumeration inside this root subtree: random shuffles leave no cross-sample covers
        sub = tree_from_partitions(t.root.region, k)
        sub.root.partitions = [t.root.partitions[res.root_index]]
        sub.root.status = "complete"
        enum = min(abs(sum(model.target - model.win_probability(leaf.region)
                           for leaf in (t.leaf_index()[i] for i in p)))
                   for p in enumerate_plans(sub))
        assert res.objective == pytest.approx(enum, abs=1e-9)
        assert sorted(set().union(*(cols.columns[c].blocks for c in res.columns))) == sorted(t.root.region)
        assert res.expected_seats == pytest.approx(
            sum(model.win_probability(cols.columns[c].blocks) for c in res.columns))


def test_trivial_roots_skipped_by_default():
    t = tree_from_partitions(range(4), 2)
    t.root.add_partition([({0, 1}, 1), ({2, 3}, 1)])
    t.finalize()
    model = StubModel({frozenset({0, 1}): 0.2, frozenset({2, 3}): 0.9}, 0.5)
    assert solve_all_msps(t, collect_columns(t), model)[0].status == "skipped"
    res = solve_all_msps(t, collect_columns(t), model, include_trivial=True)[0]
    assert res.objective == pytest.approx(abs(2 * 0.5 - 1.1))


def test_extra_constraints_restrict_columns():
    t = random_tree(np.random.default_rng(7), 2, 1, 1)
    # forbid every column of the only root: the MSP becomes infeasible
    cols = collect_columns(t)
    model = _stub_for(t, np.random.default_rng(1))
    extra = lambda cs: [({j: 1.0 for j in range(len(cs))}, "=", 0.0)]
    res = solve_all_msps(t, cols, model, include_trivial=True, extra=extra)
    assert res[0].status == "infeasible"


def test_objective_histogram():
    rs = [MspResult(0, "optimal", 0.05), MspResult(1, "optimal", 0.1), MspResult(2, "optimal", 0.25),
          MspResult(3, "infeasible")]
    h = objective_histogram(rs)
    assert h["n"] == 3
    assert h["within"] == pytest.approx(2 / 3)
    assert sum(h["counts"]) == 3
    assert h["bins"][0] == 0.0
    assert objective_histogram([MspResult(0, "limit")])["n"] == 0

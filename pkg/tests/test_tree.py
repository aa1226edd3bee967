import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shpdistrict.centers import CenterConfig
from shpdistrict.geo_graph import ProblemSpec, grid_graph, is_contiguous
from shpdistrict.tree import (PlanLimitError, TreeConfig, TreeError, collect_columns, count_plans, enumerate_plans,
                              generate_tree, leverage, prune_tree, sample_plan, tree_from_dict,
                              tree_from_partitions, tree_to_dict)

from helpers import plan_regions, random_tree, weighted_grid


def _brute_count(node):
    """Independent recursive count over explicit plan sets."""
    if node.is_leaf:
        return {(node.leaf_id,)}
    out = set()
    for part in node.partitions:
        combos = [()]
        for child in part:
            combos = [c + p for c in combos for p in _brute_count(child)]
        out.update(tuple(sorted(c)) for c in combos)
    return out


def test_two_leaf_tree():
    t = tree_from_partitions(range(4), 2)
    t.root.add_partition([({0, 1}, 1), ({2, 3}, 1)])
    t.root.add_partition([({0, 2}, 1), ({1, 3}, 1)])
    t.finalize()
    assert count_plans(t) == 2
    assert sorted(enumerate_plans(t)) == [(0, 1), (2, 3)]
    assert leverage(t) == pytest.approx(math.log10(2 / 4))


def test_add_partition_validation():
    t = tree_from_partitions(range(4), 2)
    with pytest.raises(TreeError):
        t.root.add_partition([({0, 1}, 1), ({2}, 1)])
    with pytest.raises(TreeError):
        t.root.add_partition([({0, 1}, 1), ({2, 3}, 2)])
    with pytest.raises(TreeError):
        t.root.add_partition([({0, 1, 2}, 1), ({2, 3}, 1)])


def test_counting_requires_complete_nodes():
    t = tree_from_partitions(range(4), 2)
    with pytest.raises(TreeError):
        count_plans(t.finalize())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.integers(1, 3), st.integers(1, 3))
def test_count_matches_enumeration(seed, k, w_root, w):
    t = random_tree(np.random.default_rng(seed), k, w_root, w)
    n = count_plans(t)
    plans = list(enumerate_plans(t))
    assert len(plans) == n
    assert len({tuple(sorted(p)) for p in plans}) == n == len(_brute_count(t.root))
    for p in plans:
        assert len(p) == k
        regions = plan_regions(t, p)
        assert frozenset().union(*regions) == t.root.region
        assert sum(map(len, regions)) == len(t.root.region)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 9), st.integers(1, 3), st.integers(2, 4))
def test_theorem_bounds(seed, k, w, z):
    t = random_tree(np.random.default_rng(seed), k, w, w, z_max=z)
    p = count_plans(t)
    lo = w ** ((k - 1) / (z - 1))
    assert lo - 1e-9 <= p <= w ** (k - 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 9), st.integers(1, 3))
def test_binary_upper_bound_is_tight(seed, k, w):
    t = random_tree(np.random.default_rng(seed), k, w, w, binary=True)
    assert count_plans(t) == w ** (k - 1)


def test_big_counts_are_exact_integers():
    t = random_tree(np.random.default_rng(1), 40, 2, 2, binary=True, unit=1)
    assert count_plans(t) == 2 ** 39
    assert isinstance(count_plans(t), int)


def test_enumeration_limit():
    t = random_tree(np.random.default_rng(0), 6, 3, 3, binary=True)
    with pytest.raises(PlanLimitError):
        enumerate_plans(t, limit=10)


def test_sample_plan_is_uniform():
    rng = np.random.default_rng(3)
    t = random_tree(rng, 4, 2, 2, z_max=3)
    plans = [tuple(sorted(p)) for p in enumerate_plans(t)]
    n = len(plans)
    draws = 20_000
    counts = {p: 0 for p in plans}
    for _ in range(draws):
        counts[tuple(sorted(sample_plan(t, rng)))] += 1
    freq = np.array(list(counts.values())) / draws
    assert np.all(np.abs(freq - 1 / n) < 0.02)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 6), st.integers(1, 10))
def test_prune_reaches_target_and_keeps_valid_plans(seed, k, target):
    t = random_tree(np.random.default_rng(seed), k, 3, 2)
    before = set(map(tuple, map(sorted, enumerate_plans(t))))
    pruned = prune_tree(t, target)
    after = set(map(tuple, map(sorted, enumerate_plans(pruned))))
    assert after <= before
    assert count_plans(pruned) <= max(target, 1) or all(len(n.partitions) == 1 for n in pruned.internal_nodes())
    assert count_plans(t) == len(before)  # the input tree is untouched
    assert all(n.partitions for n in pruned.internal_nodes())


def test_prune_already_small():
    t = random_tree(np.random.default_rng(2), 3, 1, 1)
    assert count_plans(prune_tree(t, 5)) == count_plans(t) == 1


def test_collect_columns_dedup_within_root_only():
    t = tree_from_partitions(range(6), 3)
    a, _ = t.root.add_partition([({0, 1}, 1), ({2, 3, 4, 5}, 2)])
    b, _ = t.root.add_partition([({0, 1}, 1), ({2, 3, 4, 5}, 2)])
    rest_a = t.root.partitions[0][1]
    rest_a.add_partition([({2, 3}, 1), ({4, 5}, 1)])
    rest_a.add_partition([({2, 3}, 1), ({4, 5}, 1)])
    t.root.partitions[1][1].add_partition([({2, 3}, 1), ({4, 5}, 1)])
    t.finalize()
    cols = collect_columns(t)
    # leaves: root 0 has 5 leaves and 3 distinct sets; root 1 has 3 leaves, all distinct
    assert len(t.leaves()) == 8
    assert len(cols.columns) == 6
    assert cols.duplicate_rate == pytest.approx(1 - 6 / 8)
    assert sorted(len(c) for c in cols.by_root().values()) == [3, 3]
    for plan in enumerate_plans(t):
        assert len(set(cols.plan_columns(plan))) == 3


def test_serialization_round_trip():
    t = random_tree(np.random.default_rng(4), 5, 2, 2)
    back = tree_from_dict(tree_to_dict(t)).finalize()
    assert count_plans(back) == count_plans(t)
    assert sorted(enumerate_plans(back)) == sorted(enumerate_plans(t))
    assert [leaf.region for leaf in back.leaves()] == [leaf.region for leaf in t.leaves()]


def test_config_validation():
    with pytest.raises(ValueError):
        TreeConfig(w_root=0)
    with pytest.raises(ValueError):
        TreeConfig(w_root=4, w=2, max_samples=3)
    assert TreeConfig(width_by_capacity={"2": "5"}).width(2, False) == 5
    assert TreeConfig(w_root=7, w=2).width(4, True) == 7


def _check_generated(graph, spec, tree):
    lo, hi = spec.district_bounds()
    for leaf in tree.leaves():
        pop = graph.population[list(leaf.region)].sum()
        assert lo - 1e-6 <= pop <= hi + 1e-6
        assert is_contiguous(graph, leaf.region)
    for plan in enumerate_plans(tree, limit=10 ** 4):
        regions = plan_regions(tree, plan)
        assert frozenset().union(*regions) == frozenset(range(graph.n))
        assert sum(map(len, regions)) == graph.n


def test_generate_height_one():
    g = weighted_grid(4, 4, seed=1)
    spec = ProblemSpec(2, 0.2, g.total_population)
    t = generate_tree(g, spec, TreeConfig(w_root=3, w=1, seed=0))
    assert 1 <= len(t.root.partitions) <= 3
    assert count_plans(t) == len(t.root.partitions)
    assert t.partition_problems_solved == len(t.root.partitions)
    _check_generated(g, spec, t)


def test_generate_deeper_tree_and_determinism():
    g = grid_graph(6, 4)
    spec = ProblemSpec(4, 0.1, g.total_population)
    cfg = TreeConfig(w_root=2, w=2, seed=5, centers=CenterConfig(z_max=2))
    a = generate_tree(g, spec, cfg)
    b = generate_tree(g, spec, cfg)
    _check_generated(g, spec, a)
    assert tree_to_dict(a) == tree_to_dict(b)
    assert count_plans(a) >= 1
    solved = [r for r in a.records if r.status in ("feasible", "infeasible", "limit", "invalid")]
    assert 0 <= a.infeasible_rate <= 1 and len(solved) >= a.partition_problems_solved


def test_generate_worker_count_independent():
    g = grid_graph(6, 4)
    spec = ProblemSpec(4, 0.1, g.total_population)
    cfg = TreeConfig(w_root=3, w=2, seed=2, centers=CenterConfig(z_max=2))
    assert tree_to_dict(generate_tree(g, spec, cfg, workers=1)) == tree_to_dict(generate_tree(g, spec, cfg, workers=3))

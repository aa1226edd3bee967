"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from shpdistrict.affiliation import ElectionReturns
from shpdistrict.geo_graph import AdjacencyGraph, Block, grid_graph
from shpdistrict.tree import SampleTree, tree_from_partitions


def path_graph(populations, xs=None) -> AdjacencyGraph:
    n = len(populations)
    xs = list(range(n)) if xs is None else xs
    blocks = [Block(i, populations[i], float(xs[i]), 0.0, 1.0) for i in range(n)]
    return AdjacencyGraph(blocks, [(i, i + 1) for i in range(n - 1)])


def weighted_grid(width, height, seed=0, lo=1, hi=5) -> AdjacencyGraph:
    rng = np.random.default_rng(seed)
    return grid_graph(width, height, rng.integers(lo, hi + 1, size=width * height))


def returns_for(graph, shares) -> ElectionReturns:
    shares = np.asarray(shares, dtype=float)
    if shares.ndim == 1:
        shares = shares[None, :]
    return ElectionReturns([f"e{i}" for i in range(len(shares))], shares, graph.population)


def compositions(s, z):
    """All ordered tuples of z positive integers summing to s."""
    for cuts in itertools.combinations(range(1, s), z - 1):
        bounds = (0, *cuts, s)
        yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def random_tree(rng, k, w_root, w, z_max=3, unit=2, binary=False) -> SampleTree:
    """Abstract tree over ``unit * k`` blocks; every sample is a fresh random
    shuffle so partitions are distinct with overwhelming probability."""
    blocks = list(range(unit * k))
    tree = tree_from_partitions(blocks, k)

    def grow(node, width):
        if node.capacity == 1:
            return
        for _ in range(width):
            s = node.capacity
            z = 2 if binary else int(rng.integers(2, min(s, z_max) + 1))
            caps = list(compositions(s, z))
            cap = caps[int(rng.integers(len(caps)))]
            order = [int(b) for b in rng.permutation(sorted(node.region))]
            pieces, start = [], 0
            for c in cap:
                pieces.append((order[start:start + c * unit], c))
                start += c * unit
            node.add_partition(pieces)
        for part in node.partitions:
            for child in part:
                grow(child, w)

    grow(tree.root, w_root)
    return tree.finalize()


def plan_regions(tree, plan):
    leaves = tree.leaf_index()
    return [leaves[i].region for i in plan]


def union_find_contiguous(graph, region) -> bool:
    region = sorted(region)
    parent = {b: b for b in region}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    inside = set(region)
    for u, v in graph.edges:
        if u in inside and v in inside:
            parent[find(u)] = find(v)
    return len({find(b) for b in region}) == 1

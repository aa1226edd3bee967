"""Stochastic hierarchical partitioning sample tree.

A node ``(R, s)`` holds a region and the number of districts it must
host. Every sampled partition of a node splits it into child nodes whose
capacities sum to ``s``; leaves (``s == 1``) are the generated districts.
"""

from __future__ import annotations

import copy
import itertools
import math
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .centers import (CenterConfig, assign_capacities, capacity_weights, sample_capacities,
                      sample_split_size, select_centers)
from .geo_graph import AdjacencyGraph, ProblemSpec
from .partition import epsilon_schedule, solve_partition
from .solver import SolverLimitError


class TreeError(RuntimeError):
    pass


class NoFeasibleRootError(TreeError):
    pass


class PlanLimitError(TreeError):
    pass


@dataclass
class TreeConfig:
    w_root: int = 100
    w: int = 3
    max_samples: int | None = None  # per node; None means 5 * width
    seed: int = 0
    centers: CenterConfig = field(default_factory=CenterConfig)
    width_by_capacity: dict[int, int] = field(default_factory=dict)
    distinct_samples: bool = False
    pip_backend: str = "highs"
    node_limit: int | None = None
    time_limit: float | None = None

    def __post_init__(self):
        if self.w_root < 1 or self.w < 1:
            raise ValueError("sample widths must be >= 1")
        if self.max_samples is not None and self.max_samples < max(self.w, self.w_root):
            raise ValueError("max_samples must be at least the sample width")
        self.width_by_capacity = {int(k): int(v) for k, v in self.width_by_capacity.items()}

    def width(self, capacity: int, is_root: bool) -> int:
        if capacity in self.width_by_capacity:
            return self.width_by_capacity[capacity]
        return self.w_root if is_root else self.w

    def attempts(self, width: int) -> int:
        return max(self.max_samples or 5 * width, width)


@dataclass(eq=False)
class SampleTreeNode:
    region: frozenset
    capacity: int
    path: tuple = ()
    partitions: list = field(default_factory=list)
    status: str = "open"
    leaf_id: int | None = None
    parent: "SampleTreeNode | None" = field(default=None, repr=False)
    n_plans: int | None = None
    attempts: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.capacity == 1

    def add_partition(self, children) -> list["SampleTreeNode"]:
        """Attach a sampled partition given as ``(region, capacity)`` pairs."""
        k = len(self.partitions)
        nodes = [SampleTreeNode(frozenset(int(b) for b in r), int(s), self.path + (k, j), parent=self)
                 for j, (r, s) in enumerate(children)]
        if sum(n.capacity for n in nodes) != self.capacity:
            raise TreeError("child capacities must sum to the parent capacity")
        union = frozenset().union(*(n.region for n in nodes))
        if union != self.region or sum(len(n.region) for n in nodes) != len(self.region):
            raise TreeError("child regions must partition the parent region")
        self.partitions.append(nodes)
        return nodes

    def walk(self) -> Iterator["SampleTreeNode"]:
        """Breadth-first traversal of live nodes."""
        queue = deque([self])
        while queue:
            node = queue.popleft()
            yield node
            for part in node.partitions:
                queue.extend(part)


@dataclass
class AttemptRecord:
    path: tuple
    capacity: int
    n_blocks: int
    z: int
    status: str  # feasible | infeasible | limit | invalid | duplicate | too-small
    seconds: float


@dataclass
class SampleTree:
    root: SampleTreeNode
    k: int
    records: list[AttemptRecord] = field(default_factory=list)

    def nodes(self) -> list[SampleTreeNode]:
        return list(self.root.walk())

    def leaves(self) -> list[SampleTreeNode]:
        return sorted((n for n in self.root.walk() if n.is_leaf), key=lambda n: n.leaf_id)

    def internal_nodes(self) -> list[SampleTreeNode]:
        return [n for n in self.root.walk() if not n.is_leaf]

    def finalize(self) -> "SampleTree":
        """Mark nodes complete, number leaves depth-first and refresh plan counts."""
        counter = itertools.count()

        def visit(node):
            if node.is_leaf:
                node.status = "complete"
                node.leaf_id = next(counter)
                return
            if node.partitions:
                node.status = "complete"
            for part in node.partitions:
                for child in part:
                    child.parent = node
                    visit(child)

        visit(self.root)
        refresh_counts(self.root)
        return self

    def leaf_index(self) -> dict[int, SampleTreeNode]:
        return {n.leaf_id: n for n in self.root.walk() if n.is_leaf}

    @property
    def partition_problems_solved(self) -> int:
        return sum(r.status == "feasible" for r in self.records)

    @property
    def infeasible_rate(self) -> float:
        solved = [r for r in self.records if r.status in ("feasible", "infeasible", "limit", "invalid")]
        return sum(r.status != "feasible" for r in solved) / len(solved) if solved else 0.0


def tree_from_partitions(region, k: int) -> SampleTree:
    """Empty tree for hand-built fixtures; add partitions, then ``finalize()``."""
    return SampleTree(SampleTreeNode(frozenset(int(b) for b in region), k), k)


# --------------------------------------------------------------------------
# Generation

def _rng(seed: int, path: tuple, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path) + (attempt,)))


def _attempt(graph: AdjacencyGraph, node: SampleTreeNode, spec: ProblemSpec, config: TreeConfig,
             rng: np.random.Generator):
    cc = config.centers
    s = node.capacity
    region = sorted(node.region)
    p_hat = spec.ideal_population
    z = sample_split_size(s, cc, rng)
    sampled = sample_capacities(s, z, cc, rng)
    if len(region) < z:
        return z, "too-small", None
    if cc.method == "random-iterative":
        centers = select_centers(graph, region, z, cc, rng, capacities=sampled, ideal_population=p_hat)
        caps = sampled
    else:
        centers = select_centers(graph, region, z, cc, rng)
        w = capacity_weights(graph, region, centers, cc.weight_kind, p_hat)
        caps = assign_capacities(w, sampled, cc.capacity_mode)
    alpha = float(rng.uniform(1.0, 2.0))
    eps = epsilon_schedule(spec.epsilon_p, s)
    try:
        res = solve_partition(graph, region, centers, caps, alpha, eps, p_hat, backend=config.pip_backend,
                              node_limit=config.node_limit, time_limit=config.time_limit)
    except SolverLimitError:
        return z, "limit", None
    except AssertionError:
        return z, "invalid", None
    if res is None:
        return z, "infeasible", None
    return z, "feasible", list(zip(res.subregions, caps))


def _expand(graph, node: SampleTreeNode, spec, config, records: list, is_root: bool) -> None:
    width = config.width(node.capacity, is_root)
    seen = set()
    for attempt in range(config.attempts(width)):
        if len(node.partitions) >= width:
            break
        node.attempts += 1
        t0 = time.perf_counter()
        z, status, children = _attempt(graph, node, spec, config, _rng(config.seed, node.path, attempt))
        if status == "feasible":
            key = frozenset(r for r, _ in children)
            if config.distinct_samples and key in seen:
                status = "duplicate"
            else:
                seen.add(key)
                node.add_partition(children)
        records.append(AttemptRecord(node.path, node.capacity, len(node.region), z, status,
                                     time.perf_counter() - t0))
    node.status = "complete" if node.partitions else "failed"


def _kill(node: SampleTreeNode) -> None:
    for n in node.walk():
        n.status = "pruned"


def _propagate_failure(node: SampleTreeNode, stop: SampleTreeNode) -> bool:
    """Drop the partition containing a failed node, walking upward as needed.

    Returns True if the failure reached ``stop`` (the shard's top).
    """
    while node is not stop:
        parent = node.parent
        for i, part in enumerate(parent.partitions):
            if any(c is node for c in part):
                for c in part:
                    _kill(c)
                del parent.partitions[i]
                break
        if parent.partitions:
            return False
        parent.status = "failed"
        node = parent
    return True


def _grow(graph, spec, config, top: SampleTreeNode) -> tuple[SampleTreeNode, list[AttemptRecord], bool]:
    """Breadth-first expansion of every open node under ``top`` (already expanded)."""
    records: list[AttemptRecord] = []
    queue = deque(c for part in top.partitions for c in part)
    while queue:
        node = queue.popleft()
        if node.status == "pruned":
            continue
        if node.is_leaf:
            node.status = "complete"
            continue
        _expand(graph, node, spec, config, records, is_root=False)
        if node.status == "failed":
            if _propagate_failure(node, top):
                return top, records, False
            continue
        for part in node.partitions:
            queue.extend(part)
    return top, records, True


def _grow_shard(args):
    graph, spec, config, top = args
    return _grow(graph, spec, config, top)


def generate_tree(graph: AdjacencyGraph, spec: ProblemSpec, config: TreeConfig, workers: int = 1) -> SampleTree:
    """Sample the root, then grow each root partition's subtree independently.

    Subtree randomness depends only on (seed, node path), so results do not
    depend on ``workers``.
    """
    root = SampleTreeNode(frozenset(range(graph.n)), spec.k)
    records: list[AttemptRecord] = []
    _expand(graph, root, spec, config, records, is_root=True)
    if not root.partitions:
        raise NoFeasibleRootError("no feasible root partition")
    shards = []
    for part in root.partitions:
        top = SampleTreeNode(root.region, root.capacity, root.path, partitions=[part])
        for c in part:
            c.parent = top
        shards.append(top)
    if workers > 1 and len(shards) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_grow_shard, [(graph, spec, config, t) for t in shards]))
    else:
        results = [_grow(graph, spec, config, t) for t in shards]
    kept = []
    for top, recs, ok in results:
        records.extend(recs)
        if ok:
            kept.append(top.partitions[0])
    if not kept:
        raise NoFeasibleRootError("every root partition failed further down the tree")
    root.partitions = kept
    for part in kept:
        for c in part:
            c.parent = root
    return SampleTree(root, spec.k, records).finalize()


# --------------------------------------------------------------------------
# Counting, enumeration, pruning

def _count(node: SampleTreeNode) -> int:
    if node.is_leaf:
        return 1
    if node.status in ("open", "failed", "pruned") or not node.partitions:
        raise TreeError(f"node {node.path} is {node.status}; plans are only counted on complete nodes")
    return sum(math.prod(c.n_plans for c in part) for part in node.partitions)


def refresh_counts(node: SampleTreeNode) -> int:
    for part in node.partitions:
        for c in part:
            refresh_counts(c)
    node.n_plans = _count(node)
    return node.n_plans


def count_plans(node) -> int:
    """Exact number of plans expressible by the subtree (arbitrary precision)."""
    if isinstance(node, SampleTree):
        node = node.root
    return refresh_counts(node)


def leverage(tree: SampleTree) -> float:
    distinct = len({leaf.region for leaf in tree.leaves()})
    return math.log10(count_plans(tree.root)) - math.log10(distinct)


def _plans(node: SampleTreeNode) -> Iterator[tuple[int, ...]]:
    if node.is_leaf:
        yield (node.leaf_id,)
        return
    for part in node.partitions:
        for combo in itertools.product(*(list(_plans(c)) for c in part)):
            yield tuple(itertools.chain.from_iterable(combo))


def enumerate_plans(tree, limit: int = 10 ** 6) -> Iterator[tuple[int, ...]]:
    """Lazily yield every plan as a tuple of leaf ids."""
    node = tree.root if isinstance(tree, SampleTree) else tree
    total = count_plans(node)
    if total > limit:
        raise PlanLimitError(f"tree expresses {total} plans (> {limit}); prune it first")
    return _plans(node)


def sample_plan(tree, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one plan uniformly from those the tree expresses."""
    node = tree.root if isinstance(tree, SampleTree) else tree
    count_plans(node)

    def draw(n: SampleTreeNode) -> tuple[int, ...]:
        if n.is_leaf:
            return (n.leaf_id,)
        w = np.array([float(math.prod(c.n_plans for c in part)) for part in n.partitions])
        part = n.partitions[rng.choice(len(w), p=w / w.sum())]
        return tuple(itertools.chain.from_iterable(draw(c) for c in part))

    return draw(node)


def prune_tree(tree: SampleTree, target_size: int) -> SampleTree:
    """Drop trailing samples, smallest capacities first, until P(root) <= target.

    Nodes always keep at least one sample. Returns a pruned copy.
    """
    out = copy.deepcopy(tree)
    root = out.root
    refresh_counts(root)
    size = 2
    while root.n_plans > target_size and size <= out.k:
        for node in [n for n in root.walk() if n.capacity == size and not n.is_leaf]:
            if root.n_plans <= target_size:
                break
            if len(node.partitions) > 1:
                for c in node.partitions[-1]:
                    _kill(c)
                node.partitions.pop()
                _recount_upward(node)
        if all(len(n.partitions) == 1 for n in root.walk() if n.capacity == size and not n.is_leaf):
            size += 1
    return out


def _recount_upward(node: SampleTreeNode) -> None:
    while node is not None:
        node.n_plans = _count(node)
        node = node.parent


# --------------------------------------------------------------------------
# Columns

@dataclass
class DistrictColumn:
    column_id: int
    blocks: frozenset
    root_index: int
    leaf_ids: list[int] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def bitset(self, n_blocks: int) -> np.ndarray:
        bits = np.zeros(n_blocks, dtype=bool)
        bits[list(self.blocks)] = True
        return bits


@dataclass
class ColumnSet:
    columns: list[DistrictColumn]
    leaf_to_column: dict[int, int]
    duplicate_rate: float

    def by_root(self) -> dict[int, list[DistrictColumn]]:
        out: dict[int, list[DistrictColumn]] = {}
        for c in self.columns:
            out.setdefault(c.root_index, []).append(c)
        return out

    def plan_columns(self, plan) -> list[int]:
        return [self.leaf_to_column[leaf] for leaf in plan]


def root_index_of(tree: SampleTree, node: SampleTreeNode) -> int:
    """Position of the root partition a node descends from."""
    top = node
    while top.parent is not None and top.parent is not tree.root:
        top = top.parent
    if top is tree.root:
        return -1
    for i, part in enumerate(tree.root.partitions):
        if any(c is top for c in part):
            return i
    raise TreeError("node is not attached to the tree")


def collect_columns(tree: SampleTree) -> ColumnSet:
    """Leaves hashed by block set; duplicates merge only within a root partition."""
    columns: list[DistrictColumn] = []
    leaf_to_column: dict[int, int] = {}
    index: dict[tuple[int, frozenset], int] = {}
    leaves = tree.leaves()
    for leaf in leaves:
        root_idx = root_index_of(tree, leaf)
        key = (root_idx, leaf.region)
        cid = index.get(key)
        if cid is None:
            cid = len(columns)
            index[key] = cid
            columns.append(DistrictColumn(cid, leaf.region, root_idx))
        columns[cid].leaf_ids.append(leaf.leaf_id)
        leaf_to_column[leaf.leaf_id] = cid
    dup = 1.0 - len(columns) / len(leaves) if leaves else 0.0
    return ColumnSet(columns, leaf_to_column, dup)


# --------------------------------------------------------------------------
# Serialization

def tree_to_dict(tree: SampleTree) -> dict:
    nodes = []
    for node in tree.root.walk():
        nodes.append({
            "path": list(node.path),
            "blocks": sorted(node.region),
            "capacity": node.capacity,
            "status": node.status,
            "leaf_id": node.leaf_id,
            "attempts": node.attempts,
            "partitions": [[list(c.path) for c in part] for part in node.partitions],
        })
    return {"k": tree.k, "nodes": nodes}


def tree_from_dict(data: dict) -> SampleTree:
    by_path = {}
    for rec in data["nodes"]:
        by_path[tuple(rec["path"])] = SampleTreeNode(
            frozenset(rec["blocks"]), rec["capacity"], tuple(rec["path"]), status=rec["status"],
            leaf_id=rec["leaf_id"], attempts=rec.get("attempts", 0))
    for rec in data["nodes"]:
        node = by_path[tuple(rec["path"])]
        for part in rec["partitions"]:
            children = [by_path[tuple(p)] for p in part]
            for c in children:
                c.parent = node
            node.partitions.append(children)
    root = by_path[()]
    tree = SampleTree(root, data["k"])
    refresh_counts(root)
    return tree

"""Block adjacency graph, distances, contiguity checks and instance I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .affiliation import ElectionReturns


class InstanceError(ValueError):
    """Raised when an instance file or graph fails validation."""


@dataclass(frozen=True)
class Block:
    id: int
    population: int
    x: float
    y: float
    area: float = 1.0


@dataclass(frozen=True)
class ProblemSpec:
    k: int
    epsilon_p: float
    total_population: float

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 0.0 < self.epsilon_p < 0.5:
            raise ValueError("epsilon_p must lie in (0, 0.5)")

    @property
    def ideal_population(self) -> float:
        return self.total_population / self.k

    def district_bounds(self) -> tuple[float, float]:
        p_hat = self.ideal_population
        return p_hat * (1 - self.epsilon_p), p_hat * (1 + self.epsilon_p)

    def is_balanced(self, population: float) -> bool:
        lo, hi = self.district_bounds()
        return lo - 1e-9 <= population <= hi + 1e-9


@dataclass
class AdjacencyGraph:
    """Undirected planar block graph.

    Blocks are indexed ``0..n-1``. ``synthetic`` holds the edges added by
    :func:`connect_components` so metrics can exclude them.
    """

    blocks: list[Block]
    edges: list[tuple[int, int]]
    synthetic: set[tuple[int, int]] = field(default_factory=set)

    def __post_init__(self):
        n = len(self.blocks)
        for i, b in enumerate(self.blocks):
            if b.id != i:
                raise InstanceError(f"block ids must be 0..{n - 1} without gaps (got {b.id} at {i})")
            if b.population < 0:
                raise InstanceError(f"block {i}: population must be nonnegative")
            if b.area < 0:
                raise InstanceError(f"block {i}: area must be nonnegative")
        seen = set()
        clean = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise InstanceError(f"self-loop on block {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InstanceError(f"edge ({u}, {v}) references unknown block")
            key = (min(u, v), max(u, v))
            if key in seen:
                continue
            seen.add(key)
            clean.append(key)
        self.edges = clean
        self.synthetic = {(min(u, v), max(u, v)) for u, v in self.synthetic}
        self.population = np.array([b.population for b in self.blocks], dtype=float)
        self.xy = np.array([(b.x, b.y) for b in self.blocks], dtype=float).reshape(n, 2)
        self.area = np.array([b.area for b in self.blocks], dtype=float)
        self.neighbors: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edges:
            self.neighbors[u].append(v)
            self.neighbors[v].append(u)
        for nb in self.neighbors:
            nb.sort()

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def total_population(self) -> float:
        return float(self.population.sum())

    def edge_array(self, include_synthetic: bool = True) -> np.ndarray:
        edges = self.edges if include_synthetic else [e for e in self.edges if e not in self.synthetic]
        return np.array(edges, dtype=int).reshape(-1, 2)

    def region_population(self, region: Iterable[int]) -> float:
        return float(self.population[list(region)].sum())


def euclidean_distance(graph: AdjacencyGraph, i: int, j: int) -> float:
    dx, dy = graph.xy[i] - graph.xy[j]
    return math.hypot(dx, dy)


def connect_components(graph: AdjacencyGraph) -> AdjacencyGraph:
    """Join components by the centroid-closest block pair until connected.

    At each round the two closest components (by minimum pairwise centroid
    distance) are joined through their closest block pair.
    """
    n = graph.n
    if n == 0:
        raise InstanceError("cannot connect an empty graph")
    edges = list(graph.edges)
    added: list[tuple[int, int]] = []
    while True:
        ncomp, labels = _components(n, edges)
        if ncomp == 1:
            break
        best = None
        for a in range(ncomp):
            ia = np.flatnonzero(labels == a)
            ib = np.flatnonzero(labels > a)
            if len(ib) == 0:
                continue
            d = np.linalg.norm(graph.xy[ia][:, None, :] - graph.xy[ib][None, :, :], axis=2)
            pos = np.unravel_index(np.argmin(d), d.shape)
            cand = (d[pos], min(ia[pos[0]], ib[pos[1]]), max(ia[pos[0]], ib[pos[1]]))
            if best is None or cand < best:
                best = cand
        _, u, v = best
        edges.append((int(u), int(v)))
        added.append((int(u), int(v)))
    if not added:
        return graph
    return AdjacencyGraph(list(graph.blocks), edges, set(graph.synthetic) | set(added))


def _components(n: int, edges) -> tuple[int, np.ndarray]:
    if edges:
        e = np.asarray(edges)
        m = csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    else:
        m = csr_matrix((n, n))
    return connected_components(m, directed=False)


def _induced(graph: AdjacencyGraph, region: np.ndarray) -> csr_matrix:
    index = {int(b): i for i, b in enumerate(region)}
    rows, cols, w = [], [], []
    for b in region:
        for nb in graph.neighbors[int(b)]:
            j = index.get(nb)
            if j is not None:
                rows.append(index[int(b)])
                cols.append(j)
                # zero weights would be dropped by the sparse format
                w.append(max(euclidean_distance(graph, int(b), nb), 1e-12))
    return csr_matrix((w, (rows, cols)), shape=(len(region), len(region)))


def shortest_path_distances(graph: AdjacencyGraph, region: Iterable[int], source) -> dict[int, float]:
    """Dijkstra distances from ``source`` inside the subgraph induced by ``region``.

    Edge weight is the centroid distance of the endpoints. Unreachable
    blocks map to ``inf``. ``source`` may be a single block id.
    """
    region = np.array(sorted(set(int(b) for b in region)), dtype=int)
    table = region_distance_table(graph, region, [source])
    return {int(b): float(d) for b, d in zip(region, table[0])}


def region_distance_table(graph: AdjacencyGraph, region, sources) -> np.ndarray:
    """Matrix of induced-subgraph shortest-path distances, one row per source.

    Columns follow ``region`` order.
    """
    region = np.asarray(region, dtype=int)
    pos = {int(b): i for i, b in enumerate(region)}
    idx = []
    for s in sources:
        if int(s) not in pos:
            raise InstanceError(f"source block {s} is outside the region")
        idx.append(pos[int(s)])
    m = _induced(graph, region)
    return np.atleast_2d(dijkstra(m, directed=False, indices=idx))


def is_contiguous(graph: AdjacencyGraph, region: Iterable[int]) -> bool:
    region = set(int(b) for b in region)
    if not region:
        raise InstanceError("contiguity of an empty region is undefined")
    start = next(iter(region))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in graph.neighbors[u]:
            if v in region and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(region)


# --------------------------------------------------------------------------
# Instance I/O

def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise InstanceError(f"{where}: missing field '{key}'")
    return obj[key]


def parse_instance(data: dict) -> tuple[AdjacencyGraph, ElectionReturns]:
    raw_blocks = _require(data, "blocks", "instance")
    if not isinstance(raw_blocks, list) or not raw_blocks:
        raise InstanceError("instance: field 'blocks' must be a nonempty list")
    by_id: dict[int, Block] = {}
    for n, rb in enumerate(raw_blocks):
        where = f"blocks[{n}]"
        bid = _require(rb, "id", where)
        if not isinstance(bid, int):
            raise InstanceError(f"{where}: field 'id' must be an integer")
        if bid in by_id:
            raise InstanceError(f"duplicate block id {bid}")
        pop = _require(rb, "population", where)
        if not isinstance(pop, (int, float)) or pop < 0:
            raise InstanceError(f"{where}: field 'population' must be a nonnegative number")
        area = rb.get("area", 1.0)
        if area < 0:
            raise InstanceError(f"{where}: field 'area' must be nonnegative")
        by_id[bid] = Block(bid, int(pop), float(_require(rb, "x", where)), float(_require(rb, "y", where)), float(area))
    if sorted(by_id) != list(range(len(by_id))):
        raise InstanceError("field 'blocks': ids must be 0..n-1 without gaps")
    blocks = [by_id[i] for i in range(len(by_id))]
    raw_edges = _require(data, "edges", "instance")
    edges = []
    for n, e in enumerate(raw_edges):
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise InstanceError(f"edges[{n}]: must be a pair of block ids")
        edges.append((int(e[0]), int(e[1])))
    synthetic = {tuple(e) for e in data.get("synthetic_edges", [])}
    graph = connect_components(AdjacencyGraph(blocks, edges, synthetic))
    raw_el = _require(data, "elections", "instance")
    if not isinstance(raw_el, dict):
        raise InstanceError("field 'elections' must map election names to share lists")
    names = list(raw_el)
    for name in names:
        if len(raw_el[name]) != graph.n:
            raise InstanceError(f"elections['{name}']: expected {graph.n} shares, got {len(raw_el[name])}")
    share = np.array([raw_el[name] for name in names], dtype=float).reshape(len(names), graph.n)
    returns = ElectionReturns(names, share, graph.population)
    return graph, returns


def load_instance(path) -> tuple[AdjacencyGraph, ElectionReturns]:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    return parse_instance(data)


def instance_dict(graph: AdjacencyGraph, returns: ElectionReturns) -> dict:
    out = {
        "blocks": [
            {"id": b.id, "population": int(b.population), "x": b.x, "y": b.y, "area": b.area}
            for b in graph.blocks
        ],
        "edges": [[u, v] for u, v in graph.edges if (u, v) not in graph.synthetic],
        "elections": {name: [float(v) for v in returns.share[e]] for e, name in enumerate(returns.elections)},
    }
    if graph.synthetic:
        out["edges"] = [[u, v] for u, v in graph.edges]
        out["synthetic_edges"] = sorted([u, v] for u, v in graph.synthetic)
    return out


def save_instance(graph: AdjacencyGraph, returns: ElectionReturns, path) -> None:
    Path(path).write_text(json.dumps(instance_dict(graph, returns), sort_keys=True))


# --------------------------------------------------------------------------
# Synthetic states

def grid_graph(width: int, height: int, population=None) -> AdjacencyGraph:
    """Rook-adjacency grid with unit cells; block id = row * width + col."""
    blocks = []
    for r in range(height):
        for c in range(width):
            i = r * width + c
            pop = 1 if population is None else int(population[i])
            blocks.append(Block(i, pop, c + 0.5, r + 0.5, 1.0))
    edges = []
    for r in range(height):
        for c in range(width):
            i = r * width + c
            if c + 1 < width:
                edges.append((i, i + 1))
            if r + 1 < height:
                edges.append((i, i + width))
    return AdjacencyGraph(blocks, edges)


def synthetic_state(width: int, height: int, urban_centers: int = 2, seed: int = 0,
                    n_elections: int = 4, base_population: int = 1000,
                    ) -> tuple[AdjacencyGraph, ElectionReturns]:
    """Grid "state" with urban population bumps that lean toward the low-share party.

    Block-level partisan means fall near urban centers; each election adds a
    statewide swing plus per-block noise. Deterministic per seed.
    """
    if width * height < 4:
        raise ValueError("synthetic state needs at least 4 cells")
    rng = np.random.default_rng(seed)
    xs, ys = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    xs, ys = xs.ravel(), ys.ravel()
    scale = max(width, height)
    density = np.zeros(width * height)
    for _ in range(urban_centers):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        radius = rng.uniform(0.08, 0.2) * scale
        peak = rng.uniform(2.0, 6.0)
        density += peak * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * radius ** 2))
    population = np.round(base_population * (1.0 + density)).astype(int)
    lean = 0.62 - 0.25 * density / (1.0 + density)
    lean = lean + rng.normal(0.0, 0.03, size=lean.shape)
    shares = []
    for _ in range(n_elections):
        swing = rng.normal(0.0, 0.03)
        noise = rng.normal(0.0, 0.02, size=lean.shape)
        shares.append(np.clip(lean + swing + noise, 0.0, 1.0))
    graph = grid_graph(width, height, population)
    returns = ElectionReturns([f"e{i}" for i in range(n_elections)], np.array(shares), graph.population)
    return graph, returns

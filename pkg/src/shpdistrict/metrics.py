"""Compactness, diversity and political statistics for districts, plans
and whole ensembles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .affiliation import AffiliationModel, seat_vote_target
from .geo_graph import AdjacencyGraph
from .optimize import tree_dp

# ---------------------------------------------------------------------------
# per district


def district_centralization(graph: AdjacencyGraph, district) -> float:
    """Population-weighted mean distance from blocks to the district's weighted centroid."""
    idx = np.fromiter(district, dtype=int)
    p = graph.population[idx]
    xy = graph.xy[idx]
    if p.sum() <= 0:
        p = np.ones_like(p)
    center = (xy * p[:, None]).sum(axis=0) / p.sum()
    return float((p * np.linalg.norm(xy - center, axis=1)).sum() / p.sum())


def district_roeck(graph: AdjacencyGraph, district) -> float:
    """Area over the circle whose diameter is the widest centroid pair."""
    idx = np.fromiter(district, dtype=int)
    if idx.size == 1:
        return 1.0
    xy = graph.xy[idx]
    diam = np.max(np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2))
    if diam == 0:
        return 1.0
    return float(graph.area[idx].sum() / (math.pi * (diam / 2) ** 2))


def boundary_edges(graph: AdjacencyGraph, district, include_synthetic: bool = True) -> int:
    inside = set(int(b) for b in district)
    count = 0
    for u, v in graph.edges:
        if not include_synthetic and (u, v) in graph.synthetic:
            continue
        if (u in inside) != (v in inside):
            count += 1
    return count


# ---------------------------------------------------------------------------
# per plan


def centralization(graph, plan) -> float:
    return float(np.mean([district_centralization(graph, d) for d in plan]))


def roeck(graph, plan) -> float:
    return float(np.mean([district_roeck(graph, d) for d in plan]))


def cut_edges(graph: AdjacencyGraph, plan, include_synthetic: bool = True) -> tuple[int, float]:
    """(total cut edges, total / k)."""
    label = np.full(graph.n, -1)
    for i, d in enumerate(plan):
        label[list(d)] = i
    e = graph.edge_array(include_synthetic)
    total = int(np.sum(label[e[:, 0]] != label[e[:, 1]])) if len(e) else 0
    return total, total / len(plan)


@dataclass
class PlanMetrics:
    centralization: float
    roeck: float
    cut_edges: int
    cut_edges_mean: float
    expected_seat_share: float
    expected_efficiency_gap: float
    expected_seat_swaps: float


def plan_metrics(graph: AdjacencyGraph, plan, model: AffiliationModel) -> PlanMetrics:
    win = [model.win_probability(d) for d in plan]
    total, mean = cut_edges(graph, plan)
    k = len(plan)
    gap = abs(sum(model.target - p for p in win)) / k
    return PlanMetrics(centralization(graph, plan), roeck(graph, plan), total, mean,
                       float(np.mean(win)), gap, float(sum(2 * p * (1 - p) for p in win)))


# ---------------------------------------------------------------------------
# ensemble diversity


def _membership(columns, n_blocks: int | None = None) -> np.ndarray:
    """Dense boolean [block, column] membership."""
    cols = [c.blocks if hasattr(c, "blocks") else c for c in columns]
    if n_blocks is None:
        n_blocks = max(max(c) for c in cols) + 1
    a = np.zeros((n_blocks, len(cols)), dtype=bool)
    for j, c in enumerate(cols):
        a[list(c), j] = True
    return a


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    m = (p > 0) & (p < 1)
    q = p[m]
    out[m] = -q * np.log2(q) - (1 - q) * np.log2(1 - q)
    return out


def conditional_entropy(columns, n_blocks: int | None = None, max_pairs: int = 100_000,
                        seed: int = 0) -> float:
    """Mean binary entropy of P(block i in district | block j in district).

    Ordered pairs i != j with j in at least one column; all pairs are used
    when there are at most ``max_pairs``, otherwise a uniform sample.
    """
    a = _membership(columns, n_blocks).astype(float)
    if a.shape[1] < 2:
        raise ValueError("need at least two columns")
    support = np.flatnonzero(a.sum(axis=1) > 0)
    n = len(support)
    total_pairs = n * (n - 1)
    a = a[support]
    counts = a.sum(axis=1)
    if total_pairs <= max_pairs:
        co = a @ a.T
        p = co / counts[None, :]
        mask = ~np.eye(n, dtype=bool)
        return float(_binary_entropy(p[mask]).mean())
    rng = np.random.default_rng(seed)
    i = rng.integers(n, size=max_pairs)
    j = rng.integers(n - 1, size=max_pairs)
    j = j + (j >= i)
    co = np.einsum("pc,pc->p", a[i], a[j])
    return float(_binary_entropy(co / counts[j]).mean())


def average_district_similarity(columns, k: int, max_pairs: int = 100_000, seed: int = 0) -> float:
    """Mean pairwise Jaccard similarity of columns, times k."""
    sets = [c.blocks if hasattr(c, "blocks") else frozenset(c) for c in columns]
    m = len(sets)
    if m < 2:
        raise ValueError("need at least two columns")
    a = _membership(sets).astype(float)
    sizes = a.sum(axis=0)
    n_pairs = m * (m - 1) // 2
    if n_pairs <= max_pairs:
        inter = a.T @ a
        union = sizes[:, None] + sizes[None, :] - inter
        iu = np.triu_indices(m, 1)
        return float(np.mean(inter[iu] / union[iu]) * k)
    rng = np.random.default_rng(seed)
    i = rng.integers(m, size=max_pairs)
    j = rng.integers(m - 1, size=max_pairs)
    j = j + (j >= i)
    inter = np.einsum("bp,bp->p", a[:, i], a[:, j])
    return float(np.mean(inter / (sizes[i] + sizes[j] - inter)) * k)


def svd_rank_ratios(a, thresholds=(0.5, 0.99)) -> tuple[float, ...]:
    """For each x: smallest rank holding x of the squared singular-value mass, over rank(A)."""
    a = np.asarray(a.toarray() if hasattr(a, "toarray") else a, dtype=float)
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        raise ValueError("matrix is zero")
    tol = s[0] * max(a.shape) * np.finfo(float).eps
    s = s[s > tol]
    energy = np.cumsum(s ** 2) / np.sum(s ** 2)
    out = []
    for x in thresholds:
        r = int(np.searchsorted(energy, x - 1e-12) + 1)
        out.append(min(r, len(s)) / len(s))
    return tuple(out)


def cooccurrence_weights(columns, n_blocks: int | None = None) -> np.ndarray:
    a = _membership(columns, n_blocks).astype(float)
    w = (a @ a.T) / a.shape[1]
    np.fill_diagonal(w, 0.0)
    return w


def lambda2(columns, n_blocks: int | None = None) -> float:
    """Second-smallest eigenvalue of the normalized Laplacian of block co-occurrence."""
    w = cooccurrence_weights(columns, n_blocks)
    deg = w.sum(axis=1)
    keep = deg > 0
    if keep.sum() < 2:
        raise ValueError("fewer than two blocks co-occur with anything")
    w = w[np.ix_(keep, keep)]
    d = 1.0 / np.sqrt(deg[keep])
    lap = np.eye(len(w)) - d[:, None] * w * d[None, :]
    return float(np.sort(np.linalg.eigvalsh(lap))[1])


def spearman_rho(xs, ys) -> float:
    """Pearson correlation of midranks; nan when either input is constant."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys) or len(xs) < 3:
        raise ValueError("need two sequences of equal length >= 3")
    rx, ry = rankdata(xs), rankdata(ys)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        return float("nan")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))


# ---------------------------------------------------------------------------
# tree-derived extremes


def cut_edge_range(tree, graph: AdjacencyGraph) -> tuple[float, float]:
    """(fewest, most) total cut edges over every plan in the tree."""
    cache = {}

    def half_boundary(leaf):
        if leaf.region not in cache:
            cache[leaf.region] = boundary_edges(graph, leaf.region) / 2
        return cache[leaf.region]

    lo, _ = tree_dp(tree, half_boundary, "min")
    hi, _ = tree_dp(tree, half_boundary, "max")
    return lo, hi


def mcd(tree, graph: AdjacencyGraph) -> float:
    """Cut edges of the least compact plan over those of the most compact one."""
    lo, hi = cut_edge_range(tree, graph)
    if lo == 0:
        return 1.0 if hi == 0 else math.inf
    return hi / lo


def seat_range(tree, model: AffiliationModel) -> tuple[float, float]:
    """(min, max) expected seats over every plan in the tree."""
    win = lambda leaf: model.win_probability(leaf.region)
    return tree_dp(tree, win, "min")[0], tree_dp(tree, win, "max")[0]


def esr(tree, model: AffiliationModel) -> float:
    lo, hi = seat_range(tree, model)
    return hi - lo


def responsiveness_feasible(tree, model: AffiliationModel, r: float) -> bool:
    from .affiliation import SeatVoteCurve

    target = seat_vote_target(SeatVoteCurve("responsiveness", r=r), model.statewide_mean) * tree.k
    lo, hi = seat_range(tree, model)
    return lo - 1e-12 <= target <= hi + 1e-12


@dataclass
class EnsembleMetrics:
    leverage: float
    infeasible_pct: float
    duplicate_pct: float
    conditional_entropy: float
    ads: float
    sigma_50: float
    sigma_99: float
    lambda2: float
    mu_walk: float
    mcd: float
    esr: float

    def row(self) -> dict:
        return {
            "leverage": self.leverage, "pct_infeas": self.infeasible_pct, "pct_dup": self.duplicate_pct,
            "H": self.conditional_entropy, "ADS": self.ads, "sigma_50": self.sigma_50,
            "sigma_99": self.sigma_99, "lambda2": self.lambda2, "mu_walk": self.mu_walk,
            "MCD": self.mcd, "ESR": self.esr,
        }


def ensemble_metrics(tree, columns, graph: AdjacencyGraph, model: AffiliationModel,
                     max_pairs: int = 100_000, seed: int = 0) -> EnsembleMetrics:
    from .optimize import block_district_matrix
    from .tree import leverage

    cols = columns.columns
    a = block_district_matrix(cols, graph.n)
    s50, s99 = svd_rank_ratios(a, (0.5, 0.99))
    return EnsembleMetrics(
        leverage(tree), 100.0 * tree.infeasible_rate, 100.0 * columns.duplicate_rate,
        conditional_entropy(cols, graph.n, max_pairs, seed),
        average_district_similarity(cols, tree.k, max_pairs, seed),
        s50, s99, lambda2(cols, graph.n),
        float(np.mean([district_centralization(graph, c.blocks) for c in cols])),
        mcd(tree, graph), esr(tree, model),
    )


def annotate_columns(columns, graph: AdjacencyGraph, model: AffiliationModel | None = None) -> None:
    """Cache per-column population, boundary edges, centralization and, with a model, win probability and cost."""
    for c in columns.columns:
        c.metrics["population"] = float(graph.region_population(c.blocks))
        c.metrics["boundary_edges"] = boundary_edges(graph, c.blocks)
        c.metrics["centralization"] = district_centralization(graph, c.blocks)
        if model is not None:
            c.metrics["win_probability"] = model.win_probability(c.blocks)
            c.metrics["cost"] = model.cost(c.blocks)

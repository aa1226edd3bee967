"""Split sizes, child capacities, center selection and capacity matching
for one partition step of the sample tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METHODS = ("fixed-center", "pareto-perturbation", "fixed-plus-pareto", "random-iterative", "uniform-random")


@dataclass(frozen=True)
class CenterConfig:
    method: str = "fixed-plus-pareto"
    alpha_pareto: float = 1.0
    weight_kind: str = "voronoi"
    capacity_mode: str = "match"
    z_min: int = 2
    z_max: int = 5
    disparity_cap: float = 2.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown center method {self.method!r}")
        if self.weight_kind not in ("voronoi", "fractional"):
            raise ValueError(f"unknown weight kind {self.weight_kind!r}")
        if self.capacity_mode not in ("compute", "match"):
            raise ValueError(f"unknown capacity mode {self.capacity_mode!r}")
        if not 2 <= self.z_min <= self.z_max:
            raise ValueError("need 2 <= z_min <= z_max")
        if self.alpha_pareto <= 0:
            raise ValueError("alpha_pareto must be positive")
        if self.disparity_cap < 1:
            raise ValueError("disparity_cap must be >= 1")


def sample_split_size(s: int, config: CenterConfig, rng: np.random.Generator) -> int:
    hi = min(s, config.z_max)
    lo = min(config.z_min, hi)
    return int(rng.integers(lo, hi + 1))


def sample_capacities(s: int, z: int, config: CenterConfig, rng: np.random.Generator,
                      tries: int = 1000) -> tuple[int, ...]:
    """Uniform composition of ``s`` into ``z`` positive parts with max <= cap * min.

    Falls back to the most balanced composition when rejection sampling
    finds nothing in ``tries`` draws.
    """
    if z > s:
        raise ValueError(f"cannot split capacity {s} into {z} parts")
    if z == 1:
        return (s,)
    for _ in range(tries):
        cuts = np.sort(rng.choice(np.arange(1, s), size=z - 1, replace=False))
        parts = np.diff(np.concatenate([[0], cuts, [s]]))
        if parts.max() <= config.disparity_cap * parts.min():
            return tuple(int(p) for p in parts)
    base, extra = divmod(s, z)
    return tuple(base + (1 if i < extra else 0) for i in range(z))


def weighted_kmeans(points: np.ndarray, weights: np.ndarray, z: int, rng: np.random.Generator,
                    max_iter: int = 100) -> np.ndarray:
    """Lloyd's algorithm on weighted points.

    A point with infinite weight pins the mean of whichever cluster holds it.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = len(points)
    if n < z:
        raise ValueError("fewer points than means")
    if z == n:
        return points.copy()
    inf = np.isinf(weights)
    # initialization: infinite-weight points first, the rest proportional to weight
    p = np.where(inf, 0.0, weights)
    forced = list(np.flatnonzero(inf)[:z])
    rest = z - len(forced)
    avail = np.ones(n, dtype=bool)
    avail[forced] = False
    chosen = list(forced)
    if rest:
        pr = np.where(avail, p, 0.0)
        if (pr > 0).sum() < rest:
            pr = np.where(avail, pr + 1e-12 + (pr == 0), 0.0)
        chosen += list(rng.choice(n, size=rest, replace=False, p=pr / pr.sum()))
    means = points[chosen].copy()
    labels = None
    for _ in range(max_iter):
        d = np.linalg.norm(points[:, None, :] - means[None, :, :], axis=2)
        new = np.argmin(d, axis=1)
        _repair_empty(new, d, z)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(z):
            members = labels == c
            if (members & inf).any():
                means[c] = points[members & inf].mean(axis=0)
                continue
            w = weights[members]
            if w.sum() > 0:
                means[c] = (points[members] * w[:, None]).sum(axis=0) / w.sum()
            else:
                means[c] = points[members].mean(axis=0)
    return means


def _repair_empty(labels: np.ndarray, d: np.ndarray, z: int) -> None:
    for c in range(z):
        if (labels == c).any():
            continue
        sizes = np.bincount(labels, minlength=z)
        big = int(np.argmax(sizes))
        members = np.flatnonzero(labels == big)
        far = members[np.argmax(d[members, big])]
        labels[far] = c


def _closest_blocks(points: np.ndarray, means: np.ndarray) -> list[int]:
    """Distinct point index per mean, assigned greedily by increasing distance."""
    d = np.linalg.norm(points[:, None, :] - means[None, :, :], axis=2)
    out = [-1] * len(means)
    used = set()
    for flat in np.argsort(d, axis=None, kind="stable"):
        i, c = divmod(int(flat), len(means))
        if out[c] == -1 and i not in used:
            out[c] = i
            used.add(i)
            if len(used) == len(means):
                break
    return out


def select_centers(graph, region, z: int, config: CenterConfig, rng: np.random.Generator,
                   capacities=None, ideal_population: float | None = None) -> list[int]:
    """Pick ``z`` distinct center blocks in ``region``.

    ``capacities`` and ``ideal_population`` are used by the random-iterative
    method only; its centers come back aligned with ``capacities``.
    """
    region = np.asarray(sorted(int(b) for b in region), dtype=int)
    if len(region) < z:
        raise ValueError(f"region of {len(region)} blocks cannot host {z} centers")
    method = config.method
    if method == "uniform-random":
        return [int(b) for b in rng.choice(region, size=z, replace=False)]
    pts = graph.xy[region]
    if method == "random-iterative":
        return _random_iterative(graph, region, z, rng, capacities, ideal_population)
    weights = graph.population[region].astype(float).copy()
    if weights.sum() <= 0:
        weights = np.ones(len(region))
    if method in ("pareto-perturbation", "fixed-plus-pareto"):
        weights *= 1.0 + rng.pareto(config.alpha_pareto, size=len(region))
    if method in ("fixed-center", "fixed-plus-pareto"):
        weights[int(rng.integers(len(region)))] = np.inf
    means = weighted_kmeans(pts, weights, z, rng)
    return [int(region[i]) for i in _closest_blocks(pts, means)]


def _random_iterative(graph, region, z, rng, capacities, ideal_population):
    if capacities is None:
        capacities = [1] * z
    if ideal_population is None:
        ideal_population = graph.population[region].sum() / max(sum(capacities), 1)
    unassigned = np.ones(len(region), dtype=bool)
    seed = int(rng.integers(len(region)))
    centers: list[int] = []
    for cap in capacities:
        pool = unassigned.copy()
        pool[[np.flatnonzero(region == c)[0] for c in centers]] = False
        if not pool.any():
            pool = np.ones(len(region), dtype=bool)
            pool[[np.flatnonzero(region == c)[0] for c in centers]] = False
        d2 = np.sum((graph.xy[region] - graph.xy[region[seed]]) ** 2, axis=1)
        weight = np.where(pool, d2, 0.0)
        if weight.sum() <= 0:
            weight = pool.astype(float)
        c = int(rng.choice(len(region), p=weight / weight.sum()))
        centers.append(int(region[c]))
        # peel off roughly cap * ideal population of the nearest unassigned blocks
        order = np.argsort(np.sum((graph.xy[region] - graph.xy[region[c]]) ** 2, axis=1), kind="stable")
        need = cap * ideal_population
        acc = 0.0
        for i in order:
            if not unassigned[i]:
                continue
            if acc >= need:
                break
            unassigned[i] = False
            acc += graph.population[region[i]]
        seed = c
    return centers


def capacity_weights(graph, region, centers, weight_kind: str, ideal_population: float) -> np.ndarray:
    """Ideal fractional capacity of each center, ``(A p) / p_hat``."""
    region = np.asarray(sorted(int(b) for b in region), dtype=int)
    centers = [int(c) for c in centers]
    d = np.linalg.norm(graph.xy[region][None, :, :] - graph.xy[centers][:, None, :], axis=2)
    pop = graph.population[region]
    if weight_kind == "voronoi":
        # ties go to the lower block id
        order = np.argsort(centers, kind="stable")
        nearest = order[np.argmin(d[order], axis=0)]
        a = np.zeros_like(d)
        a[nearest, np.arange(len(region))] = 1.0
    elif weight_kind == "fractional":
        zero = d <= 0
        with np.errstate(divide="ignore"):
            inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, d) ** 2)
        total = inv.sum(axis=0, keepdims=True)
        a = inv / np.where(total > 0, total, 1.0)
        coincide = zero.any(axis=0)
        a[:, coincide] = zero[:, coincide].astype(float)
    else:
        raise ValueError(f"unknown weight kind {weight_kind!r}")
    return (a @ pop) / ideal_population


def assign_capacities(w, sampled, capacity_mode: str) -> tuple[int, ...]:
    """Integer capacity per center.

    ``match`` pairs ascending ideal weights with ascending sampled
    capacities. ``compute`` minimizes sum |s_i - w_i| subject to
    sum s_i = sum(sampled) and s_i >= 1 (greedy unit allocation, exact for
    this separable convex objective; ties go to the lower center index).
    """
    w = np.asarray(w, dtype=float)
    sampled = [int(v) for v in sampled]
    z = len(w)
    s = sum(sampled)
    if s < z:
        raise ValueError(f"capacity {s} cannot give every one of {z} centers a district")
    if capacity_mode == "match":
        if len(sampled) != z:
            raise ValueError("need one sampled capacity per center")
        out = [0] * z
        for rank, c in enumerate(np.argsort(w, kind="stable")):
            out[int(c)] = sorted(sampled)[rank]
        return tuple(out)
    if capacity_mode != "compute":
        raise ValueError(f"unknown capacity mode {capacity_mode!r}")
    out = [1] * z
    for _ in range(s - z):
        gains = [abs(out[i] - w[i]) - abs(out[i] + 1 - w[i]) for i in range(z)]
        best = max(gains)
        out[gains.index(best)] += 1
    return tuple(out)

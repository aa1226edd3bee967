"""Partisan affiliation model: district vote-share statistics, win
probabilities and fairness cost coefficients.

All shares are two-party shares of the "high" party (Republican in the
instance convention). ``party="low"`` flips the convention so win
probabilities refer to the other party.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats


@dataclass
class ElectionReturns:
    elections: list[str]
    share: np.ndarray  # [election, block]
    population: np.ndarray

    def __post_init__(self):
        self.share = np.asarray(self.share, dtype=float)
        if self.share.ndim != 2 or self.share.shape[0] != len(self.elections):
            raise ValueError("share must be an [election x block] matrix")
        if np.any(self.share < 0) or np.any(self.share > 1) or not np.all(np.isfinite(self.share)):
            raise ValueError("vote shares must lie in [0, 1]")
        self.population = np.asarray(self.population, dtype=float)

    @property
    def statewide_mean(self) -> float:
        """Population-weighted statewide share averaged over elections."""
        w = self.population / self.population.sum()
        return float(np.mean(self.share @ w))

    def flipped(self) -> "ElectionReturns":
        return ElectionReturns(list(self.elections), 1.0 - self.share, self.population)


@dataclass(frozen=True)
class DistrictPartisanStats:
    mu: float
    sigma: float
    dof: int


@dataclass(frozen=True)
class SeatVoteCurve:
    """Ideal seat share as a function of statewide vote share.

    ``kind`` is one of ``efficiency-gap``, ``proportional``,
    ``responsiveness`` (slope ``r`` through (0.5, 0.5)) or ``table``
    (piecewise-linear through ``points``).
    """

    kind: str = "efficiency-gap"
    r: float = 2.0
    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("efficiency-gap", "proportional", "responsiveness", "table"):
            raise ValueError(f"unknown seat-vote curve {self.kind!r}")
        if self.kind == "table":
            xs = [p[0] for p in self.points]
            ys = [p[1] for p in self.points]
            if len(xs) < 2 or any(b <= a for a, b in zip(xs, xs[1:])) or any(b < a for a, b in zip(ys, ys[1:])):
                raise ValueError("table curve needs >= 2 points, increasing in x and nondecreasing in y")


def seat_vote_target(curve: SeatVoteCurve, v: float) -> float:
    if curve.kind == "efficiency-gap":
        t = 2.0 * v - 0.5
    elif curve.kind == "proportional":
        t = v
    elif curve.kind == "responsiveness":
        t = curve.r * (v - 0.5) + 0.5
    else:
        xs, ys = zip(*curve.points)
        t = float(np.interp(v, xs, ys))
    return min(1.0, max(0.0, t))


def district_stats(graph, returns: ElectionReturns, region: Iterable[int]) -> DistrictPartisanStats:
    """Per-election population-weighted district share, then mean and sample std.

    ``graph`` is an :class:`AdjacencyGraph` or a bare population array.
    """
    population = getattr(graph, "population", graph)
    idx = np.fromiter(region, dtype=int)
    if idx.size == 0:
        raise ValueError("district must contain at least one block")
    n_el = returns.share.shape[0]
    if n_el < 2:
        raise ValueError("at least two elections are needed to estimate a spread")
    p = np.asarray(population, dtype=float)[idx]
    tot = p.sum()
    if tot > 0:
        v = returns.share[:, idx] @ p / tot
    else:
        v = returns.share[:, idx].mean(axis=1)
    mu = float(np.clip(v.mean(), 0.0, 1.0))
    sigma = float(v.std(ddof=1))
    return DistrictPartisanStats(mu, sigma, n_el - 1)


def win_probability(st: DistrictPartisanStats, dist: str = "t") -> float:
    """Probability the district share exceeds one half."""
    if st.sigma <= 1e-12 or not math.isfinite(st.sigma):
        if st.mu > 0.5:
            return 1.0
        if st.mu < 0.5:
            return 0.0
        return 0.5
    z = (st.mu - 0.5) / st.sigma
    if dist == "normal":
        return float(stats.norm.cdf(z))
    return float(stats.t.cdf(z, st.dof))


def district_cost(graph, returns: ElectionReturns, region, curve: SeatVoteCurve, dist: str = "t") -> float:
    target = seat_vote_target(curve, returns.statewide_mean)
    return target - win_probability(district_stats(graph, returns, region), dist)


def expected_seat_share(win_probs: Sequence[float]) -> float:
    if len(win_probs) == 0:
        raise ValueError("plan has no districts")
    return float(np.mean(win_probs))


def expected_seat_swaps(win_probs: Sequence[float]) -> float:
    """Expected number of seats changing hands between two independent elections."""
    p = np.asarray(win_probs, dtype=float)
    return float(np.sum(2.0 * p * (1.0 - p)))


@dataclass
class AffiliationModel:
    """Bundles returns, curve and distribution choice; caches per-region results."""

    population: np.ndarray
    returns: ElectionReturns
    curve: SeatVoteCurve = field(default_factory=SeatVoteCurve)
    dist: str = "t"
    party: str = "high"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.party not in ("high", "low"):
            raise ValueError("party must be 'high' or 'low'")
        if self.party == "low":
            self.returns = self.returns.flipped()

    @property
    def statewide_mean(self) -> float:
        return self.returns.statewide_mean

    @property
    def target(self) -> float:
        return seat_vote_target(self.curve, self.statewide_mean)

    def stats(self, region) -> DistrictPartisanStats:
        return district_stats(self.population, self.returns, region)

    def win_probability(self, region) -> float:
        key = frozenset(int(b) for b in region)
        hit = self._cache.get(key)
        if hit is None:
            hit = win_probability(self.stats(key), self.dist)
            self._cache[key] = hit
        return hit

    def cost(self, region) -> float:
        return self.target - self.win_probability(region)

"""Run configuration: nested dataclasses persisted as YAML."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .affiliation import SeatVoteCurve
from .centers import CenterConfig
from .tree import TreeConfig

OUT_ENV = "SHPDISTRICT_OUT"


@dataclass
class SyntheticConfig:
    width: int = 12
    height: int = 12
    urban_centers: int = 2
    seed: int = 0
    n_elections: int = 4


@dataclass
class ProblemConfig:
    k: int = 4
    epsilon_p: float = 0.05


@dataclass
class SolverConfig:
    msp_backend: str = "bnb"
    node_limit: int | None = None
    time_limit: float | None = None


@dataclass
class CompareConfig:
    max_steps: int = 100_000  # chain stops earlier once the district budget is spent
    n_samples: int = 2000     # SHP plans drawn for distributions
    chain_epsilon: float | None = None  # None reuses problem.epsilon_p
    svg: bool = True


@dataclass
class RunConfig:
    instance: str | None = None
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    tree: TreeConfig = field(default_factory=lambda: TreeConfig(w_root=4, w=2))
    curve: SeatVoteCurve = field(default_factory=SeatVoteCurve)
    solver: SolverConfig = field(default_factory=SolverConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    workers: int = 1
    out_dir: str = field(default_factory=lambda: os.environ.get(OUT_ENV, "runs/default"))
    seed: int = 0

    def tree_config(self) -> TreeConfig:
        return dataclasses.replace(self.tree, seed=self.seed)


TEMPLATE = """\
# Path to an instance JSON; leave null to build the synthetic state below.
instance: null
synthetic:
  width: 12           # grid columns
  height: 12          # grid rows
  urban_centers: 2    # population peaks
  seed: 0
  n_elections: 4      # historical elections per block (>= 2)
problem:
  k: 4                # districts
  epsilon_p: 0.05     # population tolerance around the ideal
tree:
  w_root: 4           # sampled root partitions
  w: 2                # samples per non-root internal node
  max_samples: null   # attempts per node; null means 5 * width
  width_by_capacity: {}   # per-capacity width override, e.g. {2: 32}
  distinct_samples: false # reject samples repeating an earlier sample of the node
  pip_backend: highs  # highs or bnb
  node_limit: null
  time_limit: null    # seconds per partition problem
  centers:
    method: fixed-plus-pareto   # fixed-center | pareto-perturbation | fixed-plus-pareto | random-iterative | uniform-random
    alpha_pareto: 1.0
    weight_kind: voronoi        # voronoi | fractional
    capacity_mode: match        # match | compute
    z_min: 2
    z_max: 5
    disparity_cap: 2.0          # largest over smallest sampled capacity
curve:
  kind: efficiency-gap  # efficiency-gap | proportional | responsiveness | table
  r: 2.0
  points: []
solver:
  msp_backend: bnb    # bnb or highs
  node_limit: null
  time_limit: null
compare:
  max_steps: 100000  # chain stops earlier once it matches the SHP district count
  n_samples: 2000     # SHP plans drawn uniformly for the distributions
  chain_epsilon: null # null reuses problem.epsilon_p
  svg: true
workers: 1
out_dir: runs/default # overridden by $SHPDISTRICT_OUT when the key is absent
seed: 0               # master seed
"""


def _build(cls, data):
    if not dataclasses.is_dataclass(cls) or data is None:
        return data
    if not isinstance(data, dict):
        raise ValueError(f"expected a mapping for {cls.__name__}")
    hints = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(hints)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    nested = {"synthetic": SyntheticConfig, "problem": ProblemConfig, "tree": TreeConfig,
              "curve": SeatVoteCurve, "solver": SolverConfig, "compare": CompareConfig,
              "centers": CenterConfig}
    kwargs = {}
    for key, value in data.items():
        if key in nested and isinstance(value, dict):
            value = _build(nested[key], value)
        if key == "points" and value is not None:
            value = tuple(tuple(p) for p in value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data or {})


def config_to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["curve"]["points"] = [list(p) for p in d["curve"]["points"]]
    return d


def load_config(path) -> RunConfig:
    return config_from_dict(yaml.safe_load(Path(path).read_text()))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))

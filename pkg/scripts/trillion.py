"""Build a tree expressing over a trillion 16-district plans on a 24x24 grid.

Schedule: one sample at capacities 16, 8 and 4 (binary balanced splits), 32
samples at every capacity-2 node. Expected: 512 leaves, 263 partition
problems, 32**8 plans.
"""

import argparse
import time
from pathlib import Path

from shpdistrict.centers import CenterConfig
from shpdistrict.geo_graph import ProblemSpec, synthetic_state
from shpdistrict.store import save_tree
from shpdistrict.tree import TreeConfig, count_plans, generate_tree, leverage


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=24)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--width-at-2", type=int, default=32)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--save", type=Path, help="write the tree JSON here")
    args = ap.parse_args()

    graph, _ = synthetic_state(args.size, args.size, 2, seed=3)
    spec = ProblemSpec(16, 0.05, graph.total_population)
    cfg = TreeConfig(w_root=1, w=1, width_by_capacity={2: args.width_at_2}, seed=args.seed,
                     centers=CenterConfig(z_max=2, disparity_cap=1))
    start = time.perf_counter()
    tree = generate_tree(graph, spec, cfg, workers=args.workers)
    elapsed = time.perf_counter() - start
    n = count_plans(tree)
    print(f"leaves            {len(tree.leaves())}")
    print(f"problems solved   {tree.partition_problems_solved}")
    print(f"plans             {n} ({n:.3e})")
    print(f"equals 32^8       {n == args.width_at_2 ** 8}")
    print(f"leverage          {leverage(tree):.3f}")
    print(f"seconds           {elapsed:.1f}")
    if args.save:
        save_tree(tree, args.save)


if __name__ == "__main__":
    main()

"""Population-tolerance sweep: generation cost and ensemble shape per epsilon."""

import argparse
import csv
import sys
import time

from shpdistrict.affiliation import AffiliationModel
from shpdistrict.centers import CenterConfig
from shpdistrict.geo_graph import ProblemSpec, is_contiguous, synthetic_state
from shpdistrict.metrics import ensemble_metrics
from shpdistrict.tree import TreeConfig, collect_columns, generate_tree


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.005, 0.01, 0.05])
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--w-root", type=int, default=4)
    ap.add_argument("--w", type=int, default=2)
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args()

    graph, returns = synthetic_state(args.size, args.size, 2, seed=args.seed)
    model = AffiliationModel(graph.population, returns)
    rows = []
    for eps in args.eps:
        spec = ProblemSpec(args.k, eps, graph.total_population)
        cfg = TreeConfig(w_root=args.w_root, w=args.w, seed=args.seed, centers=CenterConfig(z_max=3))
        start = time.perf_counter()
        tree = generate_tree(graph, spec, cfg)
        seconds = time.perf_counter() - start
        columns = collect_columns(tree)
        lo, hi = spec.district_bounds()
        ok = all(lo <= graph.population[list(c.blocks)].sum() <= hi and is_contiguous(graph, c.blocks)
                 for c in columns.columns)
        row = {"eps": eps, "seconds": round(seconds, 2), "columns": len(columns.columns), "all_feasible": ok}
        row.update({k: round(v, 4) for k, v in ensemble_metrics(tree, columns, graph, model).row().items()})
        rows.append(row)
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), delimiter="\t")
    w.writeheader()
    w.writerows(rows)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            out = csv.DictWriter(fh, fieldnames=list(rows[0]))
            out.writeheader()
            out.writerows(rows)


if __name__ == "__main__":
    main()

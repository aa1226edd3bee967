"""Command line pipeline: synth, generate, optimize, prune, metrics, compare, render.

Exit codes: 0 success, 2 validation error, 3 infeasible root, 4 solver limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from .affiliation import AffiliationModel
from .compare import compare_methods
from .config import TEMPLATE, RunConfig, load_config, save_config
from .geo_graph import InstanceError, ProblemSpec, load_instance, save_instance, synthetic_state
from .metrics import annotate_columns, boundary_edges, centralization, cut_edges, ensemble_metrics, roeck
from .optimize import objective_histogram, solve_all_msps, tree_dp
from .recom import plan_is_feasible
from .render import boxplot_svg, plan_svg
from .solver import SolverLimitError
from .store import load_columns, load_tree, read_csv, save_columns, save_tree, write_csv
from .tree import NoFeasibleRootError, collect_columns, count_plans, generate_tree, leverage, prune_tree

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 2, 3, 4
SOLVED = ("feasible", "infeasible", "limit", "invalid")
RUNTIME_EDGES = (0.5, 1.0, 3.0)


# --------------------------------------------------------------------------
# helpers


def _instance(cfg: RunConfig):
    if cfg.instance:
        return load_instance(cfg.instance)
    s = cfg.synthetic
    return synthetic_state(s.width, s.height, s.urban_centers, s.seed, s.n_elections)


def _spec(cfg: RunConfig, graph) -> ProblemSpec:
    return ProblemSpec(cfg.problem.k, cfg.problem.epsilon_p, graph.total_population)


def _model(cfg: RunConfig, graph, returns) -> AffiliationModel:
    return AffiliationModel(graph.population, returns, cfg.curve)


def _load_run(out: Path):
    for name in ("instance.json", "tree.json", "columns.bin"):
        if not (out / name).exists():
            raise FileNotFoundError(f"missing {out / name}; run generate first")
    graph, returns = load_instance(out / "instance.json")
    tree = load_tree(out / "tree.json")
    columns, _ = load_columns(out)
    return graph, returns, tree, columns


def _runtime_summary(seconds: list[float]) -> dict:
    arr = np.asarray(seconds, dtype=float)
    if arr.size == 0:
        return {f"under_{e}s": float("nan") for e in RUNTIME_EDGES}
    return {f"under_{e}s": float(np.mean(arr < e)) for e in RUNTIME_EDGES}


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    graph, returns = synthetic_state(args.width, args.height, args.urban_centers, args.seed, args.elections)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    save_instance(graph, returns, args.output)
    if args.write_config:
        Path(args.write_config).write_text(TEMPLATE)
    print(f"wrote {args.output} ({graph.n} blocks)")
    return EXIT_OK


def cmd_generate(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph, returns = _instance(cfg)
    spec = _spec(cfg, graph)
    save_config(cfg, out / "config.yaml")
    save_instance(graph, returns, out / "instance.json")
    start = time.perf_counter()
    try:
        tree = generate_tree(graph, spec, cfg.tree_config(), workers=cfg.workers)
    except NoFeasibleRootError:
        _write_json(out / "generation_summary.json", {"status": "failed", "reason": "no feasible root"})
        raise
    elapsed = time.perf_counter() - start
    columns = collect_columns(tree)
    annotate_columns(columns, graph, _model(cfg, graph, returns))
    save_tree(tree, out / "tree.json")
    save_columns(columns, graph.n, out)
    solved = [r for r in tree.records if r.status in SOLVED]
    write_csv(out / "generation_stats.csv", ["path", "capacity", "n_blocks", "z", "status", "seconds"],
              [["/".join(map(str, r.path)), r.capacity, r.n_blocks, r.z, r.status, f"{r.seconds:.6f}"]
               for r in solved])
    summary = {
        "status": "complete",
        "leverage": leverage(tree),
        "pct_infeas": 100.0 * tree.infeasible_rate,
        "pct_dup": 100.0 * columns.duplicate_rate,
        "plans": str(count_plans(tree)),
        "leaves": len(tree.leaves()),
        "columns": len(columns.columns),
        "partition_problems_solved": tree.partition_problems_solved,
        "seconds": elapsed,
        "runtime": _runtime_summary([r.seconds for r in solved]),
    }
    _write_json(out / "generation_summary.json", summary)
    print(f"generated {summary['leaves']} districts, {summary['plans']} plans, leverage {summary['leverage']:.3f}")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    graph, returns, tree, columns = _load_run(out)
    model = _model(cfg, graph, returns)
    k = tree.k
    results = solve_all_msps(tree, columns, model, backend=cfg.solver.msp_backend, workers=cfg.workers,
                             node_limit=cfg.solver.node_limit, time_limit=cfg.solver.time_limit)
    rows = []
    for res in results:
        if res.status != "optimal":
            continue
        plan = [columns.columns[j].blocks for j in res.columns]
        rows.append([len(rows), res.root_index, " ".join(map(str, res.columns)), repr(res.objective),
                     repr(res.expected_seats / k), repr(centralization(graph, plan)),
                     repr(roeck(graph, plan)), cut_edges(graph, plan)[0]])
    write_csv(out / "plans.csv", ["plan_id", "root_index", "column_ids", "objective", "expected_seat_share",
                                  "centralization", "roeck", "cut_edges"], rows)
    write_csv(out / "msp_results.csv", ["root_index", "status", "objective", "seconds", "message"],
              [[r.root_index, r.status, "" if r.objective is None else repr(r.objective), f"{r.seconds:.6f}",
                r.message] for r in results])
    hist = objective_histogram(results)
    write_csv(out / "msp_histogram.csv", ["bin_low", "bin_high", "count", "fraction"],
              [[hist["bins"][i], hist["bins"][i + 1], c, f] for i, (c, f)
               in enumerate(zip(hist["counts"], hist["fractions"]))])
    win = lambda leaf: model.win_probability(leaf.region)
    half = lambda leaf: boundary_edges(graph, leaf.region) / 2
    summary = {
        "msp_solved": hist["n"],
        "msp_skipped": sum(r.status == "skipped" for r in results),
        "msp_failed": sum(r.status in ("limit", "error", "infeasible") for r in results),
        "within_0.1_seats": hist["within"],
        "seats_min": tree_dp(tree, win, "min")[0],
        "seats_max": tree_dp(tree, win, "max")[0],
        "cut_edges_min": tree_dp(tree, half, "min")[0],
        "cut_edges_max": tree_dp(tree, half, "max")[0],
        "target_seats": model.target * k,
    }
    _write_json(out / "optimize_summary.json", summary)
    print(f"{hist['n']} MSPs solved, {summary['msp_skipped']} skipped; "
          f"fraction within 0.1 seats: {hist['within']:.3f}")
    if any(r.status == "limit" for r in results):
        return EXIT_LIMIT
    return EXIT_OK


def cmd_prune(cfg: RunConfig, target: int, dest: str) -> int:
    src = Path(cfg.out_dir)
    graph, _, tree, _ = _load_run(src)
    pruned = prune_tree(tree, target).finalize()
    out = Path(dest)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("config.yaml", "instance.json"):
        if (src / name).exists() and src.resolve() != out.resolve():
            shutil.copyfile(src / name, out / name)
    save_tree(pruned, out / "tree.json")
    save_columns(collect_columns(pruned), graph.n, out)
    print(f"pruned to {count_plans(pruned)} plans, {len(pruned.leaves())} leaves")
    return EXIT_OK


def cmd_metrics(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    graph, returns, tree, columns = _load_run(out)
    em = ensemble_metrics(tree, columns, graph, _model(cfg, graph, returns), seed=cfg.seed)
    row = em.row()
    write_csv(out / "metrics.csv", list(row), [[repr(v) for v in row.values()]])
    print(", ".join(f"{k}={v:.4g}" for k, v in row.items()))
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    graph, returns, tree, _ = _load_run(out)
    eps = cfg.compare.chain_epsilon or cfg.problem.epsilon_p
    spec = ProblemSpec(tree.k, eps, graph.total_population)
    cmp = compare_methods(tree, graph, _model(cfg, graph, returns), spec, cfg.compare.max_steps,
                          cfg.compare.n_samples, cfg.seed)
    write_csv(out / "compare.csv", ["method", "plan_index", "expected_seat_share", "cut_edges_mean"], cmp.rows())
    _write_json(out / "compare_summary.json", cmp.summary())
    if cfg.compare.svg:
        (out / "compare_seats.svg").write_text(boxplot_svg(
            {"SHP": cmp.shp.seat_share.tolist(), "ReCom": cmp.recom.seat_share.tolist()}, "expected seat share"))
        (out / "compare_cuts.svg").write_text(boxplot_svg(
            {"SHP": cmp.shp.cut_edges_mean.tolist(), "ReCom": cmp.recom.cut_edges_mean.tolist()},
            "cut edges per district"))
    direction = "wider" if cmp.shp_range_wider else "narrower"
    print(f"SHP seat range {cmp.shp.seat_range}, ReCom {cmp.recom.seat_range}: SHP {direction}")
    return EXIT_OK


def load_plans(out: Path, graph, columns, spec: ProblemSpec) -> dict[int, list[frozenset]]:
    """Read plans.csv and re-validate every plan."""
    plans = {}
    for row in read_csv(out / "plans.csv"):
        plan = [columns.columns[int(j)].blocks for j in row["column_ids"].split()]
        if not plan_is_feasible(graph, plan, spec):
            raise InstanceError(f"stored plan {row['plan_id']} is infeasible")
        plans[int(row["plan_id"])] = plan
    return plans


def cmd_render(cfg: RunConfig, plan_id: int | None, output: str | None) -> int:
    out = Path(cfg.out_dir)
    graph, _, tree, columns = _load_run(out)
    if plan_id is None:
        leaves = tree.leaf_index()
        _, ids = tree_dp(tree, lambda leaf: boundary_edges(graph, leaf.region) / 2, "min")
        plan, name = [leaves[i].region for i in ids], "compact"
    else:
        spec = ProblemSpec(tree.k, cfg.problem.epsilon_p, graph.total_population)
        plans = load_plans(out, graph, columns, spec)
        if plan_id not in plans:
            raise InstanceError(f"no plan {plan_id} in plans.csv")
        plan, name = plans[plan_id], str(plan_id)
    target = Path(output) if output else out / f"plan_{name}.svg"
    target.write_text(plan_svg(graph, plan))
    print(f"wrote {target}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument handling


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "instance", None):
        cfg.instance = args.instance
    for attr, target in (("k", "k"), ("epsilon_p", "epsilon_p")):
        if getattr(args, attr, None) is not None:
            setattr(cfg.problem, target, getattr(args, attr))
    for attr in ("w_root", "w"):
        if getattr(args, attr, None) is not None:
            setattr(cfg.tree, attr, getattr(args, attr))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shpdistrict", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic grid instance")
    s.add_argument("output")
    s.add_argument("--width", type=int, default=12)
    s.add_argument("--height", type=int, default=12)
    s.add_argument("--urban-centers", type=int, default=2)
    s.add_argument("--elections", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--write-config", metavar="PATH", help="also write a commented default config")

    def run_args(sp):
        sp.add_argument("-c", "--config", help="YAML run config")
        sp.add_argument("-o", "--out", help="output directory (default $SHPDISTRICT_OUT or runs/default)")
        sp.add_argument("--instance")
        sp.add_argument("--k", type=int)
        sp.add_argument("--epsilon-p", type=float)
        sp.add_argument("--w-root", type=int)
        sp.add_argument("--w", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        return sp

    run_args(sub.add_parser("generate", help="sample the tree and write the column store"))
    run_args(sub.add_parser("optimize", help="solve one fairness MSP per root partition"))
    pr = run_args(sub.add_parser("prune", help="trim a stored tree to at most TARGET plans"))
    pr.add_argument("--target", type=int, required=True)
    pr.add_argument("--dest", required=True)
    run_args(sub.add_parser("metrics", help="ensemble diversity metrics"))
    run_args(sub.add_parser("compare", help="SHP versus ReCom at equal district budgets"))
    r = run_args(sub.add_parser("render", help="SVG map of a plan"))
    r.add_argument("--plan-id", type=int, help="row of plans.csv; default is the most compact plan")
    r.add_argument("--output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "synth":
            return cmd_synth(args)
        if args.config:
            cfg = load_config(args.config)
        else:
            cfg = RunConfig()
            saved = Path(args.out or cfg.out_dir) / "config.yaml"
            if args.command != "generate" and saved.exists():
                cfg = load_config(saved)
        cfg = _apply_overrides(cfg, args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "optimize":
            return cmd_optimize(cfg)
        if args.command == "prune":
            return cmd_prune(cfg, args.target, args.dest)
        if args.command == "metrics":
            return cmd_metrics(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_render(cfg, args.plan_id, args.output)
    except NoFeasibleRootError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverLimitError as exc:
        print(f"error: solver limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (InstanceError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

import json

import numpy as np
import pytest
import yaml

from shpdistrict.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, load_plans, main
from shpdistrict.compare import Comparison, MethodSample
from shpdistrict.config import TEMPLATE, RunConfig, config_from_dict, config_to_dict, load_config, save_config
from shpdistrict.geo_graph import ProblemSpec, load_instance
from shpdistrict.render import boxplot_svg, palette, plan_svg
from shpdistrict.store import file_hash, load_columns, load_tree, read_csv, save_columns, save_tree
from shpdistrict.tree import collect_columns, count_plans, enumerate_plans

from helpers import random_tree


# --- store --------------------------------------------------------------------


def test_column_store_round_trip(tmp_path):
    t = random_tree(np.random.default_rng(0), 5, 2, 2)
    cols = collect_columns(t)
    for c in cols.columns:
        c.metrics["cost"] = np.float64(0.25) * c.column_id
        if c.column_id % 2:
            c.metrics["only_odd"] = 1
    save_columns(cols, 10, tmp_path)
    back, n = load_columns(tmp_path)
    assert n == 10
    assert [c.blocks for c in back.columns] == [c.blocks for c in cols.columns]
    assert [c.leaf_ids for c in back.columns] == [c.leaf_ids for c in cols.columns]
    assert back.leaf_to_column == cols.leaf_to_column
    assert back.duplicate_rate == pytest.approx(cols.duplicate_rate)
    assert back.columns[2].metrics == {"cost": 0.5}
    assert back.columns[3].metrics == {"cost": 0.75, "only_odd": 1.0}


def test_column_store_rejects_foreign_file(tmp_path):
    (tmp_path / "columns.bin").write_bytes(b"NOTMAGIC" + bytes(16))
    (tmp_path / "columns.csv").write_text("column_id\n")
    with pytest.raises(ValueError):
        load_columns(tmp_path)


def test_tree_store_round_trip(tmp_path):
    t = random_tree(np.random.default_rng(1), 6, 2, 2)
    save_tree(t, tmp_path / "t.json")
    back = load_tree(tmp_path / "t.json")
    assert count_plans(back) == count_plans(t)
    assert sorted(enumerate_plans(back)) == sorted(enumerate_plans(t))


# --- config -------------------------------------------------------------------


def test_template_parses_to_defaults(monkeypatch):
    monkeypatch.delenv("SHPDISTRICT_OUT", raising=False)
    assert config_to_dict(config_from_dict(yaml.safe_load(TEMPLATE))) == config_to_dict(RunConfig())


def test_config_round_trip(tmp_path):
    cfg = config_from_dict({"problem": {"k": 6}, "tree": {"w_root": 9, "width_by_capacity": {2: 32},
                                                          "centers": {"z_max": 2}},
                            "curve": {"kind": "table", "points": [[0, 0], [1, 1]]}, "seed": 4})
    save_config(cfg, tmp_path / "c.yaml")
    back = load_config(tmp_path / "c.yaml")
    assert config_to_dict(back) == config_to_dict(cfg)
    assert back.tree_config().seed == 4 and back.tree.centers.z_max == 2


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        config_from_dict({"problem": {"districts": 4}})
    with pytest.raises(ValueError):
        config_from_dict({"bogus": 1})


def test_out_dir_from_environment(monkeypatch):
    monkeypatch.setenv("SHPDISTRICT_OUT", "/tmp/elsewhere")
    assert RunConfig().out_dir == "/tmp/elsewhere"


# --- render and compare -------------------------------------------------------


def test_palette_and_svg_are_deterministic():
    from shpdistrict.geo_graph import grid_graph
    g = grid_graph(4, 2)
    plan = [{0, 1, 4, 5}, {2, 3, 6, 7}]
    a, b = plan_svg(g, plan), plan_svg(g, plan)
    assert a == b and a.startswith("<svg") and a.count("<rect") >= 8
    assert len(set(palette(6))) == 6
    box = boxplot_svg({"x": [1, 2, 3], "y": [2.0]}, "t")
    assert box.startswith("<svg") and "</svg>" in box


def test_method_compared_with_itself_is_not_narrower():
    m = MethodSample("shp", np.array([0.4, 0.6]), np.array([1.0, 2.0]), 5, (0.4, 0.6))
    cmp = Comparison(m, m, 3)
    assert cmp.shp_range_wider
    assert len(list(cmp.rows())) == 4
    assert cmp.summary()["shp_seat_range"] == [0.4, 0.6]


# --- command line -------------------------------------------------------------


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    inst = root / "inst.json"
    assert main(["synth", str(inst), "--width", "8", "--height", "6", "--seed", "2"]) == EXIT_OK
    out = root / "run"
    code = main(["generate", "--instance", str(inst), "-o", str(out), "--k", "4", "--epsilon-p", "0.1",
                 "--w-root", "3", "--w", "2", "--seed", "1"])
    assert code == EXIT_OK
    assert main(["optimize", "-o", str(out)]) == EXIT_OK
    return out


def test_generate_outputs(run_dir):
    for name in ("config.yaml", "instance.json", "tree.json", "columns.bin", "columns.csv",
                 "generation_stats.csv", "generation_summary.json"):
        assert (run_dir / name).exists(), name
    summary = json.loads((run_dir / "generation_summary.json").read_text())
    tree = load_tree(run_dir / "tree.json")
    assert int(summary["plans"]) == count_plans(tree)
    assert summary["leaves"] == len(tree.leaves())
    stats = read_csv(run_dir / "generation_stats.csv")
    assert sum(r["status"] == "feasible" for r in stats) == summary["partition_problems_solved"]
    assert {r["status"] for r in stats} <= {"feasible", "infeasible", "limit", "invalid"}


def test_optimize_outputs_are_feasible(run_dir):
    graph, _ = load_instance(run_dir / "instance.json")
    columns, _ = load_columns(run_dir)
    spec = ProblemSpec(4, 0.1, graph.total_population)
    plans = load_plans(run_dir, graph, columns, spec)
    rows = read_csv(run_dir / "plans.csv")
    assert len(plans) == len(rows) >= 1
    for row in rows:
        assert float(row["objective"]) >= 0
    summary = json.loads((run_dir / "optimize_summary.json").read_text())
    assert summary["seats_min"] <= summary["seats_max"]
    assert summary["cut_edges_min"] <= summary["cut_edges_max"]


def test_metrics_compare_render_prune(run_dir, tmp_path):
    assert main(["metrics", "-o", str(run_dir)]) == EXIT_OK
    assert len(read_csv(run_dir / "metrics.csv")) == 1
    assert main(["compare", "-o", str(run_dir)]) == EXIT_OK
    summary = json.loads((run_dir / "compare_summary.json").read_text())
    assert summary["district_budget_recom"] <= summary["district_budget_shp"]
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(["render", "-o", str(run_dir), "--output", str(a)]) == EXIT_OK
    assert main(["render", "-o", str(run_dir), "--output", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert main(["render", "-o", str(run_dir), "--plan-id", "0", "--output", str(a)]) == EXIT_OK
    dest = tmp_path / "pruned"
    assert main(["prune", "-o", str(run_dir), "--target", "1", "--dest", str(dest)]) == EXIT_OK
    assert count_plans(load_tree(dest / "tree.json")) == 1


def test_determinism_across_workers(run_dir, tmp_path):
    inst = run_dir / "instance.json"
    hashes = []
    for workers in (1, 3):
        out = tmp_path / f"w{workers}"
        args = ["--instance", str(inst), "-o", str(out), "--k", "4", "--epsilon-p", "0.1", "--w-root", "3",
                "--w", "2", "--seed", "1", "--workers", str(workers)]
        assert main(["generate", *args]) == EXIT_OK
        assert main(["optimize", *args]) == EXIT_OK
        hashes.append(file_hash(out / "columns.bin", out / "columns.csv", out / "plans.csv"))
    assert hashes[0] == hashes[1]
    assert file_hash(run_dir / "columns.bin") == file_hash(tmp_path / "w1" / "columns.bin")


def test_exit_codes(tmp_path):
    assert main(["optimize", "-o", str(tmp_path / "missing")]) == EXIT_INVALID
    assert main(["render", "-o", str(tmp_path / "missing")]) == EXIT_INVALID
    inst = tmp_path / "tiny.json"
    assert main(["synth", str(inst), "--width", "4", "--height", "1", "--urban-centers", "0"]) == EXIT_OK
    # four equal blocks cannot be split into three districts within 1%
    code = main(["generate", "--instance", str(inst), "-o", str(tmp_path / "bad"), "--k", "3",
                 "--epsilon-p", "0.01", "--w-root", "1", "--w", "1"])
    assert code == EXIT_INFEASIBLE
    with pytest.raises(SystemExit):
        main(["nope"])

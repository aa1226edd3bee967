import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shpdistrict.solver import (BinaryLinearProgram, SolverLimitError, brute_force, export_lp, import_lp,
                                linearize_abs, solve_exact)


def random_program(rng, n=None):
    n = int(rng.integers(1, 11)) if n is None else n
    prog = BinaryLinearProgram(n, 0, rng.integers(-5, 6, size=n).astype(float))
    for r in range(int(rng.integers(0, 6))):
        support = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        row = {int(j): float(rng.integers(-4, 5)) for j in support}
        rel = ["<=", "=", ">="][int(rng.integers(3))]
        rhs = float(rng.integers(-3, 6))
        prog.add_constraint(row, rel, rhs, f"r{r}")
    if rng.random() < 0.3:
        prog.fix(int(rng.integers(n)), float(rng.integers(2)))
    return prog


@pytest.mark.parametrize("backend", ["bnb", "highs"])
def test_random_programs_match_brute_force(backend):
    rng = np.random.default_rng(2024)
    feasible = 0
    for _ in range(220):
        prog = random_program(rng)
        best, _ = brute_force(prog)
        out = solve_exact(prog, backend=backend)
        if best is None:
            assert out.status == "infeasible"
            continue
        feasible += 1
        assert out.optimal
        assert out.objective == pytest.approx(best, abs=1e-6)
        assert prog.is_feasible(out.x)
    assert feasible >= 50


def test_set_partition_example():
    # cover {a,b,c} with subsets {a,b}=1, {c}=1, {a}=1, {b,c}=3
    cols = [{0, 1}, {2}, {0}, {1, 2}]
    costs = [1.0, 1.0, 1.0, 3.0]
    prog = BinaryLinearProgram(4, 0, np.array(costs))
    for e in range(3):
        prog.add_constraint({j: 1.0 for j, c in enumerate(cols) if e in c}, "=", 1.0)
    out = solve_exact(prog)
    assert out.objective == pytest.approx(2.0)
    assert out.x.tolist() == [1, 1, 0, 0]


def test_infeasible_cover():
    prog = BinaryLinearProgram(2, 0, np.ones(2))
    prog.add_constraint({0: 1.0, 1: 1.0}, "=", 1.0)
    prog.add_constraint({0: 1.0}, "=", 1.0)
    prog.add_constraint({1: 1.0}, "=", 1.0)
    assert solve_exact(prog).status == "infeasible"
    assert solve_exact(prog, backend="highs").status == "infeasible"


def test_linearize_abs_examples():
    # choose exactly one of two items with signed values -3 and 2: |.| minimum is 2
    prog = BinaryLinearProgram(2)
    prog.add_constraint({0: 1.0, 1: 1.0}, "=", 1.0)
    lin = linearize_abs(prog, [-3.0, 2.0])
    out = solve_exact(lin)
    assert out.objective == pytest.approx(2.0)
    assert out.x[:2].tolist() == [0, 1]
    # flipping every sign leaves the absolute value unchanged
    assert solve_exact(linearize_abs(prog, {0: 3.0, 1: -2.0})).objective == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=2, max_size=7), st.integers(1, 3))
def test_linearize_abs_matches_enumeration(c, pick):
    n = len(c)
    pick = min(pick, n)
    prog = BinaryLinearProgram(n)
    prog.add_constraint({j: 1.0 for j in range(n)}, "=", float(pick))
    best = min(abs(sum(c[j] for j in sub)) for sub in itertools.combinations(range(n), pick))
    out = solve_exact(linearize_abs(prog, np.array(c, dtype=float)))
    assert out.objective == pytest.approx(best, abs=1e-7)


def test_brute_force_rejects_continuous():
    with pytest.raises(ValueError):
        brute_force(BinaryLinearProgram(1, 1))


def test_node_limit_reports_limit():
    rng = np.random.default_rng(5)
    n = 24
    w = rng.integers(10, 40, size=n).astype(float)
    prog = BinaryLinearProgram(n, 0, -rng.integers(10, 40, size=n).astype(float))
    prog.add_constraint({j: w[j] for j in range(n)}, "<=", float(w.sum() / 2) + 0.5)
    out = solve_exact(prog, node_limit=1)
    assert out.status in ("limit", "optimal")
    if out.status == "limit":
        assert out.objective is None or out.objective >= solve_exact(prog).objective - 1e-9


def test_solver_limit_error_is_runtime_error():
    assert issubclass(SolverLimitError, RuntimeError)


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve_exact(BinaryLinearProgram(1), backend="cplex")


def test_lp_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    for t in range(30):
        prog = random_program(rng)
        if t % 3 == 0:
            prog = linearize_abs(prog, rng.integers(-3, 4, size=prog.num_vars).astype(float))
        path = tmp_path / f"p{t}.lp"
        export_lp(prog, path)
        back = import_lp(path)
        assert (back.num_binary, back.num_continuous) == (prog.num_binary, prog.num_continuous)
        assert np.array_equal(back.objective, prog.objective)
        assert np.array_equal(back.lower, prog.lower) and np.array_equal(back.upper, prog.upper)
        strip = lambda rows: [({j: a for j, a in r.items() if a != 0}, rel, rhs) for r, rel, rhs in rows]
        assert strip(back.constraints) == strip(prog.constraints)
        a, b = solve_exact(prog), solve_exact(back)
        assert a.status == b.status
        if a.optimal:
            assert a.objective == pytest.approx(b.objective)


def test_lp_round_trip_empty_program(tmp_path):
    prog = BinaryLinearProgram(0)
    export_lp(prog, tmp_path / "e.lp")
    back = import_lp(tmp_path / "e.lp")
    assert back.num_vars == 0 and back.constraints == []

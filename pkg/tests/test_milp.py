import stat
import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddro.milp import (
    GE,
    INF,
    LE,
    BackendError,
    CommandBackend,
    Expr,
    HighsBackend,
    LpFileBackend,
    MilpModel,
    ModelError,
    ScipyBackend,
    SolveReport,
    export_lp,
    get_backend,
    lp_safe_names,
    lp_text,
    solve,
    solve_enumerated,
)


def knapsack():
    m = MilpModel("knap")
    w = [3.0, 4.0, 5.0, 2.0]
    v = [4.0, 5.0, 7.0, 3.0]
    xs = [m.add_var(f"x[{i + 1}]", binary=True) for i in range(4)]
    m.add_row("cap", Expr({x: wi for x, wi in zip(xs, w)}), LE, 9.0)
    m.set_objective(Expr({x: -vi for x, vi in zip(xs, v)}))
    return m


class TestModel:
    def test_min_x_at_least_three(self):
        m = MilpModel()
        x = m.add_var("x", -INF, INF)
        m.add_row("c", Expr.var(x), GE, 3.0)
        m.set_objective(Expr.var(x))
        rep = solve(m)
        assert rep.status == "optimal" and rep.objective == pytest.approx(3.0)

    def test_expression_constant_moves_to_rhs(self):
        m = MilpModel()
        x = m.add_var("x")
        m.add_row("c", Expr({x: 1.0}, const=2.0), LE, 5.0)
        assert m.row_rhs[0] == 3.0

    def test_duplicate_names_rejected(self):
        m = MilpModel()
        m.add_var("x")
        with pytest.raises(ModelError):
            m.add_var("x")

    def test_binary_bounds(self):
        m = MilpModel()
        b = m.add_var("b", binary=True)
        assert (m.lb[b], m.ub[b]) == (0.0, 1.0)

    def test_validation_catches_nan(self):
        m = MilpModel()
        x = m.add_var("x")
        m.add_row("c", Expr({x: float("nan")}), LE, 1.0)
        assert m.validate()
        with pytest.raises(ModelError):
            solve(m)

    def test_knapsack(self):
        rep = solve(knapsack(), gap=0.0)
        assert rep.objective == pytest.approx(-12.0)

    def test_infeasible(self):
        m = MilpModel()
        x = m.add_var("x", 0.0, 1.0)
        m.add_row("c", Expr.var(x), GE, 2.0)
        m.set_objective(Expr.var(x))
        assert solve(m).status == "infeasible"

    def test_max_violation(self):
        m = knapsack()
        assert m.max_violation(np.array([1.0, 1.0, 1.0, 0.0])) == pytest.approx(3.0)
        assert m.max_violation(np.array([1.0, 0.0, 1.0, 0.0])) == 0.0


class TestReport:
    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
    def test_gap_arithmetic(self, inc, bnd):
        r = SolveReport("optimal", inc, bnd)
        assert r.gap == pytest.approx(abs(inc - bnd) / max(1.0, abs(inc)))

    def test_gap_missing(self):
        assert SolveReport("limit", None, 3.0).gap is None

    def test_boundary_active(self):
        m = MilpModel()
        x = m.add_var("dual", 0.0, 10.0)
        m.tracked_bounds[x] = 10.0
        m.add_row("c", Expr.var(x), GE, 9.95)
        m.set_objective(Expr.var(x))
        assert solve(m).boundary_active == ["dual"]


class TestExport:
    def test_names_are_safe_and_reversible(self):
        names = ["x[1,2]", "y|a b", "x[1,2]_", "3start"]
        mp = lp_safe_names(names)
        assert len(set(mp.values())) == len(names)
        assert all(" " not in v and "[" not in v and not v[0].isdigit() for v in mp.values())

    def test_deterministic_bytes(self, tmp_path):
        export_lp(knapsack(), tmp_path / "a.lp")
        export_lp(knapsack(), tmp_path / "b.lp")
        assert (tmp_path / "a.lp").read_bytes() == (tmp_path / "b.lp").read_bytes()

    def test_sections(self):
        text = lp_text(knapsack())
        for head in ("Minimize", "Subject To", "Bounds", "Binary", "End"):
            assert head in text

    def test_single_variable_file(self, tmp_path):
        import highspy

        m = MilpModel()
        x = m.add_var("x", -INF, INF)
        m.add_row("c", Expr.var(x), GE, 1.0)
        m.set_objective(Expr.var(x))
        export_lp(m, tmp_path / "one.lp")
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.readModel(str(tmp_path / "one.lp"))
        h.run()
        assert h.getInfo().objective_function_value == pytest.approx(1.0)

    @pytest.mark.parametrize("backend", ["scipy", "lpfile"])
    def test_backends_agree(self, backend):
        a = solve(knapsack(), gap=0.0, backend="highs")
        b = solve(knapsack(), gap=0.0, backend=backend)
        assert b.objective == pytest.approx(a.objective, rel=1e-6)
        np.testing.assert_allclose(b.x, a.x, atol=1e-6)


FAKE_SOLVER = """\
#!{python}
import sys, highspy
args = dict(zip(sys.argv[1::2], sys.argv[2::2]))
h = highspy.Highs()
h.setOptionValue("output_flag", False)
h.readModel(args["--model_file"])
h.run()
h.writeSolution(args["--solution_file"], 0)
"""


class TestBackends:
    def test_named(self):
        assert isinstance(get_backend("highs"), HighsBackend)
        assert isinstance(get_backend("scipy"), ScipyBackend)
        assert isinstance(get_backend("lpfile"), LpFileBackend)

    def test_missing(self):
        with pytest.raises(BackendError):
            get_backend("no-such-solver-anywhere")

    def test_external_executable(self, tmp_path):
        exe = tmp_path / "fake_highs"
        exe.write_text(FAKE_SOLVER.format(python=sys.executable))
        exe.chmod(exe.stat().st_mode | stat.S_IEXEC)
        backend = get_backend(str(exe))
        assert isinstance(backend, CommandBackend)
        rep = solve(knapsack(), gap=0.0, backend=backend)
        assert rep.status == "optimal"
        assert rep.objective == pytest.approx(-12.0)

    def test_crashing_executable(self, tmp_path):
        exe = tmp_path / "crash"
        exe.write_text(textwrap.dedent("""\
            #!/bin/sh
            exit 7
            """))
        exe.chmod(exe.stat().st_mode | stat.S_IEXEC)
        with pytest.raises(BackendError):
            solve(knapsack(), backend=CommandBackend(str(exe)))

    def test_time_limit_reports_limit_status(self):
        rng = np.random.default_rng(0)
        m = MilpModel()
        n = 60
        xs = [m.add_var(f"x{i}", binary=True) for i in range(n)]
        w = rng.integers(10, 60, n).astype(float)
        for k in range(6):
            m.add_row(f"c{k}", Expr({x: float(v) for x, v in zip(xs, rng.integers(10, 60, n))}), LE,
                      float(w.sum() / 3))
        m.set_objective(Expr({x: -float(v) for x, v in zip(xs, w)}))
        rep = solve(m, gap=0.0, time_limit=0.05)
        assert rep.status in ("limit", "optimal")
        if rep.status == "limit":
            assert rep.has_incumbent or rep.objective is None


class TestEnumeration:
    def test_matches_direct_solve(self):
        m = knapsack()
        a = solve(m, gap=0.0)
        b = solve_enumerated(m, [0, 1], gap=0.0)
        assert b.status == "optimal"
        assert b.objective == pytest.approx(a.objective)
        assert b.bound <= b.objective + 1e-9

    def test_model_left_untouched(self):
        m = knapsack()
        solve_enumerated(m, [0, 2], gap=0.0)
        assert m.lb == [0.0] * 4 and m.ub == [1.0] * 4

    def test_all_assignments_infeasible(self):
        m = MilpModel()
        z = m.add_var("z", binary=True)
        x = m.add_var("x", 0.0, 1.0)
        m.add_row("c", Expr({x: 1.0, z: 1.0}), GE, 3.0)
        m.set_objective(Expr.var(x))
        assert solve_enumerated(m, [z]).status == "infeasible"

    def test_some_assignments_infeasible(self):
        m = MilpModel()
        z = m.add_var("z", binary=True)
        x = m.add_var("x", 0.0, 1.0)
        m.add_row("c", Expr({x: 1.0, z: 1.0}), GE, 1.5)
        m.set_objective(Expr({x: 1.0, z: 2.0}))
        rep = solve_enumerated(m, [z], gap=0.0)
        assert rep.objective == pytest.approx(2.5)

    def test_continuous_rejected(self):
        m = knapsack()
        y = m.add_var("y")
        with pytest.raises(ModelError):
            solve_enumerated(m, [y])

    def test_exhausted_budget(self):
        rep = solve_enumerated(knapsack(), [0, 1, 2], time_limit=0.0)
        assert rep.status == "limit" and rep.bound is None


def test_exit_codes_follow_status():
    from ddro.cli import EXIT

    assert (EXIT["optimal"], EXIT["infeasible"], EXIT["limit"]) == (0, 2, 3)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_two_stage, switching_problem
from ddro.milp import INF, Expr, MilpModel, SolveReport, lp_text, solve
from ddro.policy import InformationStructure, check_binary_admissibility
from ddro.reformulation import (
    BigMConfig,
    BoundError,
    NoIncumbentError,
    ReformulationConfig,
    bound_experiment,
    dualize,
    dualize_multistage,
    dualize_two_stage,
    extract_policy,
    glover_linearize,
)
from ddro.studies import (build_design_problem, build_planning_problem, equidistant_breakpoints,
                          load_design, load_planning, switching_breakpoints)
from ddro.verify import inner_max_check


def product_range(s_val, z_val, lo, hi):
    """Smallest and largest feasible v with s and z pinned."""
    out = []
    for sense in (1.0, -1.0):
        m = MilpModel()
        s = m.add_var("s", s_val, s_val)
        z = m.add_var("z", binary=True)
        m.set_bounds(z, float(z_val), float(z_val))
        v = glover_linearize(m, "v", Expr.var(s), lo, hi, z)
        m.set_objective(Expr({v: sense}))
        rep = solve(m, gap=0.0)
        assert rep.status == "optimal"
        out.append(rep.x[v])
    return out


class TestGlover:
    @pytest.mark.parametrize("s,z,expected", [(3.5, 1, 3.5), (3.5, 0, 0.0), (-2.0, 1, -2.0), (10.0, 0, 0.0)])
    def test_examples(self, s, z, expected):
        lo_v, hi_v = product_range(s, z, -5.0, 10.0)
        assert lo_v == pytest.approx(expected, abs=1e-9)
        assert hi_v == pytest.approx(expected, abs=1e-9)

    @given(st.floats(-50, 50), st.floats(0, 60), st.floats(0, 1), st.integers(0, 1))
    def test_product_is_exact(self, lo, width, frac, z):
        hi = lo + width
        s = lo + frac * width
        lo_v, hi_v = product_range(s, z, lo, hi)
        assert lo_v == pytest.approx(s * z, abs=1e-7)
        assert hi_v == pytest.approx(s * z, abs=1e-7)

    def test_infinite_bound_rejected(self):
        m = MilpModel()
        s = m.add_var("s", -INF, INF)
        z = m.add_var("z", binary=True)
        with pytest.raises(BoundError):
            glover_linearize(m, "v", Expr.var(s), 0.0, INF, z)

    def test_four_rows(self):
        m = MilpModel()
        s = m.add_var("s")
        z = m.add_var("z", binary=True)
        glover_linearize(m, "v", Expr.var(s), 0.0, 1.0, z)
        assert m.num_rows == 4


class TestSwitchingInstance:
    @pytest.mark.parametrize("builder", [dualize_two_stage, dualize_multistage])
    def test_optimum_is_six(self, switching, builder):
        art = builder(switching)
        rep = solve(art.model, gap=1e-6)
        assert rep.status == "optimal"
        assert rep.objective == pytest.approx(6.0, abs=1e-6)

    def test_policy_certifies(self, switching):
        art = dualize(switching)
        rep = solve(art.model, gap=1e-6)
        pol = extract_policy(art, rep)
        assert check_binary_admissibility(pol, switching).admissible
        cert = inner_max_check(switching, pol)
        assert cert.certified and cert.max_slack <= 1e-6

    def test_continuous_recourse_is_infeasible(self, switching):
        art = dualize(switching, config=ReformulationConfig(recourse="continuous"))
        assert solve(art.model).status == "infeasible"

    def test_no_breakpoint_is_infeasible(self):
        p = switching_problem(bps=())
        assert solve(dualize(p).model).status == "infeasible"

    def test_no_incumbent(self):
        p = switching_problem(bps=())
        art = dualize(p)
        with pytest.raises(NoIncumbentError):
            extract_policy(art, solve(art.model))

    def test_step_down_off_shrinks_binaries(self, switching):
        a = dualize(switching).model.stats()["binary"]
        b = dualize(switching, config=ReformulationConfig(step_down=False)).model.stats()["binary"]
        assert b < a

    def test_step_down_off_cannot_switch_unit_off(self, switching):
        # unit 1 must turn off at the breakpoint, which needs a downward step
        art = dualize(switching, config=ReformulationConfig(step_down=False))
        assert solve(art.model, gap=1e-6).status == "infeasible"


@pytest.fixture(scope="module")
def design_dd():
    data = load_design().case_b().with_(variant="dd", tau=0.5)
    p = build_design_problem(data)
    return p, switching_breakpoints(data, 0.5, "dd")


class TestModelShape:
    def test_deterministic_text(self):
        p = build_design_problem(load_design().case_b())
        bp = equidistant_breakpoints(p, 2)
        assert lp_text(dualize(p, bp).model) == lp_text(dualize(p, bp).model)

    def test_manifest_counts(self, design_dd):
        art = dualize(*design_dd)
        man = art.manifest()
        assert sum(man["rows_per_family"].values()) == art.model.num_rows
        assert man["stats"]["variables"] == art.model.num_vars
        assert set(man["bound_registry"].values()) == {1e4}

    def test_default_bigm(self, design_dd):
        cfg = ReformulationConfig(bigm=BigMConfig(default=50.0))
        art = dualize(*design_dd, config=cfg)
        assert set(art.manifest()["bound_registry"].values()) == {50.0}

    def test_rebuild_changes_bounds_only(self, switching):
        art = dualize(switching)
        new = art.rebuild(BigMConfig(default=7.0))
        assert new.model.num_vars == art.model.num_vars and new.model.num_rows == art.model.num_rows

    def test_full_window_matches_unrestricted(self):
        p = build_planning_problem(load_planning(T=1))
        bp = equidistant_breakpoints(p, 1)
        a = dualize(p, bp, ReformulationConfig(recourse="continuous"))
        b = dualize(p, bp, ReformulationConfig(recourse="continuous", info=InformationStructure(p.T)))
        assert lp_text(a.model) == lp_text(b.model)

    def test_narrow_window_has_fewer_columns(self):
        p = build_planning_problem(load_planning(T=1))
        bp = equidistant_breakpoints(p, 1)
        a = dualize(p, bp, ReformulationConfig(recourse="continuous"))
        b = dualize(p, bp, ReformulationConfig(recourse="continuous", info=InformationStructure(0)))
        assert b.model.num_vars < a.model.num_vars


class TestBounds:
    def test_zero_incumbent_zeroes_tracked_duals(self, design_dd):
        art = dualize(*design_dd)
        assert art.model.tracked_bounds
        fake = SolveReport("optimal", 0.0, 0.0, x=np.zeros(art.model.num_vars))
        name_to_idx = {n: i for i, n in enumerate(art.model.var_names)}
        bigm = BigMConfig(per_var={art.model.var_names[k]: 0.0 for k in art.model.tracked_bounds})
        new = art.rebuild(bigm)
        for k in art.model.tracked_bounds:
            assert new.model.ub[name_to_idx[art.model.var_names[k]]] == 0.0
        with pytest.raises(NoIncumbentError):
            bound_experiment(art, SolveReport("infeasible", None, None), "L")
        assert fake.has_incumbent

    @pytest.mark.parametrize("rule", ["L", "2L", "2L+0.01"])
    def test_rules_keep_optimum(self, design_dd, rule):
        art = dualize(*design_dd)
        rep = solve(art.model, gap=1e-6)
        rep2, _ = bound_experiment(art, rep, rule, gap=1e-6)
        assert rep2.objective == pytest.approx(rep.objective, abs=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_random_instances_certify(seed):
    p = random_two_stage(np.random.default_rng(seed))
    art = dualize(p)
    rep = solve(art.model, gap=1e-6)
    assert rep.status == "optimal"
    cert = inner_max_check(p, extract_policy(art, rep))
    assert cert.max_slack <= 1e-6


@given(st.integers(0, 2**32 - 1))
def test_two_paths_agree(seed):
    p = random_two_stage(np.random.default_rng(seed))
    a = solve(dualize_two_stage(p).model, gap=1e-7)
    b = solve(dualize_multistage(p).model, gap=1e-7)
    assert a.status == b.status == "optimal"
    assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-6)

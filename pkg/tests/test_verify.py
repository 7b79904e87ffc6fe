import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from test_policy import XI, switching_policy
from ddro.structure import CONSTANT
from ddro.studies import load_design
from ddro.uncertainty import SupportError
from ddro.verify import (
    binding_points,
    case_b_closed_form,
    certify,
    inner_max_check,
    scenario_grid,
    simulate_policy,
    worst_simulated,
)


class TestInnerMax:
    def test_exact_policy_certifies(self):
        p, c = switching_policy()
        rep = inner_max_check(p, c)
        assert rep.certified
        assert rep.max_slack == pytest.approx(0.0, abs=1e-7)

    def test_worst_case_sits_at_the_breakpoint(self):
        p, c = switching_policy()
        rep = inner_max_check(p, c)
        top = max((r for r in rep.rows if r.value is not None), key=lambda r: r.value)
        assert top.point[XI] == pytest.approx(3.0)

    def test_perturbed_coefficient_is_caught(self):
        p, c = switching_policy()
        c.Xbar[(2, XI)] = c.Xbar[(2, XI)] + np.array([[10.0, 0.0], [0.0, 0.0]])
        rep = inner_max_check(p, c)
        assert not rep.certified and rep.max_slack > 1.0
        assert rep.violated()

    def test_too_small_objective_is_caught(self):
        p, c = switching_policy()
        c.x1 = np.array([5.5])
        rep = inner_max_check(p, c)
        assert rep.max_slack == pytest.approx(0.5, abs=1e-7)

    def test_binary_range_rows(self):
        p, c = switching_policy()
        c.Yddot[(2, XI)] = np.zeros((2, 1))
        c.Ydot[(2, XI)] = np.array([[1.0], [1.0]])
        names = {r.name for r in inner_max_check(p, c).violated()}
        assert "yhi[2,1]" in names

    def test_certify_reports_admissibility(self):
        p, c = switching_policy()
        rep, adm = certify(p, c)
        assert rep.certified and adm.admissible

    def test_table_lists_every_row(self):
        p, c = switching_policy()
        rep = inner_max_check(p, c)
        assert len(rep.table().splitlines()) == len(rep.rows) + 1

    def test_binding_points_inside_support(self):
        p, c = switching_policy()
        for x in binding_points(inner_max_check(p, c), p):
            assert 1.0 <= x[1] <= 5.0


class TestSimulation:
    @given(st.floats(1.0, 5.0))
    def test_cost_never_exceeds_worst_case(self, xi):
        p, c = switching_policy()
        r = simulate_policy(p, c, [1.0, xi])
        assert not r.violations
        assert r.cost <= 6.0 + 1e-9

    def test_known_costs(self):
        p, c = switching_policy()
        assert simulate_policy(p, c, [1.0, 2.0]).cost == pytest.approx(4.0)
        assert simulate_policy(p, c, [1.0, 4.0]).cost == pytest.approx(4.0)
        assert simulate_policy(p, c, [1.0, 3.0 - 1e-9]).cost == pytest.approx(6.0)

    def test_out_of_support(self):
        p, c = switching_policy()
        with pytest.raises(SupportError):
            simulate_policy(p, c, [1.0, 5.5])

    def test_wrong_length(self):
        p, c = switching_policy()
        with pytest.raises(ValueError):
            simulate_policy(p, c, [1.0])

    def test_grid_has_breakpoint_and_left_limit(self):
        p, c = switching_policy()
        vals = sorted(x[1] for x in scenario_grid(p, c, n_random=0))
        assert vals[0] == 1.0 and vals[-1] == 5.0 and 3.0 in vals
        assert any(2.99 < v < 3.0 for v in vals)

    def test_grid_worst_matches_certificate(self):
        p, c = switching_policy()
        worst, bad = worst_simulated(p, c, scenario_grid(p, c, n_random=200))
        assert not bad
        assert worst == pytest.approx(6.0, abs=1e-5)

    def test_constant_column_first(self):
        p, c = switching_policy()
        assert p.structure.params()[0] == CONSTANT
        assert all(x[0] == 1.0 for x in scenario_grid(p, c, n_random=5))


class TestClosedForm:
    def test_box_value(self):
        d = load_design().case_b()
        assert case_b_closed_form(1.0, d, "fixed") == pytest.approx(465.0)

    def test_dd_value(self):
        d = load_design().case_b()
        assert case_b_closed_form(0.4, d, "dd") == pytest.approx(445.0)

    @given(st.floats(0.0, 1.0))
    def test_fixed_budget_is_more_conservative(self, tau):
        d = load_design().case_b()
        assert case_b_closed_form(tau, d, "fixed") >= case_b_closed_form(tau, d, "dd") - 1e-9

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            case_b_closed_form(0.5, load_design().case_b(), "box-ish")

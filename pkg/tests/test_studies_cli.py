import csv
import json

import numpy as np
import pytest

from ddro.cli import main
from ddro.problem import validate_problem
from ddro.structure import CONSTANT
from ddro.studies import (
    build_design_problem,
    build_planning_problem,
    capacity_stage,
    demand_stage,
    design_param,
    equidistant_breakpoints,
    equidistant_points,
    load_design,
    load_planning,
    planning_information,
    switching_breakpoints,
    tailored_breakpoints,
)
from ddro.uncertainty import Breakpoints


class TestDesign:
    def test_case_ranges(self):
        d = load_design()
        a, b = d.case_a(), d.case_b()
        assert (a.d_min, a.d_max) == (2.0, 290.0)
        assert (b.d_min, b.d_max) == (20.0, 110.0)

    def test_data_is_consistent(self):
        assert load_design().problems() == []
        assert load_design("design_8unit.json").problems() == []

    def test_bad_budget_reported(self):
        assert load_design().with_(tau=1.5).problems()

    def test_eight_unit_params(self):
        p = build_design_problem(load_design("design_8unit.json"))
        s = p.structure
        varying = [q for q in s.params() if q != CONSTANT and np.ptp(p.ddu.support(s, q)) > 0]
        assert len(varying) == 9

    @pytest.mark.parametrize("variant", ["box", "fixed", "dd"])
    def test_every_variant_is_well_formed(self, variant):
        p = build_design_problem(load_design().case_b().with_(variant=variant, tau=0.5))
        assert validate_problem(p) == []

    def test_demand_support(self):
        d = load_design().case_b()
        p = build_design_problem(d)
        assert p.ddu.support(p.structure, design_param(d, "d")) == (20.0, 110.0)


class TestPlanning:
    @pytest.mark.parametrize("T,stages", [(1, 3), (2, 5), (5, 11)])
    def test_stage_count(self, T, stages):
        assert build_planning_problem(load_planning(T=T)).T == stages

    def test_stage_numbering(self):
        assert [demand_stage(k) for k in (1, 2)] == [2, 4]
        assert [capacity_stage(k) for k in (1, 2)] == [3, 5]

    def test_penalty_scales(self):
        a, b = load_planning(gamma_bar=100.0), load_planning(gamma_bar=200.0)
        np.testing.assert_allclose(b.gamma, 2 * a.gamma)

    def test_information_windows(self):
        info = planning_information(2)
        assert info.allows(3, (3, 1)) and info.allows(3, (2, 1))
        assert not info.allows(4, (3, 1))


class TestBreakpoints:
    def test_single_midpoint(self):
        assert equidistant_points(0.0, 10.0, 1) == (5.0,)

    def test_equidistant_counts(self):
        p = build_design_problem(load_design("design_8unit.json"))
        assert equidistant_breakpoints(p, 2).total() == 18
        assert equidistant_breakpoints(p, 0).total() == 0

    def test_negative_count(self):
        with pytest.raises(ValueError):
            equidistant_breakpoints(build_design_problem(load_design()), -1)

    def test_tailored(self):
        d = load_design("design_8unit.json")
        bp = tailored_breakpoints(d)
        pts = bp.of(design_param(d, "d"))
        assert bp.total() == len(pts) == 15
        assert all(b > a for a, b in zip(pts, pts[1:]))
        assert d.d_min < pts[0] and pts[-1] < d.d_max

    def test_tailored_filters_and_merges(self):
        d = load_design().case_b()
        pts = tailored_breakpoints(d).of(design_param(d, "d"))
        assert len(set(pts)) == len(pts)
        assert all(20.0 < v < 110.0 for v in pts)

    def test_tailored_keeps_given_deviation_points(self):
        d = load_design().case_b()
        q = design_param(d, "c_hat", 1)
        bp = tailored_breakpoints(d, Breakpoints({q: (5.0,)}))
        assert bp.of(q) == (5.0,)

    def test_switching_points(self):
        d = load_design().case_b().with_(variant="dd", tau=0.4)
        pts = switching_breakpoints(d, 0.4, "dd").of(design_param(d, "d"))
        assert len(pts) >= 1 and all(20.0 < v < 110.0 for v in pts)


class TestCli:
    def test_build_writes_instance(self, tmp_path, capsys):
        out = tmp_path / "b.json"
        assert main(["build", "--instance", "design-b", "--out", str(out)]) == 0
        assert "stages=2" in capsys.readouterr().out
        assert json.loads(out.read_text())["stages"]

    def test_build_from_file(self, tmp_path):
        out = tmp_path / "p.json"
        main(["build", "--instance", "planning", "--periods", "1", "--out", str(out)])
        assert main(["build", "--instance", str(out)]) == 0

    def test_build_without_out_writes_nothing(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        main(["reformulate", "--breakpoints", "equidistant:0"])
        main(["build", "--instance", "design-b"])
        assert sorted(p.name for p in tmp_path.iterdir()) == ["model.json", "model.lp"]

    def test_reformulate_outputs(self, tmp_path):
        base = tmp_path / "m"
        assert main(["reformulate", "--breakpoints", "equidistant:1", "--out", str(base)]) == 0
        assert "Minimize" in (tmp_path / "m.lp").read_text()
        man = json.loads((tmp_path / "m.json").read_text())
        assert man["recourse"] == "mixed" and man["stats"]["binary"] > 0

    def test_solve_then_verify(self, tmp_path, capsys):
        pol = tmp_path / "pol.json"
        args = ["--instance", "design-b", "--variant", "dd", "--tau", "0.4", "--breakpoints", "switching"]
        assert main(["solve", *args, "--gap", "1e-6", "--policy-out", str(pol)]) == 0
        assert "445" in capsys.readouterr().out
        assert main(["verify", *args, "--policy", str(pol)]) == 0
        assert "certified" in capsys.readouterr().out

    def test_enumerated_solve_agrees(self, capsys):
        args = ["solve", "--instance", "planning", "--periods", "1", "--breakpoints", "equidistant:1",
                "--gap", "1e-6"]
        assert main(args) == 0
        direct = capsys.readouterr().out
        assert main([*args, "--enumerate-first-stage"]) == 0
        enum = capsys.readouterr().out
        get = lambda out: float(out.split("'objective': ")[1].split(",")[0])
        assert get(enum) == pytest.approx(get(direct), rel=1e-6)

    def test_infeasible_exit_code(self):
        assert main(["solve", "--instance", "design-a", "--recourse", "continuous",
                     "--breakpoints", "equidistant:0"]) == 2

    def test_vertices(self, capsys):
        assert main(["vertices", "--breakpoints", "equidistant:1"]) == 0
        assert capsys.readouterr().out.strip()

    def test_sweep_gamma_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep-gamma", "--periods", "1", "--values", "0", "300", "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert [float(r["gamma_bar"]) for r in rows] == [0.0, 300.0]
        assert all(r["status"] == "optimal" for r in rows)
        assert all(set(r["upgrades"]) <= {"0", "1"} for r in rows)

    def test_bad_breakpoint_spec(self):
        with pytest.raises(SystemExit):
            main(["solve", "--instance", "planning", "--periods", "1", "--breakpoints", "tailored"])

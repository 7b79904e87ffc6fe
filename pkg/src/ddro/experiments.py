"""Batch runs over the case studies; each returns one record per solve."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

from .milp import solve, solve_enumerated
from .policy import InformationStructure
from .reformulation import ReformulationConfig, bound_experiment, dualize, extract_policy
from .studies import (DesignData, build_design_problem, build_planning_problem,
                      equidistant_breakpoints, load_design, load_planning, planning_information,
                      switching_breakpoints, tailored_breakpoints)
from .verify import case_b_closed_form, inner_max_check


@dataclass
class RunRecord:
    experiment: str
    label: str
    status: str
    objective: float | None
    bound: float | None
    wall_time: float
    breakpoints: int
    variables: int
    binaries: int
    rows: int
    certified: bool | None = None
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d


def run_instance(experiment: str, label: str, problem, bp, config: ReformulationConfig, gap=0.01,
                 time_limit=None, backend=None, certify: bool = False, enumerate_first_stage: bool = False,
                 **extra):
    t0 = time.perf_counter()
    art = dualize(problem, bp, config)
    if enumerate_first_stage and len(art.y1):
        rep = solve_enumerated(art.model, art.y1, gap=gap, time_limit=time_limit, backend=backend)
    else:
        rep = solve(art.model, gap=gap, time_limit=time_limit, backend=backend)
    elapsed = time.perf_counter() - t0
    st = art.model.stats()
    cert = None
    if certify and rep.has_incumbent:
        cert = inner_max_check(problem, extract_policy(art, rep)).certified
    rec = RunRecord(experiment, label, rep.status, rep.objective, rep.bound, elapsed, bp.total(),
                    st["variables"], st["binary"], st["rows"], cert, dict(extra))
    return rec, art, rep


def design_cases(path: str = "design_3unit.json") -> dict[str, DesignData]:
    d = load_design(path)
    return {"A": d.case_a(), "B": d.case_b()}


def table1(n_breakpoints: int = 3, gap=0.01, time_limit=None, backend=None, certify=True):
    out = []
    for case, data in design_cases().items():
        p = build_design_problem(data)
        bp = equidistant_breakpoints(p, n_breakpoints)
        for mode in ("continuous", "mixed"):
            rec, _, _ = run_instance("table1", f"case {case} {mode}", p, bp,
                                     ReformulationConfig(recourse=mode), gap, time_limit, backend,
                                     certify=certify)
            out.append(rec)
    return out


def table2(counts=(0, 1, 2, 3, 4), tailored: bool = True, gap=0.01, time_limit=None, backend=None,
           step_down: bool = False):
    data = load_design("design_8unit.json").with_(variant="dd")
    p = build_design_problem(data)
    cfg = ReformulationConfig(recourse="mixed", step_down=step_down)
    runs = [(f"equidistant {n}/param", equidistant_breakpoints(p, n)) for n in counts]
    if tailored:
        runs.append(("tailored", tailored_breakpoints(data)))
    out = []
    for label, bp in runs:
        out.append(run_instance("table2", label, p, bp, cfg, gap, time_limit, backend)[0])
    return out


def fig6(taus=None, variants=("fixed", "dd"), gap=1e-4, time_limit=None, backend=None):
    taus = taus if taus is not None else [round(0.1 * k, 1) for k in range(1, 11)]
    base = load_design().case_b()
    out = []
    for variant in variants:
        for tau in taus:
            data = base.with_(variant=variant, tau=tau)
            p = build_design_problem(data)
            bp = switching_breakpoints(data, tau, variant)
            rec, _, _ = run_instance("fig6", f"{variant} tau={tau}", p, bp,
                                     ReformulationConfig(recourse="mixed"), gap, time_limit, backend,
                                     variant=variant, tau=tau,
                                     closed_form=case_b_closed_form(tau, data, variant))
            out.append(rec)
    return out


def planning_run(T: int, mode: str, gamma_bar: float = 100.0, n_breakpoints: int = 1, gap=0.01,
                 time_limit=None, backend=None, info: InformationStructure | None = None,
                 enumerate_first_stage: bool = False):
    data = load_planning(T=T, gamma_bar=gamma_bar)
    p = build_planning_problem(data)
    bp = equidistant_breakpoints(p, n_breakpoints)
    cfg = ReformulationConfig(recourse=mode, info=info or planning_information(T))
    return run_instance("table3", f"T={T} {mode}", p, bp, cfg, gap, time_limit, backend,
                        enumerate_first_stage=enumerate_first_stage, T=T, gamma_bar=gamma_bar)


def upgrade_mask(art, rep) -> str:
    """First-stage upgrade decisions as a 0/1 string."""
    if not rep.has_incumbent:
        return ""
    z = [int(round(rep.x[k])) for k in art.y1]
    return "".join(str(v) for v in z)


def table3(periods=(2, 3), modes=("continuous", "mixed"), gap=0.01, time_limit=None, backend=None,
           enumerate_from: int | None = 3):
    """``enumerate_from``: horizons from which mixed runs enumerate the upgrade binaries."""
    out = []
    for T in periods:
        for mode in modes:
            enum = mode == "mixed" and enumerate_from is not None and T >= enumerate_from
            out.append(planning_run(T, mode, gap=gap, time_limit=time_limit, backend=backend,
                                    enumerate_first_stage=enum)[0])
    return out


def table4(T: int = 2, rules=("L", "2L", "2L+0.01"), gap=0.01, time_limit=None, backend=None):
    rec, art, rep = planning_run(T, "mixed", gap=gap, time_limit=time_limit, backend=backend)
    rec.experiment, rec.label = "table4", "original"
    out = [rec]
    if not rep.has_incumbent:
        return out
    for rule in rules:
        t0 = time.perf_counter()
        r2, new = bound_experiment(art, rep, rule, gap=gap, time_limit=time_limit, backend=backend)
        st = new.model.stats()
        out.append(RunRecord("table4", f"M={rule}", r2.status, r2.objective, r2.bound,
                             r2.wall_time, rec.breakpoints, st["variables"], st["binary"], st["rows"],
                             extra={"rebuild_and_solve": time.perf_counter() - t0}))
    return out


def sweep_gamma(values, T: int = 2, gap=0.01, time_limit=None, backend=None):
    out = []
    for g in values:
        rec, art, rep = planning_run(T, "mixed", gamma_bar=float(g), gap=gap, time_limit=time_limit,
                                     backend=backend)
        rec.experiment = "sweep-gamma"
        rec.extra["upgrades"] = upgrade_mask(art, rep)
        out.append(rec)
    return out


def relative_error(value, target) -> float:
    return float(abs(value - target) / max(1.0, abs(target)))


"""Command-line entry point ``ddro``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import experiments as ex
from .milp import export_lp, solve, solve_enumerated
from .policy import InformationStructure, load_policy, save_policy
from .problem import load_problem, save_problem, validate_problem
from .reformulation import BigMConfig, ReformulationConfig, dualize, extract_policy
from .studies import (build_design_problem, build_planning_problem, equidistant_breakpoints,
                      load_design, load_planning, planning_information, switching_breakpoints,
                      tailored_breakpoints)
from .uncertainty import Breakpoints, build_vertex_set, vertex_table
from .verify import inner_max_check

EXIT = {"optimal": 0, "infeasible": 2, "limit": 3, "unbounded": 4}

NAMED = ("design-a", "design-b", "design8", "planning")


def _instance(args):
    """Resolve ``--instance`` to ``(problem, study_data)``."""
    spec = args.instance
    if spec not in NAMED:
        return load_problem(spec), None
    if spec == "planning":
        d = load_planning(T=args.periods, gamma_bar=args.gamma_bar)
        return build_planning_problem(d), d
    if spec == "design8":
        d = load_design("design_8unit.json")
    else:
        base = load_design()
        d = base.case_a() if spec == "design-a" else base.case_b()
    d = d.with_(variant=args.variant or d.variant, tau=args.tau if args.tau is not None else d.tau)
    return build_design_problem(d), d


def _breakpoints(args, problem, data) -> Breakpoints:
    spec = args.breakpoints
    if not spec:
        return problem.breakpoints
    if spec.startswith("equidistant:"):
        return equidistant_breakpoints(problem, int(spec.split(":", 1)[1]))
    if spec in ("tailored", "switching"):
        if data is None or not hasattr(data, "c_hat_max"):
            raise SystemExit(f"--breakpoints {spec} needs a design instance")
        if spec == "tailored":
            return tailored_breakpoints(data)
        return switching_breakpoints(data, data.tau, data.variant)
    return Breakpoints.from_dict(json.loads(Path(spec).read_text()))


def _info(args, data) -> InformationStructure:
    v = args.delta_t
    if v is None:
        if data is not None and hasattr(data, "d_min") and args.instance == "planning":
            return planning_information(args.periods)
        return InformationStructure()
    if v in ("full", "none"):
        return InformationStructure()
    if v == "current":
        return planning_information(args.periods)
    return InformationStructure(int(v))


def _config(args, data) -> ReformulationConfig:
    return ReformulationConfig(recourse=args.recourse, info=_info(args, data),
                               bigm=BigMConfig(default=args.big_m), step_down=not args.no_step_down)


def _write_csv(records, out):
    rows = [r.row() if hasattr(r, "row") else r for r in records]
    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow(r)
    finally:
        if out:
            fh.close()


def cmd_build(args):
    p, _ = _instance(args)
    problems = validate_problem(p)
    for msg in problems:
        print("invalid:", msg, file=sys.stderr)
    if args.out:
        save_problem(p, args.out)
    print(f"stages={p.T} params={p.structure.n_params()} problems={len(problems)}")
    return 1 if problems else 0


def cmd_reformulate(args):
    p, d = _instance(args)
    art = dualize(p, _breakpoints(args, p, d), _config(args, d), path=args.path)
    out = Path(args.out or "model")
    export_lp(art.model, out.with_suffix(".lp"))
    art.write_manifest(out.with_suffix(".json"))
    print(json.dumps(art.model.stats()))
    return 0


def cmd_solve(args):
    p, d = _instance(args)
    art = dualize(p, _breakpoints(args, p, d), _config(args, d), path=args.path)
    if args.enumerate_first_stage and len(art.y1):
        rep = solve_enumerated(art.model, art.y1, gap=args.gap, time_limit=args.time_limit,
                               backend=args.solver)
    else:
        rep = solve(art.model, gap=args.gap, time_limit=args.time_limit, backend=args.solver)
    print(rep.summary())
    if args.policy_out and rep.has_incumbent:
        save_policy(extract_policy(art, rep), args.policy_out)
    return EXIT.get(rep.status, 1)


def cmd_verify(args):
    p, _ = _instance(args)
    report = inner_max_check(p, load_policy(args.policy), tol=args.tol)
    print(report.table())
    print("certified" if report.certified else f"violated, max slack {report.max_slack:.3g}")
    return 0 if report.certified else 1


def cmd_vertices(args):
    p, d = _instance(args)
    print(vertex_table(build_vertex_set(_breakpoints(args, p, d), p.structure, p.ddu)))
    return 0


def cmd_reproduce(args):
    kw = dict(gap=args.gap, time_limit=args.time_limit, backend=args.solver)
    target = args.target
    if target == "table1":
        recs = ex.table1(**kw)
    elif target == "table2":
        recs = ex.table2(counts=tuple(args.counts), step_down=not args.no_step_down, **kw)
    elif target == "fig6":
        recs = ex.fig6(gap=min(args.gap, 1e-4), time_limit=args.time_limit, backend=args.solver)
    elif target == "table3":
        recs = ex.table3(periods=tuple(args.periods_list),
                         enumerate_from=None if args.no_enumerate else 3, **kw)
    else:
        recs = ex.table4(T=args.periods, **kw)
    _write_csv(recs, args.out)
    return 0


def cmd_sweep_gamma(args):
    recs = ex.sweep_gamma(args.values, T=args.periods, gap=args.gap, time_limit=args.time_limit,
                          backend=args.solver)
    _write_csv([{"gamma_bar": r.extra["gamma_bar"], "status": r.status, "objective": r.objective,
                 "upgrades": r.extra["upgrades"]} for r in recs], args.out)
    return 0


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--instance", default="design-b",
                   help=f"instance JSON path or one of {', '.join(NAMED)}")
    c.add_argument("--breakpoints", default=None,
                   help="equidistant:n | tailored | switching | path to a breakpoint JSON")
    c.add_argument("--recourse", choices=("continuous", "mixed"), default="mixed")
    c.add_argument("--delta-t", default=None, help="integer window, 'full', or 'current'")
    c.add_argument("--gap", type=float, default=0.01)
    c.add_argument("--big-m", type=float, default=1e4)
    c.add_argument("--solver", default=None, help="highs | scipy | lpfile | path to an executable")
    c.add_argument("--time-limit", type=float, default=None)
    c.add_argument("--path", choices=("auto", "two-stage", "multistage"), default="auto")
    c.add_argument("--no-step-down", action="store_true",
                   help="binary rules may only switch on as parameters grow")
    c.add_argument("--variant", choices=("box", "fixed", "dd"), default=None)
    c.add_argument("--tau", type=float, default=None)
    c.add_argument("--periods", type=int, default=2)
    c.add_argument("--gamma-bar", type=float, default=100.0)
    c.add_argument("--out", default=None)
    return c


def make_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="ddro", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common]).set_defaults(fn=cmd_build)
    r = sub.add_parser("reformulate", parents=[common])
    r.set_defaults(fn=cmd_reformulate)
    s = sub.add_parser("solve", parents=[common])
    s.add_argument("--policy-out", default=None)
    s.add_argument("--enumerate-first-stage", action="store_true",
                   help="solve one restricted MILP per assignment of the first-stage binaries")
    s.set_defaults(fn=cmd_solve)
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--policy", required=True)
    v.add_argument("--tol", type=float, default=1e-6)
    v.set_defaults(fn=cmd_verify)
    sub.add_parser("vertices", parents=[common]).set_defaults(fn=cmd_vertices)
    rp = sub.add_parser("reproduce", parents=[common])
    rp.add_argument("target", choices=("table1", "table2", "table3", "fig6", "table4"))
    rp.add_argument("--counts", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    rp.add_argument("--periods-list", type=int, nargs="+", default=[2, 3])
    rp.add_argument("--no-enumerate", action="store_true",
                    help="table3: solve T>=3 mixed runs directly instead of per upgrade assignment")
    rp.set_defaults(fn=cmd_reproduce)
    sg = sub.add_parser("sweep-gamma", parents=[common])
    sg.add_argument("--values", type=float, nargs="+", default=[0, 50, 100, 150, 200, 250, 300])
    sg.set_defaults(fn=cmd_sweep_gamma)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

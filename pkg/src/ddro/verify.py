"""Independent certification of solved policies.

Nothing here touches the dualised rows: worst cases are recomputed by
solving the primal maximisation over the lifted hull with an LP solver, and
policies are simulated on concrete realisations of the original problem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .policy import (
    PolicyCoefficients,
    check_binary_admissibility,
    evaluate_trajectory,
    x_rule_matrix,
    y_rule_matrix,
)
from .problem import MultistageProblem
from .structure import CONSTANT
from .uncertainty import (
    FEAS_TOL,
    SupportError,
    build_hull_system,
    hull_optimize,
    lift_binary,
    lift_continuous,
)


@dataclass
class RowCheck:
    name: str
    value: float | None
    status: str  # "ok", "violated", "empty", "unknown"
    on_lift: bool | None = None
    point: dict | None = None


@dataclass
class CertificationReport:
    rows: list[RowCheck]
    warnings: list[str] = field(default_factory=list)
    tol: float = 1e-6

    @property
    def max_slack(self) -> float:
        vals = [r.value for r in self.rows if r.value is not None and np.isfinite(r.value)]
        return max(vals) if vals else -np.inf

    @property
    def certified(self) -> bool:
        return all(r.status in ("ok", "empty") for r in self.rows)

    def violated(self) -> list[RowCheck]:
        return [r for r in self.rows if r.status == "violated"]

    def table(self) -> str:
        lines = ["row\tworst\tstatus\ton_lift"]
        for r in self.rows:
            v = "n/a" if r.value is None else f"{r.value:.3e}"
            lines.append(f"{r.name}\t{v}\t{r.status}\t{'' if r.on_lift is None else r.on_lift}")
        return "\n".join(lines)


def _on_lift(hull, z, bp, supports, tol=1e-6) -> bool:
    for p, (xi, bar, hat) in hull.point(z).items():
        pts = bp.of(p)
        lo, hi = supports[p]
        xi_c = min(max(xi, lo), hi)
        if not np.allclose(bar, lift_continuous(xi_c, pts, (lo, hi)), atol=tol):
            return False
        if not np.allclose(hat, lift_binary(xi_c, pts, (lo, hi)), atol=tol):
            return False
    return True


def inner_max_check(problem: MultistageProblem, policy: PolicyCoefficients, tol: float = 1e-6,
                    integrality: bool = True) -> CertificationReport:
    """Worst-case value of every robust row under the policy, by explicit LPs.

    Each stage-``t`` row is maximised over the lifted hull with the binaries
    of earlier stages replaced by the policy's rule expressions (first-stage
    binaries fixed).  Certification means every maximum is ``<= tol``.
    """
    s = problem.structure
    x1 = np.asarray(policy.x1, dtype=float)
    y1 = np.asarray(policy.y1 if policy.y1 is not None else np.zeros(s.q(1)), dtype=float)
    rows: list[RowCheck] = []
    warnings: list[str] = []
    res1 = problem.first_stage_residual(x1, y1)
    for n, v in enumerate(res1):
        rows.append(RowCheck(f"first[{n + 1}]", float(v), "ok" if v <= tol else "violated"))
    bp = policy.breakpoints
    for t in range(2, s.T + 1):
        hull = build_hull_system(problem.ddu, s, bp, t)
        fixed = {1: y1}
        lifted = {tt: y_rule_matrix(policy, hull, tt) for tt in range(2, t)}
        X = {tt: x_rule_matrix(policy, hull, tt) for tt in range(2, t + 1)}
        Y = {tt: y_rule_matrix(policy, hull, tt) for tt in range(2, t + 1)}
        objectives = []
        for n in range(s.n(t)):
            c = np.zeros(hull.n_cols)
            for p in s.params(t):
                c[hull.xi_col[p]] += float(problem.f_block(t, p, x1, y1)[n])
            for tt in range(2, t + 1):
                c += problem.At[(t, tt)][n] @ X[tt] + problem.Dt[(t, tt)][n] @ Y[tt]
            objectives.append((f"rob[{t},{n + 1}]", c, 0.0))
        if integrality:
            for q in range(s.q(t)):
                objectives.append((f"yhi[{t},{q + 1}]", Y[t][q], -1.0))
                objectives.append((f"ylo[{t},{q + 1}]", -Y[t][q], 0.0))
        empty_warned = False
        for name, c, shift in objectives:
            st, val, z = hull_optimize(hull, c, "max", fixed=fixed, lifted=lifted)
            if st == "infeasible":
                rows.append(RowCheck(name, None, "empty"))
                if not empty_warned:
                    warnings.append(f"stage {t}: uncertainty set is empty under the policy's binaries")
                    empty_warned = True
                continue
            if st != "optimal":
                rows.append(RowCheck(name, None, "unknown"))
                continue
            val += shift
            point = {p: v[0] for p, v in hull.point(z).items()}
            rows.append(RowCheck(name, val, "ok" if val <= tol else "violated",
                                 _on_lift(hull, z, bp, policy.supports), point))
    return CertificationReport(rows, warnings, tol)


def certify(problem: MultistageProblem, policy: PolicyCoefficients, tol: float = 1e-6):
    adm = check_binary_admissibility(policy, problem)
    rep = inner_max_check(problem, policy, tol)
    if not adm.admissible:
        rep.warnings.extend(adm.issues)
    return rep, adm


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


@dataclass
class SimulationResult:
    cost: float
    violations: list[tuple[str, float]]
    in_set: bool
    xs: dict
    ys: dict

    @property
    def feasible(self) -> bool:
        return not self.violations


def _check_support(problem: MultistageProblem, xi: np.ndarray) -> None:
    lo, hi = problem.ddu.xi_min, problem.ddu.xi_max
    bad = np.flatnonzero((xi < lo - 1e-9) | (xi > hi + 1e-9))
    if bad.size:
        p = problem.structure.params()[bad[0]]
        raise SupportError(f"parameter {p} = {xi[bad[0]]} outside [{lo[bad[0]]}, {hi[bad[0]]}]")


def simulate_policy(problem: MultistageProblem, policy: PolicyCoefficients, xi,
                    tol: float = 1e-6) -> SimulationResult:
    """Apply the policy stage by stage on one realisation and check every row.

    The realised cost is the smallest objective value compatible with the
    rows that bound it (the epigraph rows), other decisions held fixed.
    """
    s = problem.structure
    xi = np.asarray(xi, dtype=float).copy()
    if xi.shape != (s.n_params(),):
        raise ValueError(f"realisation must have {s.n_params()} entries")
    xi[0] = 1.0
    _check_support(problem, xi)
    x1 = np.asarray(policy.x1, dtype=float)
    y1 = np.asarray(policy.y1 if policy.y1 is not None else np.zeros(s.q(1)), dtype=float)
    xs, ys = evaluate_trajectory(policy, xi)
    ys_all = {1: y1, **ys}
    in_set = all(problem.ddu.contains(s, t, xi, ys_all, FEAS_TOL) for t in range(2, s.T + 1))
    violations = []
    cost = float(x1[0])
    lower = -np.inf
    x_wo = x1.copy()
    x_wo[0] = 0.0
    for n, v in enumerate(problem.first_stage_residual(x1, y1)):
        if v > tol:
            violations.append((f"first[{n + 1}]", float(v)))
        a = problem.A1[n, 0]
        if a < 0:
            lower = max(lower, float(problem.first_stage_residual(x_wo, y1)[n]) / -a)
    for t in range(2, s.T + 1):
        res = problem.stage_residual(t, xi, x1, y1, xs, ys)
        res0 = problem.stage_residual(t, xi, x_wo, y1, xs, ys)
        a = sum(xi[s.pos(p)] * problem.A[(t, p)][:, 0] for p in s.params(t))
        for n in range(s.n(t)):
            if res[n] > tol:
                violations.append((f"rob[{t},{n + 1}]", float(res[n])))
            if a[n] < 0:
                lower = max(lower, float(res0[n]) / -float(a[n]))
        for q, v in enumerate(ys[t]):
            if min(abs(v), abs(v - 1.0)) > tol:
                violations.append((f"y[{t},{q + 1}] not binary", float(v)))
    if np.isfinite(lower):
        cost = lower
    return SimulationResult(cost, violations, in_set, xs, ys)


# ---------------------------------------------------------------------------
# scenario grids
# ---------------------------------------------------------------------------


def _candidates(policy: PolicyCoefficients, p, eps: float) -> list[float]:
    lo, hi = policy.supports[p]
    vals = {lo, hi}
    for b in policy.breakpoints.of(p):
        vals.add(b)
        vals.add(max(lo, b - eps * max(1.0, abs(b))))
    return sorted(vals)


def scenario_grid(problem: MultistageProblem, policy: PolicyCoefficients, n_random: int = 1000,
                  seed: int = 0, cap: int = 20000, extra=(), eps: float = 1e-7) -> list[np.ndarray]:
    """Vertex-type realisations plus uniform box samples, filtered by set membership.

    Candidate values per parameter are its support endpoints, breakpoints
    and left limits at breakpoints.  The full product is used when it has at
    most ``cap`` points, otherwise every single-parameter variation around
    the box corners and centre.
    """
    s = problem.structure
    params = s.params()
    cands = [[1.0] if p == CONSTANT else _candidates(policy, p, eps) for p in params]
    lo, hi = problem.ddu.xi_min, problem.ddu.xi_max
    pts: list[np.ndarray] = []
    size = int(np.prod([len(c) for c in cands], dtype=float))
    if size <= cap:
        pts.extend(np.array(c, dtype=float) for c in itertools.product(*cands))
    else:
        for base in (lo, hi, (lo + hi) / 2.0):
            for k, cs in enumerate(cands):
                for v in cs:
                    x = base.copy()
                    x[k] = v
                    pts.append(x)
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        pts.append(rng.uniform(lo, hi))
    pts.extend(np.asarray(e, dtype=float) for e in extra)
    out = []
    y1 = policy.y1 if policy.y1 is not None else np.zeros(s.q(1))
    for x in pts:
        x = x.copy()
        x[0] = 1.0
        _, ys = evaluate_trajectory(policy, x)
        if all(problem.ddu.contains(s, t, x, {1: y1, **ys}) for t in range(2, s.T + 1)):
            out.append(x)
    return out


def binding_points(report: CertificationReport, problem: MultistageProblem, only_lift: bool = True):
    """Maximisers recorded by :func:`inner_max_check`, as full realisations."""
    s = problem.structure
    out = []
    for r in report.rows:
        if r.point is None or (only_lift and not r.on_lift):
            continue
        x = (problem.ddu.xi_min + problem.ddu.xi_max) / 2.0
        for p, v in r.point.items():
            x[s.pos(p)] = v
        out.append(np.clip(x, problem.ddu.xi_min, problem.ddu.xi_max))
    return out


def worst_simulated(problem: MultistageProblem, policy: PolicyCoefficients, grid) -> tuple[float, list]:
    """Largest realised cost over ``grid`` and the scenarios with violations."""
    worst, bad = -np.inf, []
    for x in grid:
        r = simulate_policy(problem, policy, x)
        worst = max(worst, r.cost)
        if r.violations:
            bad.append((x, r.violations))
    return worst, bad


# ---------------------------------------------------------------------------
# closed form for the small design study
# ---------------------------------------------------------------------------


def case_b_closed_form(tau: float, data, variant: str) -> float:
    """Optimal worst-case cost when units 2 and 3 are built and switched on demand.

    ``variant`` is ``"fixed"`` (budget over every unit) or ``"dd"`` (budget
    over built units only).  The capacity reduction of unit 2 at the worst
    case is capped by both its own maximum and the budget.
    """
    cm = np.asarray(data.c_hat_max, dtype=float)
    if variant == "fixed":
        budget = tau * cm.sum()
    elif variant in ("dd", "decision-dependent"):
        budget = tau * (cm[1] + cm[2])
    else:
        raise ValueError(f"unknown set variant {variant!r}")
    c2 = min(cm[1], budget)
    a, b, g = data.alpha, data.beta, data.gamma
    d = data.d_max
    # unit 2 at its reduced capacity, unit 3 covers the rest
    return float(a[1] + a[2] + b[1] + b[2] + g[1] * (data.c_max[1] - c2) + g[2] * (d - data.c_max[1] + c2))

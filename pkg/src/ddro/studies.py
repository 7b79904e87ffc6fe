"""Case-study instances: flexible production design and multiperiod planning."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .policy import InformationStructure
from .problem import MultistageProblem
from .structure import CONSTANT, StageStructure
from .uncertainty import Breakpoints, DduSet

SET_VARIANTS = ("box", "fixed", "dd")


def _data_file(name: str) -> dict:
    return json.loads(resources.files("ddro.data").joinpath(name).read_text())


# ---------------------------------------------------------------------------
# design study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignData:
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    gamma: tuple[float, ...]
    c_min: tuple[float, ...]
    c_max: tuple[float, ...]
    c_hat_max: tuple[float, ...]
    d_min: float = 0.0
    d_max: float = 0.0
    tau: float = 1.0
    variant: str = "box"
    name: str = "design"

    @property
    def n_units(self) -> int:
        return len(self.alpha)

    def problems(self) -> list[str]:
        out = []
        n = self.n_units
        for f in ("beta", "gamma", "c_min", "c_max", "c_hat_max"):
            if len(getattr(self, f)) != n:
                out.append(f"{f} has {len(getattr(self, f))} entries, expected {n}")
        if out:
            return out
        for i in range(n):
            if self.c_min[i] > self.c_max[i] - self.c_hat_max[i]:
                out.append(f"unit {i + 1}: c_min exceeds the worst-case capacity")
            if self.c_hat_max[i] < 0:
                out.append(f"unit {i + 1}: negative capacity deviation")
        if self.d_min > self.d_max:
            out.append("d_min exceeds d_max")
        if self.variant not in SET_VARIANTS:
            out.append(f"unknown set variant {self.variant!r}")
        if not 0.0 <= self.tau <= 1.0:
            out.append("budget fraction outside [0, 1]")
        return out

    def case_a(self) -> "DesignData":
        """Demand range from the smallest minimum output to all units at worst capacity."""
        cap = np.subtract(self.c_max, self.c_hat_max)
        return replace(self, d_min=float(min(self.c_min)), d_max=float(cap.sum()))

    def case_b(self) -> "DesignData":
        """Demand range covered by unit 1 alone."""
        return replace(self, d_min=float(self.c_min[0]), d_max=float(self.c_max[0] - self.c_hat_max[0]))

    def with_(self, **kw) -> "DesignData":
        return replace(self, **kw)


def load_design(path_or_name: str = "design_3unit.json") -> DesignData:
    p = Path(path_or_name)
    d = json.loads(p.read_text()) if p.exists() else _data_file(path_or_name)
    u = d["units"]
    return DesignData(tuple(u["alpha"]), tuple(u["beta"]), tuple(u["gamma"]), tuple(u["c_min"]),
                      tuple(u["c_max"]), tuple(u["c_hat_max"]), float(d.get("d_min", 0.0)),
                      float(d.get("d_max", 0.0)), float(d.get("tau", 1.0)), d.get("variant", "box"),
                      d.get("name", "design"))


def design_param(data: DesignData, what: str, i: int = 0):
    """Parameter id of ``c_hat`` of unit ``i`` (0-based) or of the demand."""
    return (2, i + 1) if what == "c_hat" else (2, data.n_units + 1)


def build_design_problem(data: DesignData) -> MultistageProblem:
    problems = data.problems()
    if problems:
        raise ValueError("; ".join(problems))
    I = data.n_units
    K2 = I + 1
    N = 2 + 5 * I + 1
    P1, Q1 = 1, I
    params = [CONSTANT] + [(2, i) for i in range(1, K2 + 1)]
    A = {(2, p): np.zeros((N, P1)) for p in params}
    D = {(2, p): np.zeros((N, Q1)) for p in params}
    b = {(2, p): np.zeros(N) for p in params}
    At = np.zeros((N, I))
    Dt = np.zeros((N, I))
    c = (2, CONSTANT)
    dpar = (2, design_param(data, "d"))
    n = 0
    # epigraph: sum alpha z - obj + sum beta y~ + gamma x~ <= 0
    A[c][n, 0] = -1.0
    D[c][n, :] = data.alpha
    Dt[n, :] = data.beta
    At[n, :] = data.gamma
    n += 1
    # demand met exactly, as two inequalities
    At[n, :] = 1.0
    b[dpar][n] = 1.0
    n += 1
    At[n, :] = -1.0
    b[dpar][n] = -1.0
    n += 1
    for i in range(I):
        Dt[n, i] = 1.0
        D[c][n, i] = -1.0
        n += 1
    for i in range(I):
        Dt[n, i] = data.c_min[i]
        At[n, i] = -1.0
        n += 1
    for i in range(I):
        At[n, i] = 1.0
        Dt[n, i] = -data.c_max[i]
        n += 1
    for i in range(I):
        At[n, i] = 1.0
        b[(2, (2, i + 1))][n] = -1.0
        b[c][n] = data.c_max[i]
        n += 1
    for i in range(I):
        At[n, i] = -1.0
        n += 1
    assert n == N
    W, U = _design_set(data)
    xi_min = np.array([1.0] + [0.0] * I + [data.d_min])
    c_hat_hi = np.asarray(data.c_hat_max, dtype=float)
    if data.variant in ("fixed", "dd"):
        # the budget may cut a deviation below its own maximum
        c_hat_hi = np.minimum(c_hat_hi, data.tau * c_hat_hi.sum())
    xi_max = np.array([1.0] + c_hat_hi.tolist() + [data.d_max])
    s = StageStructure((1, K2), (P1, I), (Q1, I), (0, N))
    ddu = DduSet({2: W}, {(2, 1): U}, xi_min, xi_max)
    return MultistageProblem.create(
        s, np.zeros((0, P1)), np.zeros((0, Q1)), np.zeros(0),
        A=A, D=D, b=b,
        At={(2, 2): At}, Dt={(2, 2): Dt}, ddu=ddu,
        meta={"name": data.name, "study": "design", "variant": data.variant, "tau": data.tau,
              "d_min": data.d_min, "d_max": data.d_max})


def _design_set(data: DesignData) -> tuple[np.ndarray, np.ndarray]:
    I = data.n_units
    K = I + 2
    W, U = [], []

    def row(w, u):
        W.append(w)
        U.append(u)

    cm = np.asarray(data.c_hat_max, dtype=float)
    for i in range(I):
        w = np.zeros(K)
        u = np.zeros(I)
        w[1 + i] = 1.0
        if data.variant == "fixed":
            w[0] = -cm[i]
        else:
            u[i] = cm[i]
        row(w, u)
    for i in range(I):
        w = np.zeros(K)
        w[1 + i] = -1.0
        row(w, np.zeros(I))
    if data.variant in ("fixed", "dd"):
        w = np.zeros(K)
        w[1:1 + I] = 1.0
        u = np.zeros(I)
        if data.variant == "fixed":
            w[0] = -data.tau * cm.sum()
        else:
            u[:] = data.tau * cm
        row(w, u)
    w = np.zeros(K)
    w[K - 1] = 1.0
    w[0] = -data.d_max
    row(w, np.zeros(I))
    w = np.zeros(K)
    w[K - 1] = -1.0
    w[0] = data.d_min
    row(w, np.zeros(I))
    return np.array(W), np.array(U)


# ---------------------------------------------------------------------------
# planning study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanningData:
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    c_min: tuple[float, ...]
    c_max: tuple[float, ...]
    gamma_scale: tuple[float, ...]
    eta: tuple[float, ...]
    theta: tuple[float, ...]
    d_min: tuple[float, ...]
    d_max: tuple[float, ...]
    tau: tuple[float, ...]
    c_hat_max1: tuple[tuple[float, ...], ...]
    c_hat_max2: tuple[tuple[float, ...], ...]
    s_max: float = 5.0
    T: int = 2
    gamma_bar: float = 100.0
    name: str = "planning"

    @property
    def n_units(self) -> int:
        return len(self.alpha)

    @property
    def gamma(self) -> np.ndarray:
        return self.gamma_bar * np.asarray(self.gamma_scale, dtype=float)

    def problems(self) -> list[str]:
        out = []
        if not 1 <= self.T <= len(self.d_min):
            out.append(f"T={self.T} exceeds the {len(self.d_min)} periods of data")
            return out
        for k in range(self.T):
            if self.d_min[k] > self.d_max[k]:
                out.append(f"period {k + 1}: d_min exceeds d_max")
            for i in range(self.n_units):
                if not self.c_hat_max1[k][i] < self.c_hat_max2[k][i]:
                    out.append(f"period {k + 1}, unit {i + 1}: upgrade does not shrink the deviation")
        return out

    def with_(self, **kw) -> "PlanningData":
        return replace(self, **kw)


def load_planning(path_or_name: str = "planning.json", T: int = 2, gamma_bar: float = 100.0) -> PlanningData:
    p = Path(path_or_name)
    d = json.loads(p.read_text()) if p.exists() else _data_file(path_or_name)
    u, per = d["units"], d["periods"]
    tup = lambda v: tuple(float(x) for x in v)  # noqa: E731
    return PlanningData(tup(u["alpha"]), tup(u["beta"]), tup(u["c_min"]), tup(u["c_max"]),
                        tup(u["gamma_scale"]), tup(per["eta"]), tup(per["theta"]), tup(per["d_min"]),
                        tup(per["d_max"]), tup(per["tau"]), tuple(tup(r) for r in per["c_hat_max1"]),
                        tuple(tup(r) for r in per["c_hat_max2"]), float(d.get("s_max", 5.0)), T,
                        gamma_bar, d.get("name", "planning"))


def demand_stage(k: int) -> int:
    return 2 * k


def capacity_stage(k: int) -> int:
    return 2 * k + 1


def build_planning_problem(data: PlanningData) -> MultistageProblem:
    """Stages: 1 upgrades; ``2k`` demand of period k then on/off; ``2k+1`` capacities then flows.

    Stage ``2k`` binaries are ``(y_k, w_k)`` with ``w_k = z * y_k`` enforced
    by robust linear rows; stage ``2k+1`` continuous decisions are
    ``(x_k, p_k, s_k)``.
    """
    problems = data.problems()
    if problems:
        raise ValueError("; ".join(problems))
    I, T = data.n_units, data.T
    S = 2 * T + 1
    K = [1] + [1 if t % 2 == 0 else I for t in range(2, S + 1)]
    P = [1] + [0 if t % 2 == 0 else I + 2 for t in range(2, S + 1)]
    Q = [I] + [2 * I if t % 2 == 0 else 0 for t in range(2, S + 1)]
    N = [0] + [3 * I if t % 2 == 0 else 2 + 5 * I + 3 for t in range(2, S + 1)]
    N[S - 1] += 1  # epigraph row in the last stage
    s = StageStructure(tuple(K), tuple(P), tuple(Q), tuple(N))
    A, D, b, At, Dt = {}, {}, {}, {}, {}

    def blk(store, key, shape):
        if key not in store:
            store[key] = np.zeros(shape)
        return store[key]

    c = CONSTANT
    for k in range(1, T + 1):
        t = demand_stage(k)
        n = 0
        Dy = blk(Dt, (t, t), (N[t - 1], Q[t - 1]))
        Dz = blk(D, (t, c), (N[t - 1], I))
        bc = blk(b, (t, c), (N[t - 1],))
        for i in range(I):  # w <= z
            Dy[n, I + i] = 1.0
            Dz[n, i] = -1.0
            n += 1
        for i in range(I):  # w <= y
            Dy[n, I + i] = 1.0
            Dy[n, i] = -1.0
            n += 1
        for i in range(I):  # z + y - 1 <= w
            Dy[n, I + i] = -1.0
            Dy[n, i] = 1.0
            Dz[n, i] = 1.0
            bc[n] = 1.0
            n += 1
        t = capacity_stage(k)
        Nt = N[t - 1]
        Ax = blk(At, (t, t), (Nt, I + 2))
        bc = blk(b, (t, c), (Nt,))
        bd = blk(b, (t, (demand_stage(k), 1)), (Nt,))
        Dyk = blk(Dt, (t, demand_stage(k)), (Nt, 2 * I))
        xs = list(range(I))
        pcol, scol = I, I + 1
        n = 0
        # s_k - s_{k-1} - sum x - p + d_k = 0, both directions
        for sign in (1.0, -1.0):
            Ax[n, scol] = sign
            Ax[n, xs] = -sign
            Ax[n, pcol] = -sign
            bd[n] = -sign
            if k > 1:
                blk(At, (t, capacity_stage(k - 1)), (Nt, I + 2))[n, scol] = -sign
            n += 1
        for i in range(I):  # x + c_hat <= c_max
            Ax[n, i] = 1.0
            blk(b, (t, (t, i + 1)), (Nt,))[n] = -1.0
            bc[n] = data.c_max[i]
            n += 1
        for i in range(I):  # x <= c_max y
            Ax[n, i] = 1.0
            Dyk[n, i] = -data.c_max[i]
            n += 1
        for i in range(I):  # c_min y <= x
            Ax[n, i] = -1.0
            Dyk[n, i] = data.c_min[i]
            n += 1
        Ax[n, scol] = 1.0  # s <= s_max
        bc[n] = data.s_max
        n += 1
        for i in range(I):
            Ax[n, i] = -1.0
            n += 1
        Ax[n, pcol] = -1.0
        n += 1
        Ax[n, scol] = -1.0
        n += 1
    # epigraph in the last stage
    t = S
    n = N[t - 1] - 1
    blk(A, (t, c), (N[t - 1], 1))[n, 0] = -1.0
    blk(D, (t, c), (N[t - 1], I))[n, :] = data.gamma
    for k in range(1, T + 1):
        a = blk(At, (t, capacity_stage(k)), (N[t - 1], I + 2))
        a[n, :I] = data.alpha
        a[n, I] = data.theta[k - 1]
        a[n, I + 1] = data.eta[k - 1]
        blk(Dt, (t, demand_stage(k)), (N[t - 1], 2 * I))[n, :I] = data.beta
    ddu = _planning_set(data, s)
    return MultistageProblem.create(s, np.zeros((0, 1)), np.zeros((0, I)), np.zeros(0), A, D, b, At, Dt,
                                    ddu, meta={"name": data.name, "study": "planning", "T": T,
                                               "gamma_bar": data.gamma_bar})


def _planning_set(data: PlanningData, s: StageStructure) -> DduSet:
    I, T = data.n_units, data.T
    rows: list[tuple[dict, dict]] = []  # (param -> coef, (stage, col) -> coef)
    W, U = {}, {}
    lo = [1.0]
    hi = [1.0]
    for k in range(1, T + 1):
        td, tc = demand_stage(k), capacity_stage(k)
        d = (td, 1)
        rows.append(({d: 1.0, CONSTANT: -data.d_max[k - 1]}, {}))
        rows.append(({d: -1.0, CONSTANT: data.d_min[k - 1]}, {}))
        lo.append(data.d_min[k - 1])
        hi.append(data.d_max[k - 1])
        W[td], Ud = _assemble(rows, s, td)
        U.update(Ud)
        u1 = np.asarray(data.c_hat_max1[k - 1])
        u2 = np.asarray(data.c_hat_max2[k - 1])
        for i in range(I):
            # c_hat <= u1 w + u2 (y - w)
            rows.append(({(tc, i + 1): 1.0}, {(td, i): -u2[i], (td, I + i): -(u1[i] - u2[i])}))
        tau = data.tau[k - 1]
        bud = {}
        for i in range(I):
            bud[(td, i)] = -tau * u2[i]
            bud[(td, I + i)] = -tau * (u1[i] - u2[i])
        rows.append(({(tc, i + 1): 1.0 for i in range(I)}, bud))
        for i in range(I):
            rows.append(({(tc, i + 1): -1.0}, {}))
        lo.extend([0.0] * I)
        hi.extend(u2.tolist())
        W[tc], Uc = _assemble(rows, s, tc)
        U.update(Uc)
    return DduSet(W, U, np.array(lo), np.array(hi))


def _assemble(rows, s: StageStructure, t: int):
    Wt = np.zeros((len(rows), s.n_params(t)))
    Ut = {(t, tt): np.zeros((len(rows), s.q(tt))) for tt in range(1, t)}
    for r, (wc, uc) in enumerate(rows):
        for p, v in wc.items():
            Wt[r, s.pos(p)] = v
        for (tt, col), v in uc.items():
            # the set is bounded by y - w products of earlier stages
            Ut[(t, tt)][r, col] = -v
    return Wt, Ut


def planning_information(T: int, delta_demand: int = 0, delta_capacity: int = 1) -> InformationStructure:
    """Rules that only see parameters of the current period."""
    dt = {}
    for k in range(1, T + 1):
        dt[demand_stage(k)] = delta_demand
        dt[capacity_stage(k)] = delta_capacity
    return InformationStructure(dt)


# ---------------------------------------------------------------------------
# breakpoint heuristics
# ---------------------------------------------------------------------------


def equidistant_breakpoints(problem: MultistageProblem, n: int) -> Breakpoints:
    if n < 0:
        raise ValueError("number of breakpoints must be nonnegative")
    s = problem.structure
    out = {}
    for p in s.params():
        if p == CONSTANT or n == 0:
            continue
        lo, hi = problem.ddu.support(s, p)
        if hi > lo:
            out[p] = equidistant_points(lo, hi, n)
    return Breakpoints(out)


def equidistant_points(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(lo + (hi - lo) * k / (n + 1) for k in range(1, n + 1))


def tailored_breakpoints(data: DesignData, c_hat_bps: Breakpoints | dict | None = None,
                         tol: float = 1e-9) -> Breakpoints:
    """Demand breakpoints at minimum outputs and at capacities after each deviation knot."""
    c_hat_bps = c_hat_bps or {}
    get = c_hat_bps.of if isinstance(c_hat_bps, Breakpoints) else (lambda p: c_hat_bps.get(p, ()))
    cands = list(data.c_min)
    for i in range(data.n_units):
        knots = [0.0, *get(design_param(data, "c_hat", i)), data.c_hat_max[i]]
        cands.extend(data.c_max[i] - v for v in knots)
    cands = sorted(v for v in cands if data.d_min + tol < v < data.d_max - tol)
    pts: list[float] = []
    for v in cands:
        if not pts or v - pts[-1] > tol:
            pts.append(float(v))
    out = dict(c_hat_bps.points) if isinstance(c_hat_bps, Breakpoints) else dict(c_hat_bps)
    if pts:
        out[design_param(data, "d")] = tuple(pts)
    return Breakpoints(out)


def worst_unit2_deviation(data: DesignData, tau: float, variant: str) -> float:
    cm = np.asarray(data.c_hat_max, dtype=float)
    budget = tau * (cm.sum() if variant == "fixed" else cm[1] + cm[2])
    return float(min(cm[1], budget))


def switching_breakpoints(data: DesignData, tau: float, variant: str) -> Breakpoints:
    """Demand breakpoints where the optimal two-unit operation changes regime."""
    c2 = worst_unit2_deviation(data, tau, variant)
    pts = sorted({data.c_max[1] - c2, data.c_min[2] + data.c_max[1] - c2})
    pts = [v for v in pts if data.d_min < v < data.d_max]
    return Breakpoints({design_param(data, "d"): tuple(pts)} if pts else {})

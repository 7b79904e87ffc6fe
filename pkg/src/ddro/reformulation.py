"""Deterministic MILP counterparts of robust problems under lifted decision rules.

Every robust row ``max_{hull} (...) <= 0`` is replaced by its LP dual: one
free multiplier per parameter (the per-parameter hull maximum), nonnegative
multipliers on the decision-dependent coupling rows, one aggregate row and
one row per lifted vertex.  Products between coupling multipliers and
binaries are linearised exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .milp import GE, INF, LE, Expr, MilpModel, SolveReport, lp_safe_names, solve
from .policy import InformationStructure, PolicyCoefficients
from .problem import MultistageProblem, as_two_stage, validate_problem
from .structure import CONSTANT, ParamId
from .uncertainty import Breakpoints, LiftedVertexSet, build_vertex_set

MIXED, CONTINUOUS = "mixed", "continuous"


class BoundError(ValueError):
    """A product needs a finite bound on its continuous factor."""


class NoIncumbentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# big-M configuration and product linearisation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BigMConfig:
    default: float = 1e4
    per_family: Mapping[str, float] = field(default_factory=dict)
    per_var: Mapping[str, float] = field(default_factory=dict)

    def bound(self, family: str, name: str) -> float:
        if name in self.per_var:
            return float(self.per_var[name])
        return float(self.per_family.get(family, self.default))


def glover_linearize(m: MilpModel, name: str, s: Expr, lo: float, hi: float, z: int) -> int:
    """Add ``v = s * z`` for binary ``z`` and ``s`` in ``[lo, hi]``; returns ``v``.

    Four rows: ``v <= hi z``, ``v >= lo z``, ``v <= s - lo (1 - z)`` and
    ``v >= s - hi (1 - z)``.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise BoundError(f"product {name} needs finite bounds, got [{lo}, {hi}]")
    v = m.add_var(name, min(lo, 0.0), max(hi, 0.0))
    m.add_row(f"{name}:ub", Expr({v: 1.0, z: -hi}), LE, 0.0)
    m.add_row(f"{name}:lb", Expr({v: 1.0, z: -lo}), GE, 0.0)
    e = Expr({v: 1.0, z: -lo}).iadd(s, -1.0)
    m.add_row(f"{name}:su", e, LE, -lo)
    e = Expr({v: 1.0, z: -hi}).iadd(s, -1.0)
    m.add_row(f"{name}:sl", e, GE, -hi)
    return v


# ---------------------------------------------------------------------------
# configuration and artifacts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReformulationConfig:
    recourse: str = MIXED
    info: InformationStructure = field(default_factory=InformationStructure)
    bigm: BigMConfig = field(default_factory=BigMConfig)
    symmetry: bool = True
    # False keeps only the upward step coefficients of binary rules
    step_down: bool = True

    def __post_init__(self):
        if self.recourse not in (MIXED, CONTINUOUS):
            raise ValueError(f"unknown recourse mode {self.recourse!r}")


@dataclass
class ReformulationArtifacts:
    model: MilpModel
    problem: MultistageProblem
    breakpoints: Breakpoints
    config: ReformulationConfig
    path: str
    x1: np.ndarray
    y1: np.ndarray
    Xbar: dict
    Xhat: dict
    Ydot: dict
    Yddot: dict
    families: dict[str, list[int]]
    row_counts: dict[str, int]

    def manifest(self) -> dict:
        m = self.model
        return {
            "path": self.path,
            "recourse": self.config.recourse,
            "step_down": self.config.step_down,
            "info": self.config.info.to_dict(),
            "stats": m.stats(),
            "rows_per_family": dict(sorted(self.row_counts.items())),
            "vars_per_family": {k: len(v) for k, v in sorted(self.families.items())},
            "bound_registry": {m.var_names[k]: b for k, b in sorted(m.tracked_bounds.items())},
            "name_map": lp_safe_names(m.var_names),
            "breakpoints": self.breakpoints.to_dict(),
        }

    def write_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=1) + "\n")

    def rebuild(self, bigm: BigMConfig | None = None) -> "ReformulationArtifacts":
        cfg = self.config if bigm is None else replace(self.config, bigm=bigm)
        builder = dualize_two_stage if self.path == "two-stage" else dualize_multistage
        return builder(self.problem, self.breakpoints, cfg)


# ---------------------------------------------------------------------------
# shared model pieces: first stage and rule coefficients
# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self, problem: MultistageProblem, bp: Breakpoints | None, cfg: ReformulationConfig,
                 path: str):
        problems = validate_problem(problem if bp is None else problem.with_breakpoints(bp))
        if problems:
            raise ValueError("invalid instance: " + "; ".join(problems))
        self.p = problem
        self.s = problem.structure
        self.bp = problem.breakpoints if bp is None else bp
        self.cfg = cfg
        self.path = path
        self.m = MilpModel(name=str(problem.meta.get("name", "model")))
        self.vs: LiftedVertexSet = build_vertex_set(self.bp, self.s, problem.ddu)
        self.families: dict[str, list[int]] = {}
        self.rows: dict[str, int] = {}
        self.Xbar, self.Xhat, self.Ydot, self.Yddot = {}, {}, {}, {}

    # bookkeeping
    def var(self, family: str, name: str, lb=-INF, ub=INF, binary=False) -> int:
        k = self.m.add_var(name, lb, ub, binary)
        self.families.setdefault(family, []).append(k)
        return k

    def dual(self, family: str, name: str, bounded: bool) -> int:
        if not bounded:
            return self.var(family, name, 0.0, INF)
        M = self.cfg.bigm.bound(family, name)
        if not math.isfinite(M) or M < 0:
            raise BoundError(f"dual {name} lacks a finite nonnegative big-M")
        k = self.var(family, name, 0.0, M)
        self.m.tracked_bounds[k] = M
        return k

    def row(self, family: str, name: str, e: Expr, sense: str, rhs: float = 0.0) -> None:
        self.m.add_row(name, e, sense, rhs)
        self.rows[family] = self.rows.get(family, 0) + 1

    def product(self, family: str, name: str, s: Expr, lo: float, hi: float, z: int) -> int:
        n0 = self.m.num_rows
        v = glover_linearize(self.m, name, s, lo, hi, z)
        self.families.setdefault(family, []).append(v)
        self.rows[family] = self.rows.get(family, 0) + self.m.num_rows - n0
        return v

    # first stage and rules
    def first_stage(self) -> None:
        s = self.s
        self.x1 = np.array([self.var("x1", f"x1[{k + 1}]") for k in range(s.p(1))], dtype=np.int64)
        self.y1 = np.array([self.var("y1", f"y1[{k + 1}]", binary=True) for k in range(s.q(1))],
                           dtype=np.int64)
        self.m.set_objective(Expr({int(self.x1[0]): 1.0}))
        for n in range(s.n(1)):
            e = Expr()
            for k in np.flatnonzero(self.p.A1[n]):
                e.add(int(self.x1[k]), float(self.p.A1[n, k]))
            for k in np.flatnonzero(self.p.D1[n]):
                e.add(int(self.y1[k]), float(self.p.D1[n, k]))
            self.row("first", f"first[{n + 1}]", e, LE, float(self.p.b1[n]))

    def rules(self) -> None:
        s, bp, cfg = self.s, self.bp, self.cfg
        mixed = cfg.recourse == MIXED
        for t in range(2, s.T + 1):
            for p in cfg.info.allowed(s, t):
                r, g = bp.r(p), bp.g(p)
                tag = f"{t}|{p[0]},{p[1]}"
                self.Xbar[(t, p)] = self._mat("Xbar", tag, s.p(t), r)
                stepped = p != CONSTANT and r >= 2
                if stepped:
                    self.Xhat[(t, p)] = self._mat("Xhat", tag, s.p(t), g)
                if s.q(t) and (p == CONSTANT or (mixed and stepped)):
                    self.Ydot[(t, p)] = self._mat("Ydot", tag, s.q(t), g, binary=True)
                    if mixed and cfg.step_down:
                        self.Yddot[(t, p)] = self._mat("Yddot", tag, s.q(t), g, binary=True)
                        if cfg.symmetry:
                            for q in range(s.q(t)):
                                for j in range(g):
                                    e = Expr({int(self.Ydot[(t, p)][q, j]): 1.0,
                                              int(self.Yddot[(t, p)][q, j]): 1.0})
                                    self.row("symmetry", f"sym[{tag}][{q + 1},{j + 1}]", e, LE, 1.0)

    def _mat(self, family: str, tag: str, rows: int, cols: int, binary: bool = False) -> np.ndarray:
        out = np.empty((rows, cols), dtype=np.int64)
        for a in range(rows):
            for b in range(cols):
                out[a, b] = self.var(family, f"{family}[{tag}][{a + 1},{b + 1}]", binary=binary)
        return out

    # rule expressions
    def yhat_terms(self, t: int, p: ParamId, q: int, j: int) -> list[tuple[int, float]]:
        out = []
        if (t, p) in self.Ydot:
            out.append((int(self.Ydot[(t, p)][q, j]), 1.0))
        if (t, p) in self.Yddot:
            out.append((int(self.Yddot[(t, p)][q, j]), -1.0))
        return out

    def y_is_constant_binary(self, t: int) -> bool:
        """Stage-``t`` binary rules reduce to a bare constant 0/1 choice."""
        keys = [k for k in self.Ydot if k[0] == t]
        return keys == [(t, CONSTANT)] and (t, CONSTANT) not in self.Yddot

    def f_expr(self, t: int, p: ParamId, n: int) -> Expr:
        A, D, b = self.p.A[(t, p)], self.p.D[(t, p)], self.p.b[(t, p)]
        e = Expr(const=-float(b[n]))
        for k in np.flatnonzero(A[n]):
            e.add(int(self.x1[k]), float(A[n, k]))
        for k in np.flatnonzero(D[n]):
            e.add(int(self.y1[k]), float(D[n, k]))
        return e

    def recourse_coefs(self, t: int, p: ParamId, n: int) -> tuple[list[Expr], list[Expr]]:
        """Coefficients of the lifted components of ``p`` in stage-``t`` row ``n``."""
        r, g = self.bp.r(p), self.bp.g(p)
        bar = [Expr() for _ in range(r)]
        hat = [Expr() for _ in range(g)]
        for tt in range(max(2, p[0]), t + 1):
            At = self.p.At[(t, tt)][n]
            Dt = self.p.Dt[(t, tt)][n]
            for k in np.flatnonzero(At):
                a = float(At[k])
                if (tt, p) in self.Xbar:
                    for j in range(r):
                        bar[j].add(int(self.Xbar[(tt, p)][k, j]), a)
                if (tt, p) in self.Xhat:
                    for j in range(g):
                        hat[j].add(int(self.Xhat[(tt, p)][k, j]), a)
            for q in np.flatnonzero(Dt):
                d = float(Dt[q])
                for j in range(g):
                    for v, sgn in self.yhat_terms(tt, p, int(q), j):
                        hat[j].add(v, sgn * d)
        return bar, hat

    def finish(self) -> ReformulationArtifacts:
        problems = self.m.validate()
        if problems:
            raise ValueError("emitted model is malformed: " + "; ".join(problems[:5]))
        return ReformulationArtifacts(self.m, self.p, self.bp, self.cfg, self.path, self.x1, self.y1,
                                      self.Xbar, self.Xhat, self.Ydot, self.Yddot, self.families,
                                      self.rows)


def _vertex_rows(vs: LiftedVertexSet, p: ParamId):
    return vs[p].distinct()



# ---------------------------------------------------------------------------
# multistage path: a generic robust-row emitter
# ---------------------------------------------------------------------------


class _MultistageBuilder(_Builder):
    def robust_row(self, t: int, tag: str, fam: str, coef_xi: dict[ParamId, Expr],
                   coef_bar: dict[ParamId, list[Expr]], coef_hat: dict[ParamId, list[Expr]]) -> None:
        """Dualise ``max over the stage-t hull of the given linear form <= 0``."""
        s, ddu = self.s, self.p.ddu
        W = ddu.W[t]
        Ms = W.shape[0]
        U = {tt: ddu.U[(t, tt)] for tt in range(1, t) if (t, tt) in ddu.U and ddu.U[(t, tt)].any()}
        # which coupling multipliers meet binaries
        prods_y1 = 1 in U and s.q(1) > 0
        prods_rec = {tt: [p for p in self.cfg.info.allowed(s, tt)
                          if (tt, p) in self.Ydot] for tt in U if tt >= 2}
        bounded = prods_y1 or any(prods_rec.values())
        phi = [self.dual(f"{fam}_phi", f"{fam}_phi[{tag}][{m + 1}]", bounded) if W[m].any() else None
               for m in range(Ms)]
        Mbound = [self.m.ub[k] if k is not None else 0.0 for k in phi]

        def coupling(tt: int, q: int) -> tuple[Expr, float, float]:
            col = U[tt][:, q]
            e, lo, hi = Expr(), 0.0, 0.0
            for mm in np.flatnonzero(col):
                if phi[mm] is None:
                    continue
                u = float(col[mm])
                e.add(phi[mm], u)
                lo += min(0.0, u) * Mbound[mm]
                hi += max(0.0, u) * Mbound[mm]
            return e, lo, hi

        agg = Expr()
        if prods_y1:
            for q in range(s.q(1)):
                e, lo, hi = coupling(1, q)
                if e.terms:
                    v = self.product(f"{fam}_glover", f"{fam}_gy1[{tag}][{q + 1}]", e, lo, hi, int(self.y1[q]))
                    agg.add(v, 1.0)
        # hat-coefficient additions from coupling with recourse binaries
        extra: dict[ParamId, list[Expr]] = {}
        for tt, plist in prods_rec.items():
            for q in range(s.q(tt)):
                e, lo, hi = coupling(tt, q)
                if not e.terms:
                    continue
                for p in plist:
                    ex = extra.setdefault(p, [Expr() for _ in range(self.bp.g(p))])
                    for j in range(self.bp.g(p)):
                        for z, sgn in self.yhat_terms(tt, p, q, j):
                            nm = f"{fam}_gY[{tag}][{tt}|{p[0]},{p[1]}][{q + 1},{j + 1}]{'+' if sgn > 0 else '-'}"
                            v = self.product(f"{fam}_glover", nm, e, lo, hi, z)
                            ex[j].add(v, sgn)
        for k, p in enumerate(s.params(t)):
            wcol = W[:, k]
            cx = coef_xi.get(p, Expr())
            cb = coef_bar.get(p, [])
            ch = coef_hat.get(p, [])
            ce = extra.get(p, [])
            trivial = (not cx.terms and cx.const == 0.0 and not any(e.terms for e in cb)
                       and not any(e.terms for e in ch) and not ce
                       and not any(wcol[mm] and phi[mm] is not None for mm in range(Ms)))
            if trivial:
                continue
            delta = self.var(f"{fam}_delta", f"{fam}_delta[{tag}][{p[0]},{p[1]}]")
            agg.add(delta, 1.0)
            for vi, v in enumerate(_vertex_rows(self.vs, p)):
                e = Expr()
                e.iadd(cx, v.v)
                for mm in np.flatnonzero(wcol):
                    if phi[mm] is not None:
                        e.add(phi[mm], -float(wcol[mm]) * v.v)
                for j, c in enumerate(cb):
                    if v.vbar[j]:
                        e.iadd(c, v.vbar[j])
                for j, c in enumerate(ch):
                    if v.vhat[j]:
                        e.iadd(c, v.vhat[j])
                for j, c in enumerate(ce):
                    if v.vhat[j]:
                        e.iadd(c, v.vhat[j])
                e.add(delta, -1.0)
                self.row(f"{fam}_vertex", f"{fam}[{tag}]:v[{p[0]},{p[1]}]#{vi + 1}", e, LE, 0.0)
        self.row(f"{fam}_agg", f"{fam}[{tag}]:agg", agg, LE, 0.0)

    def constraint_rows(self) -> None:
        s = self.s
        for t in range(2, s.T + 1):
            for n in range(s.n(t)):
                cx, cb, ch = {}, {}, {}
                for p in s.params(t):
                    cx[p] = self.f_expr(t, p, n)
                    cb[p], ch[p] = self.recourse_coefs(t, p, n)
                self.robust_row(t, f"{t},{n + 1}", "rob", cx, cb, ch)

    def integrality_rows(self) -> None:
        s = self.s
        for t in range(2, s.T + 1):
            if not s.q(t) or self.y_is_constant_binary(t):
                continue
            plist = [p for p in s.params(t) if (t, p) in self.Ydot]
            for q in range(s.q(t)):
                for side, sign in (("ylo", -1.0), ("yhi", 1.0)):
                    ch = {}
                    for p in plist:
                        hat = [Expr() for _ in range(self.bp.g(p))]
                        for j in range(self.bp.g(p)):
                            for z, sg in self.yhat_terms(t, p, q, j):
                                hat[j].add(z, sign * sg)
                        ch[p] = hat
                    cx = {CONSTANT: Expr(const=-1.0)} if side == "yhi" else {}
                    self.robust_row(t, f"{t},{q + 1}", side, cx, {}, ch)


def dualize_multistage(problem: MultistageProblem, bp: Breakpoints | None = None,
                       config: ReformulationConfig | None = None) -> ReformulationArtifacts:
    b = _MultistageBuilder(problem, bp, config or ReformulationConfig(), "multistage")
    b.first_stage()
    b.rules()
    b.constraint_rows()
    b.integrality_rows()
    return b.finish()


# ---------------------------------------------------------------------------
# two-stage path, written against the row-wise two-stage data
# ---------------------------------------------------------------------------


class _TwoStageBuilder(_Builder):
    def build(self) -> None:
        v = as_two_stage(self.p)
        s = self.s
        params = s.params(2)
        Mset = v.W.shape[0]
        Q1 = s.q(1)
        uses_y = bool(v.U.any()) and Q1 > 0
        self.first_stage()
        self.rules()
        x, y = self.x1, self.y1

        def rule_coefs(n: int, p: ParamId) -> tuple[list[Expr], list[Expr]]:
            r, g = self.bp.r(p), self.bp.g(p)
            bar = [Expr() for _ in range(r)]
            hat = [Expr() for _ in range(g)]
            for k in np.flatnonzero(v.a_tilde[n]):
                a = float(v.a_tilde[n, k])
                for j in range(r):
                    bar[j].add(int(self.Xbar[(2, p)][k, j]), a)
                if (2, p) in self.Xhat:
                    for j in range(g):
                        hat[j].add(int(self.Xhat[(2, p)][k, j]), a)
            for q in np.flatnonzero(v.d_tilde[n]):
                for j in range(g):
                    for z, sg in self.yhat_terms(2, p, int(q), j):
                        hat[j].add(z, sg * float(v.d_tilde[n, q]))
            return bar, hat

        def uy_products(fam: str, tag: str, mults: list[int | None]) -> Expr:
            # sum_q (mults' U)_q y_q
            out = Expr()
            if not uses_y:
                return out
            for q in range(Q1):
                e, lo, hi = Expr(), 0.0, 0.0
                for mm in np.flatnonzero(v.U[:, q]):
                    if mults[mm] is None:
                        continue
                    u = float(v.U[mm, q])
                    e.add(mults[mm], u)
                    M = self.m.ub[mults[mm]]
                    lo += min(0.0, u) * M
                    hi += max(0.0, u) * M
                if e.terms:
                    out.add(self.product(f"{fam}_glover", f"{fam}_gy1[{tag}][{q + 1}]", e, lo, hi, int(y[q])), 1.0)
            return out

        # worst-case constraint rows
        for n in range(v.n_rows):
            tag = f"{n + 1}"
            mu = [self.dual("mu", f"mu[{tag}][{mm + 1}]", uses_y) if v.W[mm].any() else None
                  for mm in range(Mset)]
            agg = uy_products("mu", tag, mu)
            for i, p in enumerate(params):
                f = Expr(const=-float(v.b[n, i]))
                for k in np.flatnonzero(v.A[n, i]):
                    f.add(int(x[k]), float(v.A[n, i, k]))
                for k in np.flatnonzero(v.D[n, i]):
                    f.add(int(y[k]), float(v.D[n, i, k]))
                bar, hat = rule_coefs(n, p)
                w = v.W[:, i]
                if (not f.terms and f.const == 0.0 and not any(e.terms for e in bar + hat)
                        and not any(w[mm] and mu[mm] is not None for mm in range(Mset))):
                    continue
                rho = self.var("rho", f"rho[{tag}][{p[0]},{p[1]}]")
                agg.add(rho, 1.0)
                for vi, vert in enumerate(_vertex_rows(self.vs, p)):
                    # rho + mu' w v >= f v + a X v_bar + (a Xh + d Y) v_hat
                    e = Expr({rho: 1.0})
                    for mm in np.flatnonzero(w):
                        if mu[mm] is not None:
                            e.add(mu[mm], float(w[mm]) * vert.v)
                    e.iadd(f, -vert.v)
                    for j, c in enumerate(bar):
                        e.iadd(c, -vert.vbar[j])
                    for j, c in enumerate(hat):
                        e.iadd(c, -vert.vhat[j])
                    self.row("rho_vertex", f"rob[{tag}]:v[{p[0]},{p[1]}]#{vi + 1}", e, GE, 0.0)
            self.row("rho_agg", f"rob[{tag}]:agg", agg, LE, 0.0)

        # 0 <= y~ <= 1 over the hull
        if not s.q(2) or self.y_is_constant_binary(2):
            return
        plist = [p for p in params if (2, p) in self.Ydot]
        for q in range(s.q(2)):
            tag = f"{q + 1}"
            psi_lo = [self.dual("psi_lo", f"psi_lo[{tag}][{mm + 1}]", uses_y) if v.W[mm].any() else None
                      for mm in range(Mset)]
            psi_hi = [self.dual("psi_hi", f"psi_hi[{tag}][{mm + 1}]", uses_y) if v.W[mm].any() else None
                      for mm in range(Mset)]
            # Omega_lo e - Psi_lo U y >= 0 ; Omega_hi e + Psi_hi U y <= 1
            lo_agg = uy_products("psi_lo", tag, psi_lo) * -1.0
            hi_agg = uy_products("psi_hi", tag, psi_hi)
            for i, p in enumerate(params):
                w = v.W[:, i]
                has_w = any(w[mm] and psi_lo[mm] is not None for mm in range(Mset))
                if p not in plist and not has_w:
                    continue
                om_lo = self.var("omega_lo", f"omega_lo[{tag}][{p[0]},{p[1]}]")
                om_hi = self.var("omega_hi", f"omega_hi[{tag}][{p[0]},{p[1]}]")
                lo_agg.add(om_lo, 1.0)
                hi_agg.add(om_hi, 1.0)
                for vi, vert in enumerate(_vertex_rows(self.vs, p)):
                    yv = Expr()
                    if p in plist:
                        for j in range(self.bp.g(p)):
                            if vert.vhat[j]:
                                for z, sg in self.yhat_terms(2, p, q, j):
                                    yv.add(z, sg * vert.vhat[j])
                    # Y v_hat - omega_lo + Psi_lo w v >= 0
                    e = yv.copy().add(om_lo, -1.0)
                    for mm in np.flatnonzero(w):
                        if psi_lo[mm] is not None:
                            e.add(psi_lo[mm], float(w[mm]) * vert.v)
                    self.row("omega_lo_vertex", f"ylo[{tag}]:v[{p[0]},{p[1]}]#{vi + 1}", e, GE, 0.0)
                    # Y v_hat - omega_hi - Psi_hi w v <= 0
                    e = yv.copy().add(om_hi, -1.0)
                    for mm in np.flatnonzero(w):
                        if psi_hi[mm] is not None:
                            e.add(psi_hi[mm], -float(w[mm]) * vert.v)
                    self.row("omega_hi_vertex", f"yhi[{tag}]:v[{p[0]},{p[1]}]#{vi + 1}", e, LE, 0.0)
            self.row("omega_lo_agg", f"ylo[{tag}]:agg", lo_agg, GE, 0.0)
            self.row("omega_hi_agg", f"yhi[{tag}]:agg", hi_agg, LE, 1.0)


def dualize_two_stage(problem: MultistageProblem, bp: Breakpoints | None = None,
                      config: ReformulationConfig | None = None) -> ReformulationArtifacts:
    b = _TwoStageBuilder(problem, bp, config or ReformulationConfig(), "two-stage")
    b.build()
    return b.finish()


def dualize(problem: MultistageProblem, bp: Breakpoints | None = None,
            config: ReformulationConfig | None = None, path: str = "auto") -> ReformulationArtifacts:
    if path == "auto":
        path = "two-stage" if problem.T == 2 else "multistage"
    if path == "two-stage":
        return dualize_two_stage(problem, bp, config)
    return dualize_multistage(problem, bp, config)


# ---------------------------------------------------------------------------
# reading policies back and re-solving with data-driven bounds
# ---------------------------------------------------------------------------


def extract_policy(art: ReformulationArtifacts, report: SolveReport, tol: float = 1e-6) -> PolicyCoefficients:
    if report is None or report.x is None:
        raise NoIncumbentError(f"no incumbent to extract (status {getattr(report, 'status', None)})")
    x = report.x
    s = art.problem.structure
    supports = {p: art.problem.ddu.support(s, p) for p in s.params()}

    def take(idx):
        return np.asarray(x[idx], dtype=float)

    def take_bin(idx):
        vals = take(idx)
        if np.any(np.abs(vals - np.round(vals)) > tol):
            raise ValueError("binary rule coefficient is fractional beyond tolerance")
        return np.round(vals)

    c = PolicyCoefficients(
        s, art.breakpoints, supports, art.config.info,
        {k: take(v) for k, v in art.Xbar.items()},
        {k: take(v) for k, v in art.Xhat.items()},
        {k: take_bin(v) for k, v in art.Ydot.items()},
        {k: take_bin(v) for k, v in art.Yddot.items()},
        take(art.x1), np.round(take(art.y1)))
    return c


BOUND_RULES: dict[str, Callable[[float], float]] = {
    "L": lambda lam: lam,
    "2L": lambda lam: 2.0 * lam,
    "2L+0.01": lambda lam: 2.0 * lam + 0.01,
}


def bound_experiment(art: ReformulationArtifacts, report: SolveReport, rule: str, gap: float = 0.01,
                     time_limit: float | None = None, backend=None):
    """Re-solve with every big-M'd dual bounded by a multiple of its incumbent value.

    Returns ``(report, rebuilt_artifacts)``.
    """
    if report is None or report.x is None:
        raise NoIncumbentError("bound update needs an incumbent")
    f = BOUND_RULES[rule]
    m = art.model
    per_var = dict(art.config.bigm.per_var)
    for k in m.tracked_bounds:
        lam = max(0.0, float(report.x[k]))
        per_var[m.var_names[k]] = f(lam)
    bigm = BigMConfig(art.config.bigm.default, dict(art.config.bigm.per_family), per_var)
    new = art.rebuild(bigm)
    rep = solve(new.model, gap=gap, time_limit=time_limit, backend=backend)
    return rep, new

"""In-memory robust multistage MILP instances.

Stage ``t >= 2`` rows read

    sum_p xi_p (A[t,p] x1 + D[t,p] y1 - b[t,p])
        + sum_{s=2..t} (At[t,s] x_s + Dt[t,s] y_s) <= 0

for every ``xi`` in the stage-``t`` set, and stage 1 rows are the certain
system ``A1 x1 + D1 y1 <= b1``.  The objective is ``x1[0]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .structure import CONSTANT, ParamId, StageStructure
from .uncertainty import Breakpoints, DduSet

BlockKey = tuple[int, ParamId]


class ProblemError(ValueError):
    pass


class NotTwoStageError(ProblemError):
    pass


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        if arr.size == 0:
            arr = arr.reshape(shape)
        elif arr.shape != tuple(shape) and arr.size == int(np.prod(shape)) and arr.ndim != len(shape):
            arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MultistageProblem:
    structure: StageStructure
    A1: np.ndarray
    D1: np.ndarray
    b1: np.ndarray
    A: Mapping[BlockKey, np.ndarray]
    D: Mapping[BlockKey, np.ndarray]
    b: Mapping[BlockKey, np.ndarray]
    At: Mapping[tuple[int, int], np.ndarray]
    Dt: Mapping[tuple[int, int], np.ndarray]
    ddu: DduSet
    breakpoints: Breakpoints = field(default_factory=Breakpoints)
    meta: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def create(cls, structure: StageStructure, A1, D1, b1, A=None, D=None, b=None,
               At=None, Dt=None, ddu: DduSet | None = None,
               breakpoints: Breakpoints | None = None, meta=None) -> "MultistageProblem":
        """Build an instance, filling every absent block with zeros of the right shape."""
        s = structure
        A, D, b = dict(A or {}), dict(D or {}), dict(b or {})
        At, Dt = dict(At or {}), dict(Dt or {})
        P1, Q1 = s.p(1), s.q(1)
        fA, fD, fb, fAt, fDt = {}, {}, {}, {}, {}
        for t in range(2, s.T + 1):
            N = s.n(t)
            for p in s.params(t):
                fA[(t, p)] = _frozen(A.get((t, p), np.zeros((N, P1))), (N, P1))
                fD[(t, p)] = _frozen(D.get((t, p), np.zeros((N, Q1))), (N, Q1))
                fb[(t, p)] = _frozen(b.get((t, p), np.zeros(N)), (N,))
            for tt in range(2, t + 1):
                fAt[(t, tt)] = _frozen(At.get((t, tt), np.zeros((N, s.p(tt)))), (N, s.p(tt)))
                fDt[(t, tt)] = _frozen(Dt.get((t, tt), np.zeros((N, s.q(tt)))), (N, s.q(tt)))
        extra = set(A) - set(fA) | set(D) - set(fD) | set(b) - set(fb)
        extra |= set(At) - set(fAt) | set(Dt) - set(fDt)
        if extra:
            raise ProblemError(f"blocks outside the stage structure: {sorted(extra)}")
        if ddu is None:
            raise ProblemError("an uncertainty set is required")
        ddu = _normalise_ddu(ddu, s)
        return cls(s, _frozen(A1, (s.n(1), P1)), _frozen(D1, (s.n(1), Q1)), _frozen(b1, (s.n(1),)),
                   fA, fD, fb, fAt, fDt, ddu, breakpoints or Breakpoints(), dict(meta or {}))

    # -- convenience -------------------------------------------------------
    @property
    def T(self) -> int:
        return self.structure.T

    def with_breakpoints(self, bp: Breakpoints) -> "MultistageProblem":
        return MultistageProblem(self.structure, self.A1, self.D1, self.b1, self.A, self.D, self.b,
                                 self.At, self.Dt, self.ddu, bp, self.meta)

    def objective_row(self) -> np.ndarray:
        e = np.zeros(self.structure.p(1))
        e[0] = 1.0
        return e

    def f_block(self, t: int, p: ParamId, x1: np.ndarray, y1: np.ndarray) -> np.ndarray:
        """``A[t,p] x1 + D[t,p] y1 - b[t,p]`` for fixed first-stage decisions."""
        return self.A[(t, p)] @ x1 + self.D[(t, p)] @ y1 - self.b[(t, p)]

    def stage_residual(self, t: int, xi: np.ndarray, x1: np.ndarray, y1: np.ndarray,
                       xs: Mapping[int, np.ndarray], ys: Mapping[int, np.ndarray]) -> np.ndarray:
        """Left-hand side minus right-hand side of the stage-``t`` rows at a realisation."""
        s = self.structure
        x1 = np.asarray(x1, dtype=float)
        y1 = np.asarray(y1, dtype=float)
        out = np.zeros(s.n(t))
        for p in s.params(t):
            out += xi[s.pos(p)] * self.f_block(t, p, x1, y1)
        for tt in range(2, t + 1):
            out += self.At[(t, tt)] @ np.asarray(xs[tt], dtype=float)
            out += self.Dt[(t, tt)] @ np.asarray(ys[tt], dtype=float)
        return out

    def first_stage_residual(self, x1: np.ndarray, y1: np.ndarray) -> np.ndarray:
        return self.A1 @ np.asarray(x1, dtype=float) + self.D1 @ np.asarray(y1, dtype=float) - self.b1


def _normalise_ddu(ddu: DduSet, s: StageStructure) -> DduSet:
    W = {}
    for t, w in ddu.W.items():
        W[t] = _frozen(w, (0, s.n_params(t)) if np.size(w) == 0 else None)
    U = {}
    for (t, tt), u in ddu.U.items():
        m = W[t].shape[0] if t in W else 0
        U[(t, tt)] = _frozen(u, (m, s.q(tt)) if np.size(u) == 0 else None)
    return DduSet(W, U, _frozen(ddu.xi_min), _frozen(ddu.xi_max))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _shape(name: str, arr, expected, out: list[str]) -> None:
    got = np.shape(arr)
    if tuple(got) != tuple(expected):
        out.append(f"dimension mismatch in {name}: expected {tuple(expected)}, got {tuple(got)}")
    elif np.size(arr) and not np.all(np.isfinite(arr)):
        out.append(f"non-finite entries in {name}")


def validate_problem(p: MultistageProblem) -> list[str]:
    """Structural problems of an instance; empty iff well formed."""
    s = p.structure
    out = list(s.problems())
    if out:
        return out
    P1, Q1 = s.p(1), s.q(1)
    _shape("A1", p.A1, (s.n(1), P1), out)
    _shape("D1", p.D1, (s.n(1), Q1), out)
    _shape("b1", p.b1, (s.n(1),), out)
    for t in range(2, s.T + 1):
        N = s.n(t)
        for q in s.params(t):
            for name, blocks, shape in (("A", p.A, (N, P1)), ("D", p.D, (N, Q1)), ("b", p.b, (N,))):
                if (t, q) not in blocks:
                    out.append(f"missing block {name}[{t}][{q[0]},{q[1]}]")
                else:
                    _shape(f"{name}[{t}][{q[0]},{q[1]}]", blocks[(t, q)], shape, out)
        for tt in range(2, t + 1):
            for name, blocks, shape in (("At", p.At, (N, s.p(tt))), ("Dt", p.Dt, (N, s.q(tt)))):
                if (t, tt) not in blocks:
                    out.append(f"missing block {name}[{t}][{tt}]")
                else:
                    _shape(f"{name}[{t}][{tt}]", blocks[(t, tt)], shape, out)
    ddu = p.ddu
    K = s.n_params()
    _shape("xi_min", ddu.xi_min, (K,), out)
    _shape("xi_max", ddu.xi_max, (K,), out)
    if np.shape(ddu.xi_min) == (K,) and np.shape(ddu.xi_max) == (K,):
        if np.any(ddu.xi_min > ddu.xi_max):
            out.append("support lower bound exceeds upper bound")
        if ddu.xi_min[0] != 1.0 or ddu.xi_max[0] != 1.0:
            out.append("the constant parameter (1,1) must have support [1, 1]")
    for t in range(2, s.T + 1):
        if t not in ddu.W:
            out.append(f"missing uncertainty matrix W[{t}]")
            continue
        M = np.shape(ddu.W[t])[0] if np.ndim(ddu.W[t]) == 2 else -1
        _shape(f"W[{t}]", ddu.W[t], (M, s.n_params(t)), out)
        for tt in range(1, t):
            if (t, tt) in ddu.U:
                _shape(f"U[{t}][{tt}]", ddu.U[(t, tt)], (M, s.q(tt)), out)
    for (t, tt) in ddu.U:
        if not (2 <= t <= s.T and 1 <= tt < t):
            out.append(f"uncertainty block U[{t}][{tt}] outside the stage structure")
    if not out:
        out.extend(p.breakpoints.problems(s, ddu))
    return out


# ---------------------------------------------------------------------------
# two-stage view
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoStageView:
    """Row-wise two-stage data.

    ``A[n]`` is ``K x P`` so that row ``n`` reads
    ``xi' (A[n] x + D[n] y) + a[n]' x~ + d[n]' y~ <= xi' b[n]``.
    """

    A: np.ndarray  # (N, K, P)
    D: np.ndarray  # (N, K, Q)
    b: np.ndarray  # (N, K)
    a_tilde: np.ndarray  # (N, P~)
    d_tilde: np.ndarray  # (N, Q~)
    A1: np.ndarray
    D1: np.ndarray
    b1: np.ndarray
    W: np.ndarray
    U: np.ndarray
    xi_min: np.ndarray
    xi_max: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def K(self) -> int:
        return self.A.shape[1]


def as_two_stage(p: MultistageProblem) -> TwoStageView:
    s = p.structure
    if s.T != 2:
        raise NotTwoStageError(f"instance has {s.T} stages, not 2")
    params = s.params(2)
    A = np.stack([p.A[(2, q)] for q in params], axis=1)
    D = np.stack([p.D[(2, q)] for q in params], axis=1)
    b = np.stack([p.b[(2, q)] for q in params], axis=1)
    U = p.ddu.U.get((2, 1), np.zeros((p.ddu.W[2].shape[0], s.q(1))))
    return TwoStageView(A, D, b, np.array(p.At[(2, 2)]), np.array(p.Dt[(2, 2)]),
                        np.array(p.A1), np.array(p.D1), np.array(p.b1),
                        np.array(p.ddu.W[2]), np.array(U),
                        np.array(p.ddu.xi_min), np.array(p.ddu.xi_max))


def from_two_stage(v: TwoStageView, breakpoints: Breakpoints | None = None,
                   meta=None) -> MultistageProblem:
    N, K, P = v.A.shape
    Q = v.D.shape[2]
    s = StageStructure((1, K - 1), (P, v.a_tilde.shape[1]), (Q, v.d_tilde.shape[1]), (v.A1.shape[0], N))
    params = s.params(2)
    ddu = DduSet({2: v.W}, {(2, 1): v.U}, v.xi_min, v.xi_max)
    return MultistageProblem.create(
        s, v.A1, v.D1, v.b1,
        A={(2, q): v.A[:, k, :] for k, q in enumerate(params)},
        D={(2, q): v.D[:, k, :] for k, q in enumerate(params)},
        b={(2, q): v.b[:, k] for k, q in enumerate(params)},
        At={(2, 2): v.a_tilde}, Dt={(2, 2): v.d_tilde},
        ddu=ddu, breakpoints=breakpoints, meta=meta)


# ---------------------------------------------------------------------------
# JSON instance files
# ---------------------------------------------------------------------------


def _schema() -> dict:
    return json.loads(resources.files("ddro.data").joinpath("instance.schema.json").read_text())


def problem_to_dict(p: MultistageProblem) -> dict:
    s = p.structure
    robust = []
    for t in range(2, s.T + 1):
        for q in s.params(t):
            A, D, b = p.A[(t, q)], p.D[(t, q)], p.b[(t, q)]
            if not (A.any() or D.any() or b.any()):
                continue
            robust.append({"t": t, "param": [q[0], q[1]], "A": A.tolist(), "D": D.tolist(), "b": b.tolist()})
    recourse = []
    for (t, tt), A in sorted(p.At.items()):
        D = p.Dt[(t, tt)]
        if A.any() or D.any():
            recourse.append({"t": t, "s": tt, "A": A.tolist(), "D": D.tolist()})
    unc = {
        "W": [{"t": t, "W": w.tolist()} for t, w in sorted(p.ddu.W.items())],
        "U": [{"t": t, "s": tt, "U": u.tolist()} for (t, tt), u in sorted(p.ddu.U.items()) if u.any()],
        "xi_min": p.ddu.xi_min.tolist(),
        "xi_max": p.ddu.xi_max.tolist(),
    }
    return {
        "stages": s.to_dict(),
        "blocks": {"first": {"A": p.A1.tolist(), "D": p.D1.tolist(), "b": p.b1.tolist()},
                   "robust": robust, "recourse": recourse},
        "uncertainty": unc,
        "breakpoints": p.breakpoints.to_dict(),
        "meta": dict(p.meta),
    }


def problem_from_dict(d: dict, validate_schema: bool = True) -> MultistageProblem:
    if validate_schema:
        import jsonschema

        jsonschema.validate(d, _schema())
    s = StageStructure.from_dict(d["stages"])
    first = d["blocks"]["first"]
    A, D, b, At, Dt = {}, {}, {}, {}, {}
    for blk in d["blocks"]["robust"]:
        key = (blk["t"], (blk["param"][0], blk["param"][1]))
        N = s.n(blk["t"])
        A[key] = _frozen(blk["A"], (N, s.p(1)))
        D[key] = _frozen(blk["D"], (N, s.q(1)))
        b[key] = _frozen(blk["b"], (N,))
    for blk in d["blocks"]["recourse"]:
        key = (blk["t"], blk["s"])
        N = s.n(blk["t"])
        At[key] = _frozen(blk["A"], (N, s.p(blk["s"])))
        Dt[key] = _frozen(blk["D"], (N, s.q(blk["s"])))
    unc = d["uncertainty"]
    W = {e["t"]: _frozen(e["W"], (0, s.n_params(e["t"]))) for e in unc["W"]}
    U = {}
    for e in unc["U"]:
        U[(e["t"], e["s"])] = _frozen(e["U"], (W[e["t"]].shape[0], s.q(e["s"])))
    for t in W:
        for tt in range(1, t):
            U.setdefault((t, tt), np.zeros((W[t].shape[0], s.q(tt))))
    ddu = DduSet(W, U, np.array(unc["xi_min"], dtype=float), np.array(unc["xi_max"], dtype=float))
    return MultistageProblem.create(s, _frozen(first["A"], (s.n(1), s.p(1))),
                                    _frozen(first["D"], (s.n(1), s.q(1))), first["b"],
                                    A, D, b, At, Dt, ddu, Breakpoints.from_dict(d.get("breakpoints", {})),
                                    d.get("meta", {}))


def save_problem(p: MultistageProblem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(p), indent=1) + "\n")


def load_problem(path: str | Path) -> MultistageProblem:
    return problem_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "CONSTANT", "MultistageProblem", "NotTwoStageError", "ProblemError", "TwoStageView",
    "as_two_stage", "from_two_stage", "load_problem", "problem_from_dict", "problem_to_dict",
    "save_problem", "validate_problem",
]

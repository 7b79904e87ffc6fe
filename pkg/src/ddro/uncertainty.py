"""Decision-dependent polyhedral uncertainty sets and their lifted hulls."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .structure import CONSTANT, ParamId, StageStructure, param_key, parse_param_key

FEAS_TOL = 1e-6


class SupportError(ValueError):
    """Raised when a value lies outside the marginal support of its parameter."""


class BreakpointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# uncertainty set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DduSet:
    """Stage-wise sets ``W[t] xi^[t] <= sum_{s<t} U[t, s] y_s``.

    ``W[t]`` has one column per parameter observed up to stage ``t`` (flat
    order of :class:`StageStructure`); ``U[(t, s)]`` multiplies the stage-``s``
    binaries.  ``xi_min``/``xi_max`` give the marginal support box of every
    parameter.
    """

    W: Mapping[int, np.ndarray]
    U: Mapping[tuple[int, int], np.ndarray]
    xi_min: np.ndarray
    xi_max: np.ndarray

    def m(self, t: int) -> int:
        return self.W[t].shape[0]

    def support(self, structure: StageStructure, p: ParamId) -> tuple[float, float]:
        k = structure.pos(p)
        return float(self.xi_min[k]), float(self.xi_max[k])

    def rhs(self, t: int, ys: Mapping[int, np.ndarray]) -> np.ndarray:
        """Right-hand side ``sum_s U[t, s] y_s`` for realised binaries."""
        out = np.zeros(self.m(t))
        for (tt, s), u in self.U.items():
            if tt == t and u.size:
                out += u @ np.asarray(ys[s], dtype=float)
        return out

    def contains(self, structure: StageStructure, t: int, xi: np.ndarray,
                 ys: Mapping[int, np.ndarray], tol: float = FEAS_TOL) -> bool:
        n = structure.n_params(t)
        lhs = self.W[t] @ np.asarray(xi, dtype=float)[:n]
        return bool(np.all(lhs <= self.rhs(t, ys) + tol))

    def to_dict(self) -> dict:
        return {
            "W": {str(t): w.tolist() for t, w in sorted(self.W.items())},
            "U": {f"{t},{s}": u.tolist() for (t, s), u in sorted(self.U.items())},
            "xi_min": self.xi_min.tolist(),
            "xi_max": self.xi_max.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, structure: StageStructure | None = None) -> "DduSet":
        W = {int(t): _mat(w) for t, w in d["W"].items()}
        U = {}
        for key, u in d["U"].items():
            t, s = (int(v) for v in key.split(","))
            arr = np.asarray(u, dtype=float)
            if arr.ndim != 2:
                rows = W[t].shape[0] if t in W else 0
                cols = structure.q(s) if structure is not None else 0
                arr = arr.reshape(rows, cols)
            U[(t, s)] = arr
        return cls(W, U, np.asarray(d["xi_min"], dtype=float), np.asarray(d["xi_max"], dtype=float))


def _mat(w) -> np.ndarray:
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 2:
        arr = arr.reshape(0, 0) if arr.size == 0 else np.atleast_2d(arr)
    return arr


# ---------------------------------------------------------------------------
# breakpoints and lifting operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Breakpoints:
    """Sorted interior breakpoints per parameter; absent parameters have none."""

    points: Mapping[ParamId, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", {p: tuple(float(v) for v in pts)
                                            for p, pts in self.points.items() if len(pts)})

    def of(self, p: ParamId) -> tuple[float, ...]:
        return self.points.get(p, ())

    def r(self, p: ParamId) -> int:
        return len(self.of(p)) + 1

    def g(self, p: ParamId) -> int:
        return max(1, self.r(p) - 1)

    def total(self) -> int:
        return sum(len(v) for v in self.points.values())

    def problems(self, structure: StageStructure, ddu: DduSet) -> list[str]:
        out = []
        known = set(structure.params())
        for p, pts in self.points.items():
            if p not in known:
                out.append(f"breakpoints given for unknown parameter {p}")
                continue
            if p == CONSTANT:
                out.append("the constant parameter (1,1) cannot carry breakpoints")
                continue
            lo, hi = ddu.support(structure, p)
            if any(b <= a for a, b in zip(pts, pts[1:])):
                out.append(f"breakpoints of {p} are not strictly increasing")
            for v in pts:
                if not lo < v < hi:
                    out.append(f"breakpoint {v} of {p} not strictly inside ({lo}, {hi})")
        return out

    def validate(self, structure: StageStructure, ddu: DduSet) -> "Breakpoints":
        problems = self.problems(structure, ddu)
        if problems:
            raise BreakpointError("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return {param_key(p): list(v) for p, v in sorted(self.points.items())}

    @classmethod
    def from_dict(cls, d: Mapping[str, Sequence[float]]) -> "Breakpoints":
        return cls({parse_param_key(k): tuple(v) for k, v in d.items()})


def _check_support(value: float, support: tuple[float, float], tol: float = 1e-9) -> None:
    lo, hi = support
    if value < lo - tol or value > hi + tol:
        raise SupportError(f"value {value} outside support [{lo}, {hi}]")


def lift_continuous(value: float, points: Sequence[float], support: tuple[float, float]) -> np.ndarray:
    """Piecewise-linear lifting: component ``j`` is the part of ``value`` inside piece ``j``."""
    _check_support(value, support)
    r = len(points) + 1
    if r == 1:
        return np.array([float(value)])
    out = np.empty(r)
    out[0] = min(value, points[0])
    for j in range(1, r - 1):
        out[j] = max(min(value, points[j]) - points[j - 1], 0.0)
    out[r - 1] = max(value - points[r - 2], 0.0)
    return out


def lift_binary(value: float, points: Sequence[float], support: tuple[float, float]) -> np.ndarray:
    """Step lifting ``1(value >= p_j)``; the single component is 1 without breakpoints."""
    _check_support(value, support)
    if not points:
        return np.ones(1)
    return np.array([1.0 if value >= p else 0.0 for p in points])


# ---------------------------------------------------------------------------
# vertex sets of the lifted marginal supports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vertex:
    v: float
    vbar: tuple[float, ...]
    vhat: tuple[float, ...]


@dataclass(frozen=True)
class ParamVertices:
    """Vertices of one parameter grouped by piece (two endpoints each)."""

    param: ParamId
    pieces: tuple[tuple[Vertex, Vertex], ...]

    @property
    def vertices(self) -> tuple[Vertex, ...]:
        return tuple(v for piece in self.pieces for v in piece)

    @property
    def r(self) -> int:
        return len(self.pieces)

    @property
    def g(self) -> int:
        return max(1, self.r - 1)

    def distinct(self) -> tuple[Vertex, ...]:
        seen, out = set(), []
        for v in self.vertices:
            if v not in seen:
                seen.add(v)
                out.append(v)
        return tuple(out)


def param_vertices(points: Sequence[float], support: tuple[float, float],
                   param: ParamId = (0, 0)) -> ParamVertices:
    lo, hi = support
    knots = [lo, *points, hi]
    r = len(points) + 1
    g = max(1, r - 1)
    pieces = []
    for j in range(1, r + 1):
        # limit of the step lifting from inside piece j
        if r == 1:
            vhat = (1.0,)
        else:
            vhat = tuple(1.0 if jj < j - 1 else 0.0 for jj in range(g))
        ends = []
        for v in (knots[j - 1], knots[j]):
            ends.append(Vertex(float(v), tuple(lift_continuous(v, points, support).tolist()), vhat))
        pieces.append(tuple(ends))
    return ParamVertices(param, tuple(pieces))


@dataclass(frozen=True)
class LiftedVertexSet:
    by_param: Mapping[ParamId, ParamVertices]

    def __getitem__(self, p: ParamId) -> ParamVertices:
        return self.by_param[p]

    def __iter__(self):
        return iter(self.by_param)


def build_vertex_set(bp: Breakpoints, structure: StageStructure, ddu: DduSet,
                     upto: int | None = None) -> LiftedVertexSet:
    bp.validate(structure, ddu)
    return LiftedVertexSet({p: param_vertices(bp.of(p), ddu.support(structure, p), p)
                            for p in structure.params(upto)})


# ---------------------------------------------------------------------------
# lifted hull constraint system
# ---------------------------------------------------------------------------


@dataclass
class HullSystem:
    """Linear description of the lifted hull for one stage.

    Column layout per parameter: ``xi`` (1), ``xbar`` (r), ``xhat`` (g),
    ``lam`` (2r).  Equalities hold the simplex normalisation and the three
    mixing relations; the coupling rows ``W xi <= sum_s U[s] y_s`` keep ``y``
    symbolic until :meth:`bind` is called.
    """

    stage: int
    params: tuple[ParamId, ...]
    xi_col: dict[ParamId, int]
    xbar_cols: dict[ParamId, np.ndarray]
    xhat_cols: dict[ParamId, np.ndarray]
    lam_cols: dict[ParamId, np.ndarray]
    n_cols: int
    A_eq: np.ndarray
    b_eq: np.ndarray
    W: np.ndarray
    U: dict[int, np.ndarray]
    row_kinds: list[str]

    @property
    def n_lambda(self) -> int:
        return sum(len(c) for c in self.lam_cols.values())

    def coupling_lhs(self) -> np.ndarray:
        """Coupling-row coefficients on the hull columns (``W xi`` part only)."""
        out = np.zeros((self.W.shape[0], self.n_cols))
        for k, p in enumerate(self.params):
            out[:, self.xi_col[p]] = self.W[:, k]
        return out

    def bind(self, fixed: Mapping[int, np.ndarray] | None = None,
             lifted: Mapping[int, np.ndarray] | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(A_ub, b_ub)`` with each ``y_s`` either fixed or a linear map of hull columns.

        ``fixed[s]`` is a realised vector; ``lifted[s]`` is a ``(Q_s, n_cols)``
        matrix expressing ``y_s`` through hull columns (decision rules).
        """
        fixed = dict(fixed or {})
        lifted = dict(lifted or {})
        A = self.coupling_lhs()
        b = np.zeros(self.W.shape[0])
        for s, u in self.U.items():
            if not u.size:
                continue
            if s in lifted:
                A -= u @ np.asarray(lifted[s], dtype=float)
            elif s in fixed:
                b += u @ np.asarray(fixed[s], dtype=float)
            elif np.any(u):
                raise KeyError(f"binary decisions of stage {s} are neither fixed nor lifted")
        return A, b

    def point(self, sol: np.ndarray) -> dict[ParamId, tuple[float, np.ndarray, np.ndarray]]:
        return {p: (float(sol[self.xi_col[p]]), sol[self.xbar_cols[p]], sol[self.xhat_cols[p]])
                for p in self.params}


def build_hull_system(ddu: DduSet, structure: StageStructure, bp: Breakpoints, t: int,
                      vertices: LiftedVertexSet | None = None) -> HullSystem:
    params = structure.params(t)
    if vertices is None:
        vertices = build_vertex_set(bp, structure, ddu, upto=t)
    xi_col, xbar_cols, xhat_cols, lam_cols = {}, {}, {}, {}
    col = 0
    for p in params:
        pv = vertices[p]
        xi_col[p] = col
        col += 1
        xbar_cols[p] = np.arange(col, col + pv.r)
        col += pv.r
        xhat_cols[p] = np.arange(col, col + pv.g)
        col += pv.g
        lam_cols[p] = np.arange(col, col + 2 * pv.r)
        col += 2 * pv.r
    rows, rhs, kinds = [], [], []
    for p in params:
        verts = vertices[p].vertices
        lam = lam_cols[p]
        row = np.zeros(col)
        row[lam] = 1.0
        rows.append(row)
        rhs.append(1.0)
        kinds.append("simplex")
        row = np.zeros(col)
        row[xi_col[p]] = 1.0
        row[lam] = [-v.v for v in verts]
        rows.append(row)
        rhs.append(0.0)
        kinds.append("mix_xi")
        for j, c in enumerate(xbar_cols[p]):
            row = np.zeros(col)
            row[c] = 1.0
            row[lam] = [-v.vbar[j] for v in verts]
            rows.append(row)
            rhs.append(0.0)
            kinds.append("mix_xbar")
        for j, c in enumerate(xhat_cols[p]):
            row = np.zeros(col)
            row[c] = 1.0
            row[lam] = [-v.vhat[j] for v in verts]
            rows.append(row)
            rhs.append(0.0)
            kinds.append("mix_xhat")
    if t >= 2:
        W = np.asarray(ddu.W[t], dtype=float)
        U = {s: np.asarray(u, dtype=float) for (tt, s), u in ddu.U.items() if tt == t}
    else:
        W = np.zeros((0, len(params)))
        U = {}
    return HullSystem(t, params, xi_col, xbar_cols, xhat_cols, lam_cols, col,
                      np.array(rows), np.array(rhs), W, U, kinds)


def _lam_bounds(hull: HullSystem):
    lb = np.full(hull.n_cols, -np.inf)
    ub = np.full(hull.n_cols, np.inf)
    for cols in hull.lam_cols.values():
        lb[cols] = 0.0
    return list(zip(lb, ub))


def hull_optimize(hull: HullSystem, c: np.ndarray, sense: str = "max",
                  fixed: Mapping[int, np.ndarray] | None = None,
                  lifted: Mapping[int, np.ndarray] | None = None):
    """Optimise ``c @ z`` over the bound hull; returns ``(status, value, z)``.

    ``status`` is ``"optimal"``, ``"infeasible"`` or ``"error"``.
    """
    A_ub, b_ub = hull.bind(fixed, lifted)
    sign = -1.0 if sense == "max" else 1.0
    res = linprog(sign * np.asarray(c, dtype=float), A_ub=A_ub if A_ub.size else None,
                  b_ub=b_ub if A_ub.size else None, A_eq=hull.A_eq, b_eq=hull.b_eq,
                  bounds=_lam_bounds(hull), method="highs",
                  options={"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9})
    if res.status == 2:
        return "infeasible", None, None
    if res.status != 0:
        return "error", None, None
    return "optimal", sign * float(res.fun), res.x


def coordinate_range(hull: HullSystem, p: ParamId, **binding) -> tuple[float, float] | None:
    """Min and max of ``xi_p`` over the bound hull, or ``None`` when empty."""
    c = np.zeros(hull.n_cols)
    c[hull.xi_col[p]] = 1.0
    st, hi, _ = hull_optimize(hull, c, "max", **binding)
    if st != "optimal":
        return None
    _, lo, _ = hull_optimize(hull, c, "min", **binding)
    return lo, hi


def support_spot_check(ddu: DduSet, structure: StageStructure,
                       y_samples: Sequence[Mapping[int, np.ndarray]]) -> list[str]:
    """LP check that the support box contains and is attained by the sampled sets.

    Every coordinate is maximised and minimised over ``Xi^[T](y)`` for each
    sampled binary assignment.  Returns human readable problems: coordinates
    escaping the box, and box faces never touched by any sample.
    """
    T = structure.T
    n = structure.n_params(T)
    problems = []
    reach_lo = np.full(n, np.inf)
    reach_hi = np.full(n, -np.inf)
    for ys in y_samples:
        A = ddu.W[T]
        b = ddu.rhs(T, ys)
        A_eq = np.zeros((1, n))
        A_eq[0, 0] = 1.0
        for k in range(n):
            for sign in (1.0, -1.0):
                c = np.zeros(n)
                c[k] = -sign
                res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=[1.0],
                              bounds=[(None, None)] * n, method="highs")
                if res.status != 0:
                    break
                val = float(res.x[k])
                if sign > 0:
                    reach_hi[k] = max(reach_hi[k], val)
                else:
                    reach_lo[k] = min(reach_lo[k], val)
    params = structure.params()
    for k in range(n):
        if reach_hi[k] > ddu.xi_max[k] + FEAS_TOL or reach_lo[k] < ddu.xi_min[k] - FEAS_TOL:
            problems.append(f"parameter {params[k]} escapes its support box")
        elif np.isfinite(reach_hi[k]) and (reach_hi[k] < ddu.xi_max[k] - FEAS_TOL
                                           or reach_lo[k] > ddu.xi_min[k] + FEAS_TOL):
            problems.append(f"support box of {params[k]} not attained by sampled sets")
    return problems


def vertex_table(vs: LiftedVertexSet) -> str:
    """Tabular text dump of vertex sets (debug subcommand)."""
    lines = ["param\tpiece\tv\tvbar\tvhat"]
    for p in vs:
        for j, piece in enumerate(vs[p].pieces, start=1):
            for v in piece:
                lines.append(f"{p[0]},{p[1]}\t{j}\t{v.v:g}\t"
                             + " ".join(f"{x:g}" for x in v.vbar) + "\t"
                             + " ".join(f"{x:g}" for x in v.vhat))
    return "\n".join(lines)

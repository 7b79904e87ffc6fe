"""Generic MILP container, CPLEX-LP export and pluggable solver backends.

The reformulation code only talks to :class:`MilpModel` and to a backend
object exposing ``solve(model, gap, time_limit) -> SolveReport``.  Three
backends ship:

* ``highs``   - in-process HiGHS through :mod:`highspy` (default)
* ``scipy``   - :func:`scipy.optimize.milp` (also HiGHS underneath)
* ``lpfile``  - writes the model as LP text and has HiGHS read the file back
* any filesystem path - an external HiGHS-compatible executable driven
  through LP files
"""

from __future__ import annotations

import itertools
import math
import os
import re
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)


class ModelError(ValueError):
    pass


class BackendError(RuntimeError):
    pass


class Expr:
    """Sparse affine expression ``sum(coef * var) + const`` over variable indices."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms: dict[int, float] = dict(terms) if terms else {}
        self.const = float(const)

    @classmethod
    def var(cls, idx: int, coef: float = 1.0) -> "Expr":
        return cls({idx: float(coef)})

    def copy(self) -> "Expr":
        return Expr(self.terms, self.const)

    def add(self, idx: int, coef: float) -> "Expr":
        if coef:
            self.terms[idx] = self.terms.get(idx, 0.0) + coef
        return self

    def iadd(self, other: "Expr", scale: float = 1.0) -> "Expr":
        if scale == 0.0:
            return self
        t = self.terms
        for k, v in other.terms.items():
            t[k] = t.get(k, 0.0) + scale * v
        self.const += scale * other.const
        return self

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, Expr):
            return out.iadd(other)
        out.const += float(other)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        out = self.copy()
        if isinstance(other, Expr):
            return out.iadd(other, -1.0)
        out.const -= float(other)
        return out

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, scalar: float):
        s = float(scalar)
        return Expr({k: s * v for k, v in self.terms.items()}, s * self.const)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(v * x[k] for k, v in self.terms.items())

    def __repr__(self) -> str:
        return f"Expr({self.terms!r}, const={self.const!r})"


@dataclass
class MilpModel:
    """Minimisation MILP with named variables and sparse rows.

    Variables are either continuous or binary; binaries always carry bounds
    ``[0, 1]``.  ``tracked_bounds`` maps variable indices to the artificial
    bound imposed on them (big-M duals) so solve reports can flag variables
    that end up at their bound.
    """

    name: str = "model"
    var_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    row_names: list[str] = field(default_factory=list)
    row_idx: list[np.ndarray] = field(default_factory=list)
    row_val: list[np.ndarray] = field(default_factory=list)
    row_sense: list[str] = field(default_factory=list)
    row_rhs: list[float] = field(default_factory=list)
    tracked_bounds: dict[int, float] = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)
    _row_index: dict[str, int] = field(default_factory=dict, repr=False)

    # -- construction -----------------------------------------------------
    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> int:
        if name in self._index:
            raise ModelError(f"duplicate variable name {name!r}")
        if binary:
            lb, ub = 0.0, 1.0
        idx = len(self.var_names)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        self._index[name] = idx
        return idx

    def add_row(self, name: str, expr: Expr, sense: str, rhs: float = 0.0) -> int:
        if sense not in _SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        if name in self._row_index:
            raise ModelError(f"duplicate row name {name!r}")
        items = [(k, v) for k, v in expr.terms.items() if v != 0.0]
        items.sort()
        idx = np.fromiter((k for k, _ in items), dtype=np.int64, count=len(items))
        val = np.fromiter((v for _, v in items), dtype=float, count=len(items))
        r = len(self.row_names)
        self.row_names.append(name)
        self.row_idx.append(idx)
        self.row_val.append(val)
        self.row_sense.append(sense)
        self.row_rhs.append(float(rhs) - expr.const)
        self._row_index[name] = r
        return r

    def set_objective(self, expr: Expr) -> None:
        self.objective = {k: v for k, v in expr.terms.items() if v != 0.0}

    def set_bounds(self, idx: int, lb: float | None = None, ub: float | None = None) -> None:
        if lb is not None:
            self.lb[idx] = float(lb)
        if ub is not None:
            self.ub[idx] = float(ub)

    # -- queries ------------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_rows(self) -> int:
        return len(self.row_names)

    @property
    def num_binary(self) -> int:
        return sum(self.binary)

    def index(self, name: str) -> int:
        return self._index[name]

    def row_index(self, name: str) -> int:
        return self._row_index[name]

    def validate(self) -> list[str]:
        problems = []
        n = self.num_vars
        for i, (lo, hi) in enumerate(zip(self.lb, self.ub)):
            if math.isnan(lo) or math.isnan(hi):
                problems.append(f"variable {self.var_names[i]} has NaN bound")
            elif lo > hi:
                problems.append(f"variable {self.var_names[i]} has lb > ub")
            if self.binary[i] and (lo < 0.0 or hi > 1.0):
                problems.append(f"binary {self.var_names[i]} bounds outside [0, 1]")
        for k, v in self.objective.items():
            if not 0 <= k < n:
                problems.append(f"objective references undeclared variable {k}")
            if not math.isfinite(v):
                problems.append(f"objective coefficient of {self.var_names[k]} not finite")
        for r, (idx, val) in enumerate(zip(self.row_idx, self.row_val)):
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                problems.append(f"row {self.row_names[r]} references undeclared variable")
            if not np.all(np.isfinite(val)) or not math.isfinite(self.row_rhs[r]):
                problems.append(f"row {self.row_names[r]} has non-finite data")
        return problems

    def matrix(self) -> sp.csr_matrix:
        indptr = np.zeros(self.num_rows + 1, dtype=np.int64)
        np.cumsum([len(i) for i in self.row_idx], out=indptr[1:])
        if self.num_rows:
            indices = np.concatenate(self.row_idx) if indptr[-1] else np.zeros(0, dtype=np.int64)
            data = np.concatenate(self.row_val) if indptr[-1] else np.zeros(0)
        else:
            indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
        return sp.csr_matrix((data, indices, indptr), shape=(self.num_rows, self.num_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rhs = np.asarray(self.row_rhs, dtype=float)
        sense = np.asarray(self.row_sense)
        lo = np.where(sense == LE, -INF, rhs)
        hi = np.where(sense == GE, INF, rhs)
        return lo, hi

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for k, v in self.objective.items():
            c[k] = v
        return c

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(v * x[k] for k, v in self.objective.items()))

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound/row/integrality violation of ``x``."""
        x = np.asarray(x, dtype=float)
        lb, ub = np.asarray(self.lb), np.asarray(self.ub)
        worst = float(np.max(np.concatenate([[0.0], lb - x, x - ub])))
        if self.num_rows:
            act = self.matrix() @ x
            lo, hi = self.row_bounds()
            worst = max(worst, float(np.max(np.concatenate([lo - act, act - hi]))))
        b = np.asarray(self.binary)
        if b.any():
            worst = max(worst, float(np.max(np.abs(x[b] - np.round(x[b])))))
        return worst

    def stats(self) -> dict:
        return {
            "variables": self.num_vars,
            "binary": self.num_binary,
            "continuous": self.num_vars - self.num_binary,
            "rows": self.num_rows,
            "nonzeros": int(sum(len(i) for i in self.row_idx)),
        }


# ---------------------------------------------------------------------------
# LP-format export
# ---------------------------------------------------------------------------

_LP_ALLOWED = re.compile(r"[^A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]")


def lp_safe_names(names: Iterable[str]) -> dict[str, str]:
    """Map names to unique identifiers legal in CPLEX-LP files (reversible via the map)."""
    out: dict[str, str] = {}
    used: set[str] = set()
    for name in names:
        safe = _LP_ALLOWED.sub("_", name)[:200] or "_"
        if safe[0].isdigit() or safe[0] == "." or re.match(r"[eE][0-9eE]", safe):
            safe = "v_" + safe
        base, k = safe, 1
        while safe in used:
            safe = f"{base}__{k}"
            k += 1
        used.add(safe)
        out[name] = safe
    return out


def _num(v: float) -> str:
    if v == INF:
        return "+inf"
    if v == -INF:
        return "-inf"
    return repr(float(v))


def _write_terms(parts: list[str], idx, val, names) -> None:
    for k, v in zip(idx, val):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {repr(abs(float(v)))} {names[k]}")


def _wrap(head: str, parts: list[str], width: int = 200) -> list[str]:
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > width and cur.strip():
            lines.append(cur)
            cur = "   "
        cur += " " + p
    lines.append(cur)
    return lines


def lp_text(m: MilpModel) -> str:
    vnames = lp_safe_names(m.var_names)
    vn = [vnames[n] for n in m.var_names]
    rnames = lp_safe_names(m.row_names)
    lines = [f"\\ Problem: {m.name}", "Minimize"]
    obj = sorted(m.objective.items())
    parts: list[str] = []
    _write_terms(parts, [k for k, _ in obj], [v for _, v in obj], vn)
    if not parts:
        parts = [f"+ 0.0 {vn[0]}"] if vn else []
    lines += _wrap(" obj:", parts)
    lines.append("Subject To")
    for r in range(m.num_rows):
        parts = []
        _write_terms(parts, m.row_idx[r], m.row_val[r], vn)
        if not parts:
            parts = [f"+ 0.0 {vn[0]}"]
        sense = m.row_sense[r]
        parts.append(f"{sense} {_num(m.row_rhs[r])}")
        lines += _wrap(f" {rnames[m.row_names[r]]}:", parts)
    lines.append("Bounds")
    for i in range(m.num_vars):
        if m.binary[i]:
            continue
        lo, hi = m.lb[i], m.ub[i]
        if lo == -INF and hi == INF:
            lines.append(f" {vn[i]} free")
        elif lo == hi:
            lines.append(f" {vn[i]} = {_num(lo)}")
        else:
            lines.append(f" {_num(lo)} <= {vn[i]} <= {_num(hi)}")
    bins = [vn[i] for i in range(m.num_vars) if m.binary[i]]
    if bins:
        lines.append("Binary")
        lines += _wrap("", bins)
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(m: MilpModel, path: str | os.PathLike) -> dict[str, str]:
    """Write ``m`` in CPLEX-LP format; returns the variable-name map used."""
    problems = m.validate()
    if problems:
        raise ModelError("; ".join(problems[:5]))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(lp_text(m))
    return lp_safe_names(m.var_names)


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

OPTIMAL, INFEASIBLE, UNBOUNDED, LIMIT = "optimal", "infeasible", "unbounded", "limit"


@dataclass
class SolveReport:
    status: str
    objective: float | None = None
    bound: float | None = None
    wall_time: float = 0.0
    x: np.ndarray | None = None
    boundary_active: list[str] = field(default_factory=list)
    backend: str = ""
    message: str = ""

    @property
    def gap(self) -> float | None:
        if self.objective is None or self.bound is None:
            return None
        return abs(self.objective - self.bound) / max(1.0, abs(self.objective))

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None

    def summary(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap": self.gap,
            "wall_time": self.wall_time,
            "backend": self.backend,
            "boundary_active": list(self.boundary_active),
        }


def _boundary_active(m: MilpModel, x: np.ndarray, tol: float = 0.01) -> list[str]:
    out = []
    for k, bound in m.tracked_bounds.items():
        if bound > 0 and x[k] >= (1.0 - tol) * bound:
            out.append(m.var_names[k])
    return sorted(out)


class HighsBackend:
    """In-process HiGHS via highspy."""

    name = "highs"

    def __init__(self, threads: int | None = None, verbose: bool = False, options: dict | None = None):
        self.threads = threads
        self.verbose = verbose
        self.options = dict(options or {})

    def _new(self, gap: float, time_limit: float | None):
        import highspy

        h = highspy.Highs()
        h.setOptionValue("output_flag", bool(self.verbose))
        h.setOptionValue("mip_rel_gap", float(gap))
        if time_limit is not None:
            h.setOptionValue("time_limit", float(time_limit))
        if self.threads:
            h.setOptionValue("threads", int(self.threads))
        for k, v in self.options.items():
            h.setOptionValue(k, v)
        return h

    @staticmethod
    def _lp(m: MilpModel, lb=None, ub=None):
        import highspy

        A = m.matrix().tocsc()
        lp = highspy.HighsLp()
        lp.num_col_ = m.num_vars
        lp.num_row_ = m.num_rows
        lp.col_cost_ = m.cost_vector()
        lp.col_lower_ = np.asarray(m.lb if lb is None else lb, dtype=float)
        lp.col_upper_ = np.asarray(m.ub if ub is None else ub, dtype=float)
        lo, hi = m.row_bounds()
        lp.row_lower_ = lo
        lp.row_upper_ = hi
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data
        return lp

    def _run(self, h, m: MilpModel, start: float, integer: bool) -> SolveReport:
        import highspy

        h.run()
        status = h.getModelStatus()
        info = h.getInfo()
        ms = highspy.HighsModelStatus
        wall = time.perf_counter() - start
        if status == ms.kInfeasible:
            return SolveReport(INFEASIBLE, wall_time=wall, backend=self.name)
        if status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            return SolveReport(UNBOUNDED if status == ms.kUnbounded else INFEASIBLE, wall_time=wall,
                               backend=self.name, message=h.modelStatusToString(status))
        sol = h.getSolution()
        has_x = info.primal_solution_status == 2
        x = np.asarray(sol.col_value, dtype=float) if has_x else None
        obj = float(info.objective_function_value) if has_x else None
        bound = float(info.mip_dual_bound) if integer else obj
        if bound is not None and not math.isfinite(bound):
            bound = None
        st = OPTIMAL if status == ms.kOptimal else LIMIT
        return SolveReport(st, obj, bound, wall, x, backend=self.name,
                           message=h.modelStatusToString(status))

    def solve(self, m: MilpModel, gap: float = 0.01, time_limit: float | None = None,
              polish: bool = True) -> SolveReport:
        start = time.perf_counter()
        h = self._new(gap, time_limit)
        lp = self._lp(m)
        integer = any(m.binary)
        if integer:
            import highspy

            lp.integrality_ = [highspy.HighsVarType.kInteger if b else highspy.HighsVarType.kContinuous
                               for b in m.binary]
        h.passModel(lp)
        rep = self._run(h, m, start, integer)
        if integer and polish and rep.x is not None:
            rep = self._polish(m, rep, start)
        if rep.x is not None:
            rep.boundary_active = _boundary_active(m, rep.x)
        rep.wall_time = time.perf_counter() - start
        return rep

    def _polish(self, m: MilpModel, rep: SolveReport, start: float) -> SolveReport:
        """Fix binaries at their rounded values and re-solve the LP tightly."""
        b = np.asarray(m.binary)
        lb = np.asarray(m.lb, dtype=float).copy()
        ub = np.asarray(m.ub, dtype=float).copy()
        fixed = np.round(rep.x[b])
        lb[b] = fixed
        ub[b] = fixed
        h = self._new(0.0, None)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("dual_feasibility_tolerance", 1e-9)
        h.passModel(self._lp(m, lb, ub))
        lp_rep = self._run(h, m, start, integer=False)
        if lp_rep.x is None or lp_rep.objective is None:
            return rep
        x = lp_rep.x
        x[b] = fixed
        # polishing can only tighten the incumbent; keep the MILP bound
        return SolveReport(rep.status, lp_rep.objective, rep.bound if rep.bound is not None else None,
                           rep.wall_time, x, backend=self.name, message=rep.message)


class ScipyBackend:
    """scipy.optimize.milp backend."""

    name = "scipy"

    def solve(self, m: MilpModel, gap: float = 0.01, time_limit: float | None = None,
              polish: bool = True) -> SolveReport:
        from scipy.optimize import Bounds, LinearConstraint, milp

        start = time.perf_counter()
        lo, hi = m.row_bounds()
        cons = [LinearConstraint(m.matrix(), lo, hi)] if m.num_rows else []
        opts = {"mip_rel_gap": gap, "disp": False}
        if time_limit is not None:
            opts["time_limit"] = time_limit
        res = milp(m.cost_vector(), constraints=cons, integrality=np.asarray(m.binary, dtype=int),
                   bounds=Bounds(np.asarray(m.lb), np.asarray(m.ub)), options=opts)
        wall = time.perf_counter() - start
        if res.status == 2:
            return SolveReport(INFEASIBLE, wall_time=wall, backend=self.name, message=res.message)
        if res.status == 3:
            return SolveReport(UNBOUNDED, wall_time=wall, backend=self.name, message=res.message)
        x = None if res.x is None else np.asarray(res.x)
        bound = getattr(res, "mip_dual_bound", None)
        obj = None if x is None else float(res.fun)
        if bound is None or (bound is not None and not math.isfinite(bound)):
            bound = obj if res.status == 0 else None
        st = OPTIMAL if res.status == 0 else LIMIT
        rep = SolveReport(st, obj, bound, wall, x, backend=self.name, message=res.message)
        if x is not None:
            rep.boundary_active = _boundary_active(m, x)
        return rep


class LpFileBackend(HighsBackend):
    """Exchange the model through an LP file read back by HiGHS."""

    name = "lpfile"

    def solve(self, m: MilpModel, gap: float = 0.01, time_limit: float | None = None,
              polish: bool = False) -> SolveReport:
        import highspy

        start = time.perf_counter()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "model.lp")
            names = export_lp(m, path)
            h = self._new(gap, time_limit)
            if h.readModel(path) == highspy.HighsStatus.kError:
                raise BackendError("HiGHS failed to read the exported LP file")
        rep = self._run(h, m, start, integer=any(m.binary))
        if rep.x is not None:
            rep.x = _reorder(h.getLp().col_names_, rep.x, names, m)
            rep.boundary_active = _boundary_active(m, rep.x)
        return rep


def _reorder(file_names, values, name_map: dict[str, str], m: MilpModel) -> np.ndarray:
    pos = {n: i for i, n in enumerate(file_names)}
    x = np.zeros(m.num_vars)
    for i, name in enumerate(m.var_names):
        j = pos.get(name_map[name])
        if j is not None:
            x[i] = values[j]
    return x


class CommandBackend:
    """External HiGHS-compatible executable driven through LP files.

    The executable is called as ``exe --model_file F.lp --solution_file F.sol
    --options_file F.opt`` and must write a HiGHS-style solution file.
    """

    name = "command"

    def __init__(self, executable: str):
        self.executable = executable

    def solve(self, m: MilpModel, gap: float = 0.01, time_limit: float | None = None,
              polish: bool = False) -> SolveReport:
        start = time.perf_counter()
        with tempfile.TemporaryDirectory() as tmp:
            lp = os.path.join(tmp, "model.lp")
            sol = os.path.join(tmp, "model.sol")
            opt = os.path.join(tmp, "model.opt")
            names = export_lp(m, lp)
            with open(opt, "w") as fh:
                fh.write(f"mip_rel_gap = {gap}\n")
                if time_limit is not None:
                    fh.write(f"time_limit = {time_limit}\n")
            try:
                proc = subprocess.run(
                    [self.executable, "--model_file", lp, "--solution_file", sol, "--options_file", opt],
                    capture_output=True, text=True, check=False,
                )
            except OSError as exc:
                raise BackendError(f"cannot run {self.executable}: {exc}") from exc
            wall = time.perf_counter() - start
            if proc.returncode != 0:
                raise BackendError(f"{self.executable} exited with {proc.returncode}: {proc.stderr[-500:]}")
            status, obj, values = _read_highs_solution(sol) if os.path.exists(sol) else ("Infeasible", None, {})
        status_l = status.lower()
        if "infeasible" in status_l:
            return SolveReport(INFEASIBLE, wall_time=wall, backend=self.name, message=status)
        if "unbounded" in status_l:
            return SolveReport(UNBOUNDED, wall_time=wall, backend=self.name, message=status)
        if not values:
            return SolveReport(LIMIT, wall_time=wall, backend=self.name, message=status)
        x = np.array([values.get(names[n], 0.0) for n in m.var_names])
        bound = _bound_from_log(proc.stdout)
        st = OPTIMAL if status_l == "optimal" else LIMIT
        rep = SolveReport(st, obj, bound if bound is not None else obj, wall, x,
                          backend=self.name, message=status)
        rep.boundary_active = _boundary_active(m, x)
        return rep


def _read_highs_solution(path: str) -> tuple[str, float | None, dict[str, float]]:
    status, obj, values = "", None, {}
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln == "Model status":
            status = lines[i + 1].strip()
            i += 2
            continue
        if ln.startswith("Objective "):
            try:
                obj = float(ln.split()[-1])
            except ValueError:
                pass
        if ln.startswith("# Columns"):
            n = int(ln.split()[-1])
            for j in range(n):
                name, val = lines[i + 1 + j].rsplit(None, 1)
                values[name] = float(val)
            break
        i += 1
    return status, obj, values


def _bound_from_log(text: str) -> float | None:
    m = re.search(r"Dual bound\s+([-+0-9.eE]+)", text)
    return float(m.group(1)) if m else None


def get_backend(spec: str | None = None):
    """Resolve ``--solver`` values: a backend name or a path to an executable."""
    spec = spec or "highs"
    named = {"highs": HighsBackend, "scipy": ScipyBackend, "lpfile": LpFileBackend}
    if spec in named:
        return named[spec]()
    exe = spec if os.path.sep in spec else shutil.which(spec)
    if exe and os.path.exists(exe):
        return CommandBackend(exe)
    raise BackendError(f"no solver backend named or found at {spec!r}")


def solve(m: MilpModel, gap: float = 0.01, time_limit: float | None = None, backend=None) -> SolveReport:
    """Solve ``m`` to the relative ``gap`` target (1% by default)."""
    problems = m.validate()
    if problems:
        raise ModelError("; ".join(problems[:5]))
    if backend is None or isinstance(backend, str):
        backend = get_backend(backend)
    return backend.solve(m, gap=gap, time_limit=time_limit)


def solve_enumerated(m: MilpModel, fix: Iterable[int], gap: float = 0.01, time_limit: float | None = None,
                     backend=None) -> SolveReport:
    """Solve one restricted MILP per 0/1 assignment of the binaries in ``fix``.

    Fixing a few binaries that multiply many big-M'd variables often closes
    most of the relaxation gap.  The best incumbent over all assignments is
    returned with the smallest of their bounds, so the combined gap is no
    larger than ``gap``.  ``time_limit`` is split evenly over the assignments
    not yet solved, so one hard assignment cannot starve the others.
    """
    fix = list(fix)
    if any(not m.binary[k] for k in fix):
        raise ModelError("only binary variables can be enumerated")
    start = time.perf_counter()
    best: SolveReport | None = None
    bounds: list[float] = []
    complete = True
    n_total = 2 ** len(fix)
    for i, values in enumerate(itertools.product((0.0, 1.0), repeat=len(fix))):
        left = None if time_limit is None else time_limit - (time.perf_counter() - start)
        if left is not None and left <= 0:
            complete = False
            break
        if left is not None:
            left /= n_total - i
        sub = replace(m, lb=list(m.lb), ub=list(m.ub))
        for k, v in zip(fix, values):
            sub.set_bounds(k, v, v)
        rep = solve(sub, gap=gap, time_limit=left, backend=backend)
        if rep.status == INFEASIBLE:
            continue
        if rep.status != OPTIMAL:
            complete = False
        bounds.append(rep.bound if rep.bound is not None else -INF)
        if rep.has_incumbent and (best is None or rep.objective < best.objective):
            best = rep
    wall = time.perf_counter() - start
    if best is None:
        status = INFEASIBLE if complete else LIMIT
        return SolveReport(status, wall_time=wall, bound=min(bounds) if bounds else None)
    bound = min(bounds) if complete else None
    if bound is not None and not math.isfinite(bound):
        bound = None
    return SolveReport(OPTIMAL if complete else LIMIT, best.objective, bound, wall, best.x,
                       best.boundary_active, best.backend, "enumerated first-stage binaries")

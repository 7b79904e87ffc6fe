"""Decision-rule coefficients and their evaluation.

Recourse decisions of stage ``t`` are

    x_t = sum_p Xbar[t,p] L(xi_p) + Xhat[t,p] H(xi_p)
    y_t = sum_p (Ydot[t,p] - Yddot[t,p]) H(xi_p)

with ``L``/``H`` the continuous and step liftings.  Blocks that are absent
inside the information window are zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .structure import CONSTANT, ParamId, StageStructure, param_key, parse_param_key
from .uncertainty import (
    Breakpoints,
    HullSystem,
    build_hull_system,
    hull_optimize,
    lift_binary,
    lift_continuous,
    param_vertices,
)

BlockKey = tuple[int, ParamId]


class MissingBlockError(KeyError):
    pass


@dataclass(frozen=True)
class InformationStructure:
    """Which observed parameters a stage-``t`` rule may use.

    ``delta_t`` is ``None`` (full history), an int, or a per-stage mapping;
    parameter ``(t', i)`` is usable in stage ``t`` when
    ``max(2, t - delta_t) <= t' <= t``.  The constant is always usable.
    ``mask`` removes further (stage, parameter) pairs.
    """

    delta_t: int | None | Mapping[int, int | None] = None
    mask: frozenset[BlockKey] = frozenset()

    def window(self, t: int) -> int | None:
        if isinstance(self.delta_t, Mapping):
            return self.delta_t.get(t)
        return self.delta_t

    def allows(self, t: int, p: ParamId) -> bool:
        if (t, p) in self.mask:
            return False
        if p == CONSTANT:
            return True
        if p[0] > t:
            return False
        d = self.window(t)
        return d is None or p[0] >= max(2, t - d)

    def allowed(self, structure: StageStructure, t: int) -> tuple[ParamId, ...]:
        return tuple(p for p in structure.params(t) if self.allows(t, p))

    def to_dict(self) -> dict:
        if isinstance(self.delta_t, Mapping):
            dt = {str(k): v for k, v in sorted(self.delta_t.items())}
        else:
            dt = self.delta_t
        return {"delta_t": dt, "mask": sorted([t, param_key(p)] for t, p in self.mask)}

    @classmethod
    def from_dict(cls, d: dict) -> "InformationStructure":
        dt = d.get("delta_t")
        if isinstance(dt, dict):
            dt = {int(k): v for k, v in dt.items()}
        mask = frozenset((int(t), parse_param_key(k)) for t, k in d.get("mask", []))
        return cls(dt, mask)


@dataclass
class PolicyCoefficients:
    structure: StageStructure
    breakpoints: Breakpoints
    supports: Mapping[ParamId, tuple[float, float]]
    info: InformationStructure = field(default_factory=InformationStructure)
    Xbar: dict[BlockKey, np.ndarray] = field(default_factory=dict)
    Xhat: dict[BlockKey, np.ndarray] = field(default_factory=dict)
    Ydot: dict[BlockKey, np.ndarray] = field(default_factory=dict)
    Yddot: dict[BlockKey, np.ndarray] = field(default_factory=dict)
    x1: np.ndarray | None = None
    y1: np.ndarray | None = None

    def __post_init__(self):
        for fam in (self.Xbar, self.Xhat, self.Ydot, self.Yddot):
            for (t, p) in fam:
                if not self.info.allows(t, p):
                    raise MissingBlockError(f"block for stage {t} uses parameter {p} outside the information window")

    @classmethod
    def zeros(cls, structure: StageStructure, breakpoints: Breakpoints,
              supports: Mapping[ParamId, tuple[float, float]],
              info: InformationStructure | None = None) -> "PolicyCoefficients":
        info = info or InformationStructure()
        c = cls(structure, breakpoints, dict(supports), info)
        for t in range(2, structure.T + 1):
            for p in info.allowed(structure, t):
                r, g = breakpoints.r(p), breakpoints.g(p)
                c.Xbar[(t, p)] = np.zeros((structure.p(t), r))
                c.Xhat[(t, p)] = np.zeros((structure.p(t), g))
                c.Ydot[(t, p)] = np.zeros((structure.q(t), g))
                c.Yddot[(t, p)] = np.zeros((structure.q(t), g))
        return c

    def _block(self, fam: dict, t: int, p: ParamId, rows: int, cols: int) -> np.ndarray:
        if not self.info.allows(t, p):
            raise MissingBlockError(f"stage {t} rules cannot use parameter {p}")
        blk = fam.get((t, p))
        return np.zeros((rows, cols)) if blk is None else np.asarray(blk, dtype=float)

    def xbar(self, t: int, p: ParamId) -> np.ndarray:
        return self._block(self.Xbar, t, p, self.structure.p(t), self.breakpoints.r(p))

    def xhat(self, t: int, p: ParamId) -> np.ndarray:
        return self._block(self.Xhat, t, p, self.structure.p(t), self.breakpoints.g(p))

    def yhat(self, t: int, p: ParamId) -> np.ndarray:
        q, g = self.structure.q(t), self.breakpoints.g(p)
        return self._block(self.Ydot, t, p, q, g) - self._block(self.Yddot, t, p, q, g)

    def params(self, t: int) -> tuple[ParamId, ...]:
        return self.info.allowed(self.structure, t)


def _xi_value(xi, structure: StageStructure, p: ParamId) -> float:
    if isinstance(xi, Mapping):
        return 1.0 if p == CONSTANT and p not in xi else float(xi[p])
    return float(xi[structure.pos(p)])


def evaluate_policy(c: PolicyCoefficients, xi, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Recourse ``(x_t, y_t)`` at a realisation.

    ``xi`` is a flat vector in parameter order or a mapping keyed by
    parameter id; only parameters usable in stage ``t`` are read.
    """
    s = c.structure
    if not 2 <= t <= s.T:
        raise ValueError(f"stage {t} has no recourse rule")
    x = np.zeros(s.p(t))
    y = np.zeros(s.q(t))
    for p in c.params(t):
        v = _xi_value(xi, s, p)
        pts, sup = c.breakpoints.of(p), c.supports[p]
        bar = lift_continuous(v, pts, sup)
        hat = lift_binary(v, pts, sup)
        x += c.xbar(t, p) @ bar + c.xhat(t, p) @ hat
        y += c.yhat(t, p) @ hat
    return x, y


def evaluate_trajectory(c: PolicyCoefficients, xi) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
    xs, ys = {}, {}
    for t in range(2, c.structure.T + 1):
        xs[t], ys[t] = evaluate_policy(c, xi, t)
    return xs, ys


# ---------------------------------------------------------------------------
# rule maps onto hull columns
# ---------------------------------------------------------------------------


def x_rule_matrix(c: PolicyCoefficients, hull: HullSystem, t: int) -> np.ndarray:
    """``x_t`` as a linear map of the hull columns."""
    M = np.zeros((c.structure.p(t), hull.n_cols))
    for p in c.params(t):
        M[:, hull.xbar_cols[p]] += c.xbar(t, p)
        M[:, hull.xhat_cols[p]] += c.xhat(t, p)
    return M


def y_rule_matrix(c: PolicyCoefficients, hull: HullSystem, t: int) -> np.ndarray:
    M = np.zeros((c.structure.q(t), hull.n_cols))
    for p in c.params(t):
        M[:, hull.xhat_cols[p]] += c.yhat(t, p)
    return M


# ---------------------------------------------------------------------------
# integrality of binary rules
# ---------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    admissible: bool
    issues: list[str]

    def __bool__(self) -> bool:
        return self.admissible


def _hat_values(c: PolicyCoefficients, p: ParamId) -> list[np.ndarray]:
    pv = param_vertices(c.breakpoints.of(p), c.supports[p], p)
    seen = []
    for v in pv.vertices:
        arr = np.array(v.vhat)
        if not any(np.array_equal(arr, s) for s in seen):
            seen.append(arr)
    return seen


def check_binary_admissibility(c: PolicyCoefficients, problem=None, tol: float = 1e-6) -> AdmissibilityReport:
    """Check that every binary rule only takes values 0 and 1.

    Each ``y_tq`` is a sum of independent per-parameter terms, so its range
    over the product of lifted vertex values is the Minkowski sum of the
    per-parameter value sets.  Components failing that box-level test are
    re-examined with LPs over the lifted hull of the (decision-dependent)
    set when ``problem`` is given.
    """
    s = c.structure
    issues = []
    hulls = {}
    for t in range(2, s.T + 1):
        hat_vals = {p: _hat_values(c, p) for p in c.params(t)}
        for q in range(s.q(t)):
            reach = {0.0}
            for p in c.params(t):
                row = c.yhat(t, p)[q]
                if not row.any():
                    continue
                terms = {round(float(row @ h), 9) for h in hat_vals[p]}
                reach = {a + b for a in reach for b in terms}
            bad = sorted(v for v in reach if min(abs(v), abs(v - 1.0)) > tol)
            if not bad:
                continue
            if problem is not None:
                if t not in hulls:
                    hulls[t] = build_hull_system(problem.ddu, s, c.breakpoints, t)
                hull = hulls[t]
                lo, hi = _lp_range(c, problem, hull, t, q)
                if lo is None or (lo >= -tol and hi <= 1.0 + tol):
                    continue
                issues.append(f"y[{t}][{q + 1}] ranges over [{lo:g}, {hi:g}] on the lifted set")
            else:
                issues.append(f"y[{t}][{q + 1}] can take values {bad}")
    return AdmissibilityReport(not issues, issues)


def _lp_range(c: PolicyCoefficients, problem, hull: HullSystem, t: int, q: int):
    lifted = {s: y_rule_matrix(c, hull, s) for s in range(2, t)}
    fixed = {1: c.y1 if c.y1 is not None else np.zeros(c.structure.q(1))}
    obj = y_rule_matrix(c, hull, t)[q]
    st, hi, _ = hull_optimize(hull, obj, "max", fixed=fixed, lifted=lifted)
    if st != "optimal":
        return None, None
    _, lo, _ = hull_optimize(hull, obj, "min", fixed=fixed, lifted=lifted)
    return lo, hi


# ---------------------------------------------------------------------------
# structured text export
# ---------------------------------------------------------------------------


def _blocks_to_list(fam: Mapping[BlockKey, np.ndarray]) -> list:
    return [{"t": t, "param": param_key(p), "value": np.asarray(v).tolist()}
            for (t, p), v in sorted(fam.items())]


def policy_to_dict(c: PolicyCoefficients) -> dict:
    return {
        "structure": c.structure.to_dict(),
        "breakpoints": c.breakpoints.to_dict(),
        "supports": {param_key(p): list(v) for p, v in sorted(c.supports.items())},
        "info": c.info.to_dict(),
        "Xbar": _blocks_to_list(c.Xbar),
        "Xhat": _blocks_to_list(c.Xhat),
        "Ydot": _blocks_to_list(c.Ydot),
        "Yddot": _blocks_to_list(c.Yddot),
        "x1": None if c.x1 is None else np.asarray(c.x1).tolist(),
        "y1": None if c.y1 is None else np.asarray(c.y1).tolist(),
    }


def policy_from_dict(d: dict) -> PolicyCoefficients:
    s = StageStructure.from_dict(d["structure"])
    bp = Breakpoints.from_dict(d["breakpoints"])

    def fam(name):
        out = {}
        for e in d.get(name, []):
            p = parse_param_key(e["param"])
            rows = s.p(e["t"]) if name.startswith("X") else s.q(e["t"])
            out[(e["t"], p)] = np.asarray(e["value"], dtype=float).reshape(rows, -1) if rows else \
                np.zeros((0, bp.r(p) if name == "Xbar" else bp.g(p)))
        return out

    return PolicyCoefficients(
        s, bp, {parse_param_key(k): tuple(v) for k, v in d["supports"].items()},
        InformationStructure.from_dict(d.get("info", {})),
        fam("Xbar"), fam("Xhat"), fam("Ydot"), fam("Yddot"),
        None if d.get("x1") is None else np.asarray(d["x1"], dtype=float),
        None if d.get("y1") is None else np.asarray(d["y1"], dtype=float))


def save_policy(c: PolicyCoefficients, path: str | Path) -> None:
    Path(path).write_text(json.dumps(policy_to_dict(c), indent=1) + "\n")


def load_policy(path: str | Path) -> PolicyCoefficients:
    return policy_from_dict(json.loads(Path(path).read_text()))


def supports_of(problem) -> dict[ParamId, tuple[float, float]]:
    s = problem.structure
    return {p: problem.ddu.support(s, p) for p in s.params()}

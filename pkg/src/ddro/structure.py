"""Stage/index bookkeeping shared by every module.

Stages are numbered ``1..T`` and uncertain parameters are identified by
``(t, i)`` pairs with ``i`` counted from 1 inside stage ``t``.  Parameter
``(1, 1)`` is the constant, pinned to 1.  Flat parameter positions follow
the observation order ``(1,1), (2,1), ..., (2,K_2), (3,1), ...``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

ParamId = tuple[int, int]
CONSTANT: ParamId = (1, 1)


@dataclass(frozen=True)
class StageStructure:
    K: tuple[int, ...]
    P: tuple[int, ...]
    Q: tuple[int, ...]
    N: tuple[int, ...]

    def __post_init__(self):
        for name in ("K", "P", "Q", "N"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))

    @property
    def T(self) -> int:
        return len(self.K)

    def problems(self) -> list[str]:
        out = []
        if not (len(self.K) == len(self.P) == len(self.Q) == len(self.N)):
            out.append("stage count mismatch between K, P, Q, N")
            return out
        if self.T < 2:
            out.append("at least two stages are required")
        if self.K and self.K[0] != 1:
            out.append("stage 1 must hold exactly one (constant) parameter")
        if self.P and self.P[0] < 1:
            out.append("stage 1 needs the objective variable as first continuous variable")
        for name in ("K", "P", "Q", "N"):
            if any(v < 0 for v in getattr(self, name)):
                out.append(f"negative count in {name}")
        return out

    # parameter indexing --------------------------------------------------
    @cached_property
    def _params(self) -> tuple[ParamId, ...]:
        return tuple((t, i) for t in range(1, self.T + 1) for i in range(1, self.K[t - 1] + 1))

    @cached_property
    def _pos(self) -> dict[ParamId, int]:
        return {p: k for k, p in enumerate(self._params)}

    def params(self, upto: int | None = None) -> tuple[ParamId, ...]:
        """Parameters observed in stages ``1..upto`` (all stages by default)."""
        if upto is None:
            return self._params
        return self._params[: self.n_params(upto)]

    def stage_params(self, t: int) -> tuple[ParamId, ...]:
        return tuple((t, i) for i in range(1, self.K[t - 1] + 1))

    def n_params(self, upto: int | None = None) -> int:
        if upto is None:
            upto = self.T
        return sum(self.K[:upto])

    def pos(self, p: ParamId) -> int:
        return self._pos[p]

    def k(self, t: int) -> int:
        return self.K[t - 1]

    def p(self, t: int) -> int:
        return self.P[t - 1]

    def q(self, t: int) -> int:
        return self.Q[t - 1]

    def n(self, t: int) -> int:
        return self.N[t - 1]

    def to_dict(self) -> dict:
        return {"K": list(self.K), "P": list(self.P), "Q": list(self.Q), "N": list(self.N)}

    @classmethod
    def from_dict(cls, d: dict) -> "StageStructure":
        return cls(tuple(d["K"]), tuple(d["P"]), tuple(d["Q"]), tuple(d["N"]))


def param_key(p: ParamId) -> str:
    return f"{p[0]},{p[1]}"


def parse_param_key(s: str) -> ParamId:
    t, i = s.split(",")
    return int(t), int(i)

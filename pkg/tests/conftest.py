import numpy as np
import pytest
from hypothesis import settings

from ddro.problem import MultistageProblem
from ddro.structure import CONSTANT, StageStructure
from ddro.uncertainty import Breakpoints, DduSet

settings.register_profile("ci", max_examples=50, deadline=None)
settings.load_profile("ci")


def switching_problem(bps=(3.0,)):
    """Cheapest way to produce exactly xi from one of two units with disjoint ranges.

    min 2 x1 + x2 s.t. y1 <= x1 <= 3 y1, 3 y2 <= x2 <= 5 y2, x1 + x2 = xi,
    y1 + y2 <= 1, xi in [1, 5].  Optimal worst case is 6 (unit 1 up to 3).
    """
    s = StageStructure((1, 1), (1, 2), (0, 2), (0, 8))
    N = 8
    c, xi = CONSTANT, (2, 1)
    A = {(2, c): np.zeros((N, 1))}
    b = {(2, c): np.zeros(N), (2, xi): np.zeros(N)}
    A[(2, c)][0, 0] = -1.0
    At = np.zeros((N, 2))
    Dt = np.zeros((N, 2))
    At[0] = [2, 1]
    At[1], Dt[1] = [-1, 0], [1, 0]
    At[2], Dt[2] = [1, 0], [-3, 0]
    At[3], Dt[3] = [0, -1], [0, 3]
    At[4], Dt[4] = [0, 1], [0, -5]
    At[5] = [1, 1]
    b[(2, xi)][5] = 1.0
    At[6] = [-1, -1]
    b[(2, xi)][6] = -1.0
    Dt[7] = [1, 1]
    b[(2, c)][7] = 1.0
    W = np.array([[-5.0, 1.0], [1.0, -1.0]])
    ddu = DduSet({2: W}, {(2, 1): np.zeros((2, 0))}, np.array([1.0, 1.0]), np.array([1.0, 5.0]))
    return MultistageProblem.create(s, np.zeros((0, 1)), np.zeros((0, 0)), np.zeros(0), A=A, b=b,
                                    At={(2, 2): At}, Dt={(2, 2): Dt}, ddu=ddu,
                                    breakpoints=Breakpoints({xi: tuple(bps)}))


def random_two_stage(rng: np.random.Generator, max_params: int = 2, max_bps: int = 2):
    """Small covering-type instance with a decision-dependent budget; always feasible.

    At most 3 parameters (constant included), 2 breakpoints per parameter and
    4 robust rows.
    """
    K2 = int(rng.integers(1, max_params + 1))
    P2 = int(rng.integers(1, 3))
    Q2 = int(rng.integers(0, 2))
    N = 4
    n_cover = N - 1 - P2
    s = StageStructure((1, K2), (1, P2), (1, Q2), (0, N))
    params = [CONSTANT] + [(2, i) for i in range(1, K2 + 1)]
    A = {(2, CONSTANT): np.zeros((N, 1))}
    D = {(2, CONSTANT): np.zeros((N, 1))}
    b = {(2, p): np.zeros(N) for p in params}
    At = np.zeros((N, P2))
    Dt = np.zeros((N, Q2))
    # epigraph: cost of recourse and of the first-stage binary
    A[(2, CONSTANT)][0, 0] = -1.0
    At[0] = rng.uniform(0.5, 3.0, P2)
    D[(2, CONSTANT)][0, 0] = rng.uniform(0.0, 4.0)
    if Q2:
        Dt[0] = rng.uniform(0.0, 3.0, Q2)
    for p in params[1:]:
        b[(2, p)][0] = -rng.uniform(-1.0, 1.0)
    for j in range(P2):
        At[1 + j, j] = -1.0
    for n in range(1 + P2, 1 + P2 + n_cover):
        At[n] = -rng.uniform(0.5, 2.0, P2)
        if Q2:
            Dt[n] = -rng.uniform(0.0, 4.0, Q2)
        b[(2, CONSTANT)][n] = -rng.uniform(0.0, 3.0)
        for p in params[1:]:
            b[(2, p)][n] = -rng.uniform(0.0, 2.0)
        # the first-stage binary shifts the requirement
        D[(2, CONSTANT)][n, 0] = -rng.uniform(0.0, 2.0)
    hi = rng.uniform(1.0, 5.0, K2)
    Kt = K2 + 1
    rows, urows = [], []
    for i in range(K2):
        w = np.zeros(Kt)
        w[1 + i], w[0] = 1.0, -hi[i]
        rows.append(w)
        urows.append([0.0])
        w = np.zeros(Kt)
        w[1 + i] = -1.0
        rows.append(w)
        urows.append([0.0])
    w = np.zeros(Kt)
    w[1:] = 1.0
    budget = rng.uniform(0.3, 0.8) * hi.sum()
    w[0] = -budget
    rows.append(w)
    urows.append([hi.sum() - budget])
    ddu = DduSet({2: np.array(rows)}, {(2, 1): np.array(urows)}, np.r_[1.0, np.zeros(K2)], np.r_[1.0, hi])
    bp = {}
    for i, p in enumerate(params[1:]):
        r = int(rng.integers(0, max_bps + 1))
        if r:
            bp[p] = tuple(sorted(rng.uniform(0.05, 0.95, r) * hi[i]))
    return MultistageProblem.create(s, np.zeros((0, 1)), np.zeros((0, 1)), np.zeros(0), A=A, D=D, b=b,
                                    At={(2, 2): At}, Dt={(2, 2): Dt}, ddu=ddu,
                                    breakpoints=Breakpoints(bp))


@pytest.fixture
def switching():
    return switching_problem()


def decision_set_example(sign: float = -1.0):
    """Three-parameter set whose shape depends on two binaries.

    ``sign`` is the coefficient of xi_2 in the fifth row.
    """
    W = np.array([[0, 1, 0], [0, 0, 1], [-8, -1, 2], [-13, 1, 1], [25, 4 * sign, -7], [40, -8, -3],
                  [0, -1, 0], [0, 0, -1]], dtype=float)
    U = np.array([[7, 8], [0, 13], [0, 15], [7, 2], [21, 11], [0, 0], [0, 0], [0, 0]], dtype=float)
    s = StageStructure((1, 2), (1, 0), (2, 0), (0, 0))
    return s, DduSet({2: W}, {(2, 1): U}, np.array([1.0, 0.0, 0.0]), np.array([1.0, 15.0, 13.0]))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

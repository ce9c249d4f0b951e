"""Two-path join-max-available-capacity CTMC: generator, stationary solve,
utilizations, loss probability, and the available-capacity gap distribution.

State (i, j) holds the *available* capacity of each path.  An arriving flow
takes a unit from the path with more available capacity (rate lambda), or
from either with rate lambda/2 on a tie; the C_k - s_k occupied units on
path k each free up at rate mu.  An arrival in state (0, 0) finds no
transition enabled and is lost.

The generator is block tridiagonal over levels i = 0..C1 with blocks of
size (C2+1); the block solver does forward block elimination and back
substitution, the dense solver is a plain linear solve.  Both must agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SOLVER_TOL = 1e-10


class QbdError(ValueError):
    pass


@dataclass
class QbdModel:
    C1: int
    C2: int
    lam: float
    mu: float

    def __post_init__(self):
        if self.C1 < 1 or self.C2 < 1:
            raise QbdError("capacities must be >= 1")
        if self.lam <= 0 or self.mu <= 0:
            raise QbdError("lambda and mu must be positive")


class Generator:
    """Block-tridiagonal rate matrix; level index = available capacity of path 1."""

    def __init__(self, model: QbdModel):
        self.model = model
        C1, C2, lam, mu = model.C1, model.C2, model.lam, model.mu
        self.block_size = C2 + 1
        self.levels = C1 + 1
        self.D = []  # diagonal blocks, one per level
        self.M = []  # level i -> i+1 (departures on path 1)
        self.L = []  # level i -> i-1 (arrivals taking path 1)

        def arrival_rate(i, j):
            # rate of taking a unit from path 1 in state (i, j)
            if i == 0:
                return 0.0
            if i > j:
                return lam
            if i == j:
                return lam / 2
            return 0.0

        for i in range(C1 + 1):
            D = np.zeros((C2 + 1, C2 + 1))
            for j in range(C2 + 1):
                # arrivals taking path 2: symmetric rule
                if j > 0 and (j > i or j == i):
                    D[j, j - 1] = lam if j > i else lam / 2
                # departures on path 2
                if j < C2:
                    D[j, j + 1] = (C2 - j) * mu
            self.D.append(D)
            if i < C1:
                self.M.append(np.eye(C2 + 1) * (C1 - i) * mu)
            if i > 0:
                self.L.append(np.diag([arrival_rate(i, j) for j in range(C2 + 1)]))

        # diagonal entries: negative row sums including inter-level rates
        for i in range(C1 + 1):
            out = self.D[i].sum(axis=1)
            if i < C1:
                out += self.M[i].sum(axis=1)
            if i > 0:
                out += self.L[i - 1].sum(axis=1)
            self.D[i][np.diag_indices(C2 + 1)] -= out

    @property
    def n_states(self):
        return self.levels * self.block_size

    def state_index(self, i, j):
        return i * self.block_size + j

    def dense(self):
        n = self.n_states
        bs = self.block_size
        Q = np.zeros((n, n))
        for i in range(self.levels):
            Q[i * bs:(i + 1) * bs, i * bs:(i + 1) * bs] = self.D[i]
            if i < self.levels - 1:
                Q[i * bs:(i + 1) * bs, (i + 1) * bs:(i + 2) * bs] = self.M[i]
            if i > 0:
                Q[i * bs:(i + 1) * bs, (i - 1) * bs:i * bs] = self.L[i - 1]
        return Q


@dataclass
class StationaryDistribution:
    pi: np.ndarray  # shape (C1+1, C2+1), pi[i, j] = P(available = (i, j))
    residual: float


def build_generator(model: QbdModel) -> Generator:
    return Generator(model)


def _solve_dense(g: Generator) -> np.ndarray:
    Q = g.dense()
    A = Q.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(g.n_states)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise QbdError("dense solve failed: %s" % exc) from exc
    return pi


def _solve_block(g: Generator) -> np.ndarray:
    """Forward block elimination over levels, then back substitution.

    Eliminating level columns left to right gives U_0 = D_0 and
    U_i = D_i - L_i U_{i-1}^{-1} M_{i-1}; the top-level balance leaves
    pi_K U_K = 0, solved as a small left null space.
    """
    U = [g.D[0]]
    for i in range(1, g.levels):
        try:
            X = np.linalg.solve(U[i - 1].T, g.L[i - 1].T).T  # L_i @ inv(U_{i-1})
        except np.linalg.LinAlgError as exc:
            raise QbdError("singular elimination step at level %d" % i) from exc
        U.append(g.D[i] - X @ g.M[i - 1])

    _, s, vh = np.linalg.svd(U[-1].T)
    if s[-2] < 1e-8 * max(s[0], 1.0):
        raise QbdError("top-level block has a degenerate null space")
    pi_top = vh[-1]
    levels = [pi_top]
    for i in range(g.levels - 2, -1, -1):
        # pi_i = -pi_{i+1} L_{i+1} U_i^{-1}
        rhs = -(levels[0] @ g.L[i])
        levels.insert(0, np.linalg.solve(U[i].T, rhs))
    pi = np.concatenate(levels)
    total = pi.sum()
    if abs(total) < 1e-300:
        raise QbdError("null vector normalization failed")
    pi = pi / total
    return pi


def solve_stationary(g: Generator, method="dense") -> StationaryDistribution:
    if method == "dense":
        pi = _solve_dense(g)
    elif method == "block_tridiagonal":
        pi = _solve_block(g)
    else:
        raise QbdError("unknown method %r" % (method,))
    if pi.min() < -1e-9:
        raise QbdError("negative stationary probability (non-irreducible chain?)")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.abs(pi @ g.dense()).max())
    if residual > SOLVER_TOL:
        raise QbdError("stationary residual %.3g exceeds tolerance" % residual)
    return StationaryDistribution(pi=pi.reshape(g.levels, g.block_size), residual=residual)


def utilization(d: StationaryDistribution, m: QbdModel):
    """Mean occupied fraction per path."""
    i = np.arange(m.C1 + 1)
    j = np.arange(m.C2 + 1)
    p1 = d.pi.sum(axis=1)
    p2 = d.pi.sum(axis=0)
    u1 = float(((m.C1 - i) * p1).sum() / m.C1)
    u2 = float(((m.C2 - j) * p2).sum() / m.C2)
    return u1, u2


def gap_distribution(d: StationaryDistribution):
    """P(available capacity gap s1 - s2 = psi) for psi in [-C2, C1]."""
    n1, n2 = d.pi.shape
    out = {}
    for psi in range(-(n2 - 1), n1):
        total = 0.0
        for i in range(n1):
            j = i - psi
            if 0 <= j < n2:
                total += d.pi[i, j]
        out[psi] = total
    return out


def loss_probability(d: StationaryDistribution) -> float:
    """Poisson arrivals see time averages: LP = P(both paths full)."""
    return float(d.pi[0, 0])


def solve_model(C1, C2, lam, mu, method="dense"):
    """Convenience: model -> (distribution, u1, u2, LP, gap)."""
    m = QbdModel(C1, C2, lam, mu)
    d = solve_stationary(build_generator(m), method=method)
    u1, u2 = utilization(d, m)
    return d, u1, u2, loss_probability(d), gap_distribution(d)

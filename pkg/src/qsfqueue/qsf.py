"""Level-homogeneous quasi-skip-free block machinery.

Orientation
-----------
One orientation is used throughout: level ``m`` is the number of customers,
so levels increase to the right. The process is skip-free *upward* (an
arrival moves one level up, through the single block ``U``) and may jump
several levels *down* (a batch service of size ``j`` uses ``D_j``). The
general theory is usually written in the mirrored orientation (skip-free
downward with jumps of any size upward). Mapping between the two swaps the
roles of ``U`` and ``D``, and the "one nonzero row" exit-state condition
becomes "one nonzero column" of ``U``: every arrival lands in the same
*entrance phase* of the next level.

Block layout of the generator (level 0 has no service)::

    W0    U
    D'1   W    U
    D'2   D1   W    U
    ...

with ``D'_m = sum_{j >= m} D_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InvalidBlocks, NoExitState
from .model import CoxianArrival, QueueModel

ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class QsfBlocks:
    """Generator blocks of a level-homogeneous QSF process.

    Parameters
    ----------
    W0 : (n, n) ndarray
        Transitions within level 0.
    W : (n, n) ndarray
        Transitions within any level ``m >= 1``.
    U_list : list of (n, n) ndarray
        Upward blocks, ``U_list[s-1]`` moving ``s`` levels up. A
        skip-free process has exactly one.
    D_list : list of (n, n) ndarray
        Downward blocks ``D_1 .. D_b``.
    """

    W0: np.ndarray
    W: np.ndarray
    U_list: list
    D_list: list
    D_boundary: list = field(init=False)

    def __post_init__(self):
        W0 = linalg.as_matrix(self.W0)
        W = linalg.as_matrix(self.W)
        U_list = [linalg.as_matrix(u) for u in self.U_list]
        D_list = [linalg.as_matrix(d) for d in self.D_list]
        n = W0.shape[0]
        for name, blocks in (("W", [W]), ("U", U_list), ("D", D_list)):
            for blk in blocks:
                if blk.shape != (n, n):
                    raise InvalidBlocks(f"block {name} has shape {blk.shape}, expected {(n, n)}")
        if not U_list or not D_list:
            raise InvalidBlocks("need at least one upward and one downward block")
        # D'_m = D_m + D_{m+1} + ... + D_b
        boundary = list(np.cumsum(np.array(D_list)[::-1], axis=0)[::-1])
        object.__setattr__(self, "W0", W0)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "U_list", U_list)
        object.__setattr__(self, "D_list", D_list)
        object.__setattr__(self, "D_boundary", boundary)
        self.validate()

    @property
    def phases(self) -> int:
        return self.W0.shape[0]

    @property
    def b(self) -> int:
        return len(self.D_list)

    def validate(self) -> None:
        def offdiag(m):
            return m - np.diag(np.diag(m))

        for name, blk in [("W0", offdiag(self.W0)), ("W", offdiag(self.W))] + \
                [(f"U{s + 1}", u) for s, u in enumerate(self.U_list)] + \
                [(f"D{j + 1}", d) for j, d in enumerate(self.D_list)]:
            if np.any(blk < 0):
                raise InvalidBlocks(f"block {name} has a negative off-diagonal rate")
        up = sum(u.sum(axis=1) for u in self.U_list)
        down = sum(d.sum(axis=1) for d in self.D_list)
        rows0 = self.W0.sum(axis=1) + up
        rows = self.W.sum(axis=1) + up + down
        scale = max(1.0, float(np.max(np.abs(self.W))))
        if np.max(np.abs(rows0)) > ROW_SUM_TOL * scale or np.max(np.abs(rows)) > ROW_SUM_TOL * scale:
            raise InvalidBlocks("generator rows do not sum to zero")


@dataclass(frozen=True)
class RateMatrixResult:
    """Rate matrix together with its Perron data.

    ``R`` maps ``(pi_{m+1}, ..., pi_{m+b})`` to ``(pi_m, ..., pi_{m+b-1})``;
    for single-step service (``b == 1``) it is the familiar ``pi_m = pi_{m+1} R``.
    """

    R: np.ndarray
    gamma: float
    phase_vector: np.ndarray
    eigen_residual: float
    iterations: int


def cox_blocks(model: QueueModel) -> QsfBlocks:
    """Blocks of the Cox(k)/M^Y/1 generator."""
    a = model.arrival
    if not isinstance(a, CoxianArrival):
        raise InvalidBlocks("generator blocks need a finite-order arrival law")
    k, mu = a.k, model.service.mu
    lam, q = a.rates, a.probs
    W0 = np.diag(-lam) + np.diag((q * lam)[:-1], 1)
    U = np.zeros((k, k))
    U[:, 0] = (1.0 - q) * lam
    W = W0 - mu * np.eye(k)
    D = [p * mu * np.eye(k) for p in model.service.pmf]
    return QsfBlocks(W0, W, [U], D)


def assemble_truncated_generator(blocks: QsfBlocks, level_cap: int, top: np.ndarray | None = None) -> np.ndarray:
    """Dense generator on levels ``0..level_cap``.

    Arrivals that would leave the top level are folded back into it: the
    rates of ``U`` are added to the top diagonal block, so an arrival at the
    cap is lost and the arrival clock restarts in the entrance phase. ``top``
    replaces the top diagonal block altogether (used for other blocking
    rules); its rows must then conserve probability by themselves.
    """
    if len(blocks.U_list) != 1:
        raise InvalidBlocks("truncation is only defined for skip-free (single U) blocks")
    if level_cap < 1:
        raise ValueError("level_cap must be >= 1")
    n, U = blocks.phases, blocks.U_list[0]
    size = (level_cap + 1) * n
    Q = np.zeros((size, size))

    def put(m, l, blk):
        Q[m * n:(m + 1) * n, l * n:(l + 1) * n] += blk

    for m in range(level_cap + 1):
        if m == level_cap:
            put(m, m, (blocks.W0 if m == 0 else blocks.W) + U if top is None else top)
        else:
            put(m, m, blocks.W0 if m == 0 else blocks.W)
            put(m, m + 1, U)
        for j in range(1, min(m, blocks.b + 1)):
            put(m, m - j, blocks.D_list[j - 1])
        if 1 <= m <= blocks.b:
            put(m, 0, blocks.D_boundary[m - 1])
    if np.max(np.abs(Q.sum(axis=1))) > ROW_SUM_TOL * max(1.0, float(np.max(np.abs(Q)))):
        raise InvalidBlocks("truncated generator is not conservative")
    return Q


def entrance_phase(blocks: QsfBlocks) -> int:
    """Index of the single phase through which a level is entered from below."""
    if len(blocks.U_list) != 1:
        raise NoExitState("process is not skip-free upward")
    cols = np.flatnonzero(np.any(blocks.U_list[0] != 0, axis=0))
    if len(cols) != 1:
        raise NoExitState(f"upward block has {len(cols)} nonzero columns, need exactly one")
    return int(cols[0])


def has_exit_state(blocks: QsfBlocks) -> bool:
    try:
        entrance_phase(blocks)
    except NoExitState:
        return False
    return True


def embedded_q_tilde(blocks: QsfBlocks) -> np.ndarray:
    """Generator on one level ``m >= 1`` of the chain watched on levels >= m.

    Levels above ``m`` are taboo. Every downward jump leaves for the region
    below, from which the chain can only come back through the entrance
    phase, so the total downward rate of row ``i`` is redirected to column
    ``entrance_phase``.
    """
    e = entrance_phase(blocks)
    out_down = sum(d.sum(axis=1) for d in blocks.D_list)
    Q = blocks.W.copy()
    Q[:, e] += out_down
    return Q


def embedded_a_tilde(blocks: QsfBlocks) -> np.ndarray:
    """Rates from levels ``m+1 .. m+b`` into level ``m`` (stacked, shape ``(b*n, n)``).

    Block ``i`` keeps the direct jumps ``D_i`` and redirects jumps of more than
    ``i`` levels to the entrance phase.
    """
    e = entrance_phase(blocks)
    stacked = []
    for i in range(1, blocks.b + 1):
        A = blocks.D_list[i - 1].copy()
        if i < blocks.b:
            A[:, e] += blocks.D_boundary[i].sum(axis=1)
        stacked.append(A)
    return np.vstack(stacked)


def extended_q_tilde(blocks: QsfBlocks) -> np.ndarray:
    """Generator on level ``m`` plus one extra state standing for everything below it.

    The extra state (last index) is entered by every downward jump and left
    through the entrance phase at unit rate; the rate value drops out once the
    extra state is censored away.
    """
    e = entrance_phase(blocks)
    n = blocks.phases
    Q = np.zeros((n + 1, n + 1))
    Q[:n, :n] = blocks.W
    Q[:n, n] = sum(d.sum(axis=1) for d in blocks.D_list)
    Q[n, e] = 1.0
    Q[n, n] = -1.0
    return Q


def censor_state(q: np.ndarray, s: int) -> np.ndarray:
    """Watch the chain only off state ``s``: ``q~_ij = q_ij + q_is q_sj / q_s``."""
    q = linalg.as_matrix(q)
    keep = np.array([i for i in range(q.shape[0]) if i != s])
    qs = -q[s, s]
    return q[np.ix_(keep, keep)] + np.outer(q[keep, s], q[s, keep]) / qs


def cox_q_tilde(model: QueueModel) -> np.ndarray:
    """Level generator written out from the queue parameters (no block algebra)."""
    a, mu = model.arrival, model.service.mu
    k = a.k
    Q = np.zeros((k, k))
    for i in range(k):
        Q[i, i] = -a.lambdas[i] - (mu if i > 0 else 0.0)
        if i + 1 < k:
            Q[i, i + 1] = a.qs[i] * a.lambdas[i]
        if i > 0:
            Q[i, 0] = mu
    return Q


def cox_a_tilde(model: QueueModel) -> np.ndarray:
    """Stacked downward rates written out from the queue parameters."""
    k, s = model.arrival.k, model.service
    mu, b = s.mu, s.b
    blocks = []
    for i in range(1, b + 1):
        A = s.pmf[i - 1] * mu * np.eye(k)
        A[0, 0] = s.tail(i) * mu
        A[1:, 0] = s.tail(i + 1) * mu
        blocks.append(A)
    return np.vstack(blocks)


def level_rate_blocks(blocks: QsfBlocks) -> list[np.ndarray]:
    """``R_i = -A~_i Q~^{-1}`` so that ``pi_m = sum_i pi_{m+i} R_i`` for ``m >= 1``."""
    n = blocks.phases
    A = embedded_a_tilde(blocks)
    RQ = -linalg.solve_left(embedded_q_tilde(blocks), A)
    return [RQ[i * n:(i + 1) * n] for i in range(blocks.b)]


def rate_matrix(blocks: QsfBlocks, tol: float = 1e-12, max_iter: int = 100_000) -> RateMatrixResult:
    """Rate matrix and the level factor read off its Perron root.

    For ``b == 1`` this is ``R = -A~ Q~^{-1}``. For batch service the
    recursion ``pi_m = sum_i pi_{m+i} R_i`` is written in companion form on
    ``b`` consecutive levels; its Perron root is still ``1/gamma`` with left
    vector ``(beta, gamma beta, ..., gamma^{b-1} beta)``.
    """
    n, b = blocks.phases, blocks.b
    parts = level_rate_blocks(blocks)
    R = np.zeros((b * n, b * n))
    for i, Ri in enumerate(parts):
        R[i * n:(i + 1) * n, :n] = Ri
    for j in range(1, b):
        R[(j - 1) * n:j * n, j * n:(j + 1) * n] = np.eye(n)
    pair = linalg.dominant_left_eigenpair(R, tol=tol, max_iter=max_iter)
    beta = pair.left_vector[:n]
    beta = beta / beta.sum()
    return RateMatrixResult(R, 1.0 / pair.value, beta, pair.residual, pair.iterations)

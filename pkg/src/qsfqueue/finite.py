"""Finite capacity and level-dependent service by backward recursion.

Watching the chain only on levels ``<= m`` and looking at level ``m``, every
excursion below ``m`` comes back through phase 0 (arrivals are the only way
up). That gives a level generator ``Q~_m`` and the relation

    pi_m = - sum_{i=1..b} pi_{m+i} A~_i^{(m)} Q~_m^{-1}

which only involves the service laws of levels ``m .. m+b``. Starting from
the top level and walking down therefore works for any top-level rule and
for service laws that change with the level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .errors import ModelError, NotErgodic
from .model import BatchService, CoxianArrival, QueueModel, is_ergodic
from .product import solve_gamma

POLICIES = ("loss", "printed")


def _finite_arrival(model: QueueModel) -> CoxianArrival:
    if not isinstance(model.arrival, CoxianArrival):
        raise ModelError("arrival.k", "finite-capacity solves need a finite order")
    return model.arrival


def level_q_tilde(arrival: CoxianArrival, law: BatchService | None) -> np.ndarray:
    """Level generator with excursions below the level folded into phase 0.

    ``law is None`` means level 0 (no service), where the matrix is just the
    arrival-phase block.
    """
    k = arrival.k
    lam, q = arrival.rates, arrival.probs
    Q = np.diag(-lam) + np.diag((q * lam)[:-1], 1)
    if law is not None:
        Q -= law.mu * np.eye(k)
        Q[:, 0] += law.mu
    return Q


def level_a_tilde(k: int, i: int, law: BatchService, to_zero: bool) -> np.ndarray:
    """Rates from level ``m+i`` (service law ``law``) into the region at or below ``m``.

    Batches of exactly ``i`` land in the same phase of level ``m``; larger
    batches land lower and re-enter level ``m`` through phase 0. For
    ``m == 0`` (``to_zero``) there is nothing lower and every batch of at
    least ``i`` keeps the phase.
    """
    if to_zero:
        return law.tail(i) * law.mu * np.eye(k)
    A = law.pmf[i - 1] * law.mu * np.eye(k) if i <= law.b else np.zeros((k, k))
    A[0, 0] = law.tail(i) * law.mu
    A[1:, 0] += law.tail(i + 1) * law.mu
    return A


def top_level_q_tilde(model: QueueModel, policy: str = "loss") -> np.ndarray:
    """Generator of the top level with everything below folded into phase 0.

    ``"loss"``: an arrival at capacity is lost and the arrival clock restarts
    in phase 0, so phase ``i`` moves on at ``q_i lambda_i`` and restarts at
    ``(1 - q_i) lambda_i``.

    ``"printed"``: phases advance at the full rates ``lambda_i`` and the last
    phase waits for a service (its only exit is ``mu`` back to phase 0).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown blocking policy {policy!r}")
    a = _finite_arrival(model)
    k, mu = a.k, model.service.mu
    lam, q = a.rates, a.probs
    Q = np.zeros((k, k))
    for i in range(k):
        if i + 1 < k:
            Q[i, i + 1] = lam[i] if policy == "printed" else q[i] * lam[i]
        if policy == "loss":
            Q[i, 0] += (1.0 - q[i]) * lam[i]
        if i > 0:
            Q[i, 0] += mu
    Q[np.diag_indices(k)] = 0.0
    Q[np.diag_indices(k)] = -Q.sum(axis=1)
    return Q


def _null_vector(Q: np.ndarray) -> np.ndarray:
    """Left null vector of an irreducible generator, scaled so entry 0 is one."""
    k = Q.shape[0]
    x = np.ones(k)
    if k > 1:
        x[1:] = linalg.solve_left(Q[1:, 1:], -Q[0, 1:])
    return x


def _walk_down(arrival: CoxianArrival, levels: dict, start: int,
               law_at: Callable[[int], BatchService], max_batch: int) -> None:
    """Fill ``levels[start], ..., levels[0]`` from the higher levels already in ``levels``."""
    k = arrival.k
    for m in range(start, -1, -1):
        rhs = np.zeros(k)
        for i in range(1, max_batch + 1):
            up = m + i
            if up not in levels:
                break
            law_up = law_at(up)
            if i <= law_up.b:
                rhs += levels[up] @ level_a_tilde(k, i, law_up, m == 0)
        law_m = law_at(m) if m > 0 else None
        levels[m] = -linalg.solve_left(level_q_tilde(arrival, law_m), rhs)


@dataclass(frozen=True)
class FiniteSolution:
    """Stationary law of the queue on levels ``0..S``; ``pi[m, i]``."""

    S: int
    pi: np.ndarray
    policy: str = "loss"

    def prob(self, m: int, i: int) -> float:
        return float(self.pi[m, i])

    def level(self, m: int) -> float:
        return float(self.pi[m].sum())

    def levels(self) -> np.ndarray:
        return self.pi.sum(axis=1)

    def to_dict(self) -> dict:
        return {"S": self.S, "policy": self.policy, "pi": self.pi.tolist()}


def _normalize(rows: list[np.ndarray]) -> float:
    return math.fsum(float(x) for r in rows for x in r)


def solve_finite(model: QueueModel, S: int, policy: str = "loss") -> FiniteSolution:
    """Exact stationary law of the Cox(k)/M^Y/1/S queue.

    The top level is the null vector of :func:`top_level_q_tilde`; lower
    levels follow by the backward recursion, then everything is normalized
    once.
    """
    if isinstance(S, bool) or not isinstance(S, int) or S < 1:
        raise ValueError(f"capacity S must be an integer >= 1, got {S!r}")
    a = _finite_arrival(model)
    levels = {S: _null_vector(top_level_q_tilde(model, policy))}
    _walk_down(a, levels, S - 1, lambda m: model.service, model.service.b)
    rows = [levels[m] for m in range(S + 1)]
    total = _normalize(rows)
    return FiniteSolution(S, np.array(rows) / total, policy)


def finite_generator(model: QueueModel, S: int, policy: str = "loss") -> np.ndarray:
    """Dense generator of the finite queue, assembled from the same top-level rule."""
    from .oracle import queue_transitions

    return queue_transitions(model, S, policy).dense()


# ---------------------------------------------------------------------------
# Level-dependent service
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariableRatePlan:
    """Service laws for levels ``1..threshold``; the model's own law applies above.

    Levels missing from ``laws`` also use the model's law.
    """

    threshold: int
    laws: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.threshold, bool) or not isinstance(self.threshold, int) or self.threshold < 0:
            raise ValueError(f"threshold must be a nonnegative integer, got {self.threshold!r}")
        for m, law in self.laws.items():
            if not isinstance(law, BatchService):
                raise ModelError(f"plan.laws[{m}]", "expected a BatchService")
            if not (1 <= m <= self.threshold):
                raise ModelError(f"plan.laws[{m}]", f"level must lie in 1..{self.threshold}")

    def law_at(self, model: QueueModel, m: int) -> BatchService:
        return self.laws.get(m, model.service) if m <= self.threshold else model.service


@dataclass(frozen=True)
class VariableRateSolution:
    """Levels ``0..S`` explicit, geometric continuation above ``S``."""

    S: int
    head: np.ndarray
    seam: float
    gamma: float
    profile: np.ndarray

    def prob(self, m: int, i: int) -> float:
        if m < 0 or not 0 <= i < self.head.shape[1]:
            raise IndexError(f"state ({m}, {i}) is outside the state space")
        if m <= self.S:
            return float(self.head[m, i])
        return self.seam * self.gamma ** (m - self.S - 1) * float(self.profile[i])

    def level(self, m: int) -> float:
        if m <= self.S:
            return float(self.head[m].sum())
        return self.seam * self.gamma ** (m - self.S - 1) * float(self.profile.sum())

    def total_mass(self) -> float:
        return float(self.head.sum()) + self.seam * float(self.profile.sum()) / (1.0 - self.gamma)

    def to_dict(self) -> dict:
        return {"S": self.S, "head": self.head.tolist(), "seam": self.seam,
                "gamma": self.gamma, "profile": self.profile.tolist()}


def solve_variable_rates(model: QueueModel, plan: VariableRatePlan, **gamma_kwargs) -> VariableRateSolution:
    """Stationary law when levels ``1..S`` have their own service laws.

    Above ``S`` the chain is the homogeneous one, so levels ``> S`` keep the
    product form ``pi(S+1, 0) gamma^(m-S-1) prod q_{l-1} alpha_l``. Levels
    ``S, ..., 0`` then follow from the backward recursion with the
    level-specific matrices.
    """
    a = _finite_arrival(model)
    if not is_ergodic(model):
        raise NotErgodic("the service law above the threshold cannot carry the arrival rate")
    sol = solve_gamma(model, **gamma_kwargs)
    S = plan.threshold
    profile = np.concatenate(([1.0], np.cumprod(a.probs[:-1] * sol.alphas)))
    b = model.service.b
    levels = {S + 1 + n: sol.gamma ** n * profile for n in range(b)}
    max_batch = max([b] + [law.b for law in plan.laws.values()])
    _walk_down(a, levels, S, lambda m: plan.law_at(model, m), max_batch)
    head = np.array([levels[m] for m in range(S + 1)])
    total = math.fsum(head.ravel()) + float(profile.sum()) / (1.0 - sol.gamma)
    return VariableRateSolution(S, head / total, 1.0 / total, sol.gamma, profile)

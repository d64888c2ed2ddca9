"""Brute-force checks: truncated chain solved by GTH, and sojourn-time identities.

Nothing here uses the product form or the block algebra. The truncated
generator is written down transition by transition from the queue's
verbal description and solved by Grassmann-Taksar-Heyman state reduction,
which never subtracts and so keeps full relative accuracy far into the tail.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import linalg
from .errors import CapacityExceeded, ModelError, NotTransient, SingularMatrix
from .model import BatchService, CoxianArrival, QueueModel

MAX_STATES = 50_000
IDENTITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Truncated / finite generators
# ---------------------------------------------------------------------------

@dataclass
class Transitions:
    """Off-diagonal rates of a generator in coordinate form."""

    size: int
    rows: list
    cols: list
    rates: list

    def add(self, i: int, j: int, rate: float) -> None:
        if i != j and rate > 0.0:
            self.rows.append(i)
            self.cols.append(j)
            self.rates.append(rate)

    def dense(self) -> np.ndarray:
        Q = np.zeros((self.size, self.size))
        np.add.at(Q, (np.array(self.rows, dtype=int), np.array(self.cols, dtype=int)), self.rates)
        Q[np.diag_indices(self.size)] = -Q.sum(axis=1)
        return Q


def queue_transitions(model: QueueModel, level_cap: int, policy: str = "loss",
                      service_at: Callable[[int], BatchService] | None = None) -> Transitions:
    """Transitions of the Cox(k)/M^Y/1 queue restricted to levels ``0..level_cap``.

    ``policy`` fixes what happens at the top level:

    ``"loss"``
        an arrival finding ``level_cap`` customers is lost and the arrival
        clock restarts in phase 0.
    ``"printed"``
        at the top level the phases advance at the full rates lambda_i
        (no early arrival) and the last phase waits until a service.

    ``service_at(m)`` gives the service law used in level ``m``
    (homogeneous by default).
    """
    a = model.arrival
    if not isinstance(a, CoxianArrival):
        raise ModelError("arrival.k", "the truncated chain needs a finite order")
    if level_cap < 1:
        raise ValueError("level_cap must be >= 1")
    if policy not in ("loss", "printed"):
        raise ValueError(f"unknown blocking policy {policy!r}")
    k = a.k
    size = (level_cap + 1) * k
    if size > MAX_STATES:
        raise CapacityExceeded(f"{size} states exceed the limit of {MAX_STATES}")
    service_at = service_at or (lambda m: model.service)
    t = Transitions(size, [], [], [])
    for m in range(level_cap + 1):
        top = m == level_cap
        law = service_at(m) if m > 0 else None
        for i in range(k):
            s = m * k + i
            lam, q = a.lambdas[i], a.qs[i]
            if top and policy == "printed":
                if i + 1 < k:
                    t.add(s, s + 1, lam)
            else:
                if i + 1 < k:
                    t.add(s, s + 1, q * lam)
                t.add(s, (m * k if top else (m + 1) * k), (1.0 - q) * lam)
            if law is not None:
                for j, p in enumerate(law.pmf, start=1):
                    t.add(s, max(m - j, 0) * k + i, p * law.mu)
    return t


# ---------------------------------------------------------------------------
# GTH
# ---------------------------------------------------------------------------

def gth_stationary(q) -> np.ndarray:
    """Stationary vector of an irreducible generator by state reduction.

    Accepts a dense generator or a :class:`Transitions` object. The matrix is
    stored in band form; eliminating states from the last one down never
    widens the band, so the cost is ``O(n * lower * upper)``.
    """
    if isinstance(q, Transitions):
        n = q.size
        rows = np.array(q.rows, dtype=int)
        cols = np.array(q.cols, dtype=int)
        rates = np.array(q.rates, dtype=float)
    else:
        q = linalg.as_matrix(q)
        n = q.shape[0]
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise ValueError("generator has negative off-diagonal rates")
        rows, cols = np.nonzero(off)
        rates = off[rows, cols]
    if n == 1:
        return np.ones(1)
    kl = int(max(0, np.max(rows - cols, initial=0)))
    ku = int(max(0, np.max(cols - rows, initial=0)))
    band = np.zeros((n, kl + ku + 1))
    np.add.at(band, (rows, cols - rows + kl), rates)

    out = np.zeros(n)
    for s in range(n - 1, 0, -1):
        lo_j, lo_i = max(0, s - kl), max(0, s - ku)
        J = np.arange(lo_j, s)
        I = np.arange(lo_i, s)
        to_lower = band[s, J - s + kl]
        from_lower = band[I, s - I + kl]
        total = to_lower.sum()
        if total <= 0.0:
            raise SingularMatrix(f"state {s} has no path to lower-numbered states (chain reducible?)")
        out[s] = total
        mask = from_lower > 0
        if mask.any():
            Ii = I[mask]
            band[Ii[:, None], J[None, :] - Ii[:, None] + kl] += np.outer(from_lower[mask] / total, to_lower)

    pi = np.zeros(n)
    pi[0] = 1.0
    for s in range(1, n):
        I = np.arange(max(0, s - ku), s)
        pi[s] = pi[I] @ band[I, s - I + kl] / out[s]
    return pi / math.fsum(pi)


def oracle_stationary(model: QueueModel, level_cap: int, policy: str = "loss",
                      service_at: Callable[[int], BatchService] | None = None) -> np.ndarray:
    """Stationary law of the truncated chain, shape ``(level_cap + 1, k)``."""
    t = queue_transitions(model, level_cap, policy, service_at)
    return gth_stationary(t).reshape(level_cap + 1, model.arrival.k)


@dataclass(frozen=True)
class OracleReport:
    level_cap: int
    max_abs_error: float
    max_rel_error: float
    tail_mass_bound: float
    max_level: int
    balance_residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def compare_with_product_form(model: QueueModel, level_cap: int = 300, max_level: int = 100,
                              dist=None) -> OracleReport:
    """Distance between the analytic distribution and the truncated-chain solution.

    Errors are taken over levels ``0..max_level``; the relative error only
    over states whose probability exceeds 1e-12.
    """
    from .product import stationary_distribution

    if dist is None:
        dist = stationary_distribution(model)
    t = queue_transitions(model, level_cap)
    pi = gth_stationary(t)
    Q = None
    if t.size <= 4000:
        Q = t.dense()
    grid = pi.reshape(level_cap + 1, model.arrival.k)
    top = min(max_level, level_cap)
    exact = np.array([[dist.prob(m, i) for i in range(model.arrival.k)] for m in range(top + 1)])
    diff = np.abs(exact - grid[:top + 1])
    big = exact > 1e-12
    rel = float(np.max(diff[big] / exact[big])) if big.any() else 0.0
    tail = dist.pi10 * dist.profile_sum() * dist.gamma ** level_cap / (1.0 - dist.gamma)
    residual = float(np.max(np.abs(pi @ Q))) if Q is not None else math.nan
    return OracleReport(level_cap, float(diff.max()), rel, float(tail), top, residual)


# ---------------------------------------------------------------------------
# Censoring and sojourn-time identities for transient generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CensoringReport:
    state: int
    restricted_error: float
    row_error: float

    @property
    def passed(self) -> bool:
        return max(self.restricted_error, self.row_error) < IDENTITY_TOL


@dataclass(frozen=True)
class SojournReport:
    n_terms: int
    max_error: float
    remainder_bound: float


def occupation_times(q, leak=None) -> np.ndarray:
    """``-q^{-1}``: expected time spent in ``j`` before absorption, starting from ``i``.

    Elimination in the GTH style: the leak of every row (its rate out of the
    state space) is carried along explicitly, each pivot is rebuilt as the
    sum of the remaining off-diagonal rates plus the leak, and the triangular
    solves only add nonnegative terms. The result is accurate entry by entry
    even when a tiny leak makes the occupation times large.

    ``leak`` gives the rates out of the state space; by default it is read
    off as minus the row sums of ``q``, which loses relative accuracy when a
    leak is much smaller than the other rates in its row.
    """
    q = linalg.as_matrix(q)
    n = q.shape[0]
    off = q - np.diag(np.diag(q))
    if np.any(off < 0):
        raise ValueError("transient generator has negative off-diagonal rates")
    if leak is None:
        leak = np.maximum(-q.sum(axis=1), 0.0)
    else:
        leak = np.array(leak, dtype=float)
        if leak.shape != (n,) or np.any(leak < 0):
            raise ValueError("leak must be a nonnegative vector with one entry per state")
    pivots = np.zeros(n)
    for k in range(n):
        d = off[k, k + 1:].sum() + leak[k]
        if d <= 0.0:
            raise NotTransient(f"state {k} cannot leave the remaining states (generator is not transient)")
        pivots[k] = d
        if k + 1 < n:
            f = off[k + 1:, k] / d
            off[k + 1:, k + 1:] += np.outer(f, off[k, k + 1:])
            leak[k + 1:] += f * leak[k]
            off[k + 1:, k] = f  # keep the multipliers in the eliminated column
    # L y = I (unit lower, multipliers f >= 0 enter with a plus sign)
    y = np.eye(n)
    for i in range(1, n):
        y[i] += off[i, :i] @ y[:i]
    # U x = y
    x = np.zeros((n, n))
    for k in range(n - 1, -1, -1):
        x[k] = (y[k] + off[k, k + 1:] @ x[k + 1:]) / pivots[k]
    return x


def _occupation_times(q: np.ndarray, leak=None) -> np.ndarray:
    tau = occupation_times(q, leak)
    if np.any(np.diag(tau) <= 0):
        raise NotTransient("-q^{-1} has a nonpositive diagonal entry")
    return tau


def censoring_identity_check(q, s: int) -> CensoringReport:
    """Check both identities linking ``q`` with ``q`` censored on the complement of ``s``.

    With ``q~_ij = q_ij + q_is q_sj / q_s`` on states other than ``s``:

    * ``(q~^{-1})_ij == (q^{-1})_ij`` for ``i, j != s``;
    * ``(q^{-1})_sj == sum_{r != s} (q_sr / q_s) (q~^{-1})_rj``.
    """
    from .qsf import censor_state

    q = linalg.as_matrix(q)
    n = q.shape[0]
    if n < 2:
        raise ValueError("need at least two states")
    keep = [i for i in range(n) if i != s]
    leak = np.maximum(-q.sum(axis=1), 0.0)
    tau = _occupation_times(q, leak)
    # a censored row leaks directly or through s
    leak_c = leak[keep] + q[keep, s] * leak[s] / -q[s, s]
    tau_c = _occupation_times(censor_state(q, s), leak_c)
    restricted = float(np.max(np.abs(tau_c - tau[np.ix_(keep, keep)])))
    jump = q[s, keep] / -q[s, s]
    row = float(np.max(np.abs(jump @ tau_c - tau[s, keep])))
    return CensoringReport(s, restricted, row)


def jump_matrix(q: np.ndarray) -> np.ndarray:
    q = linalg.as_matrix(q)
    rates = -np.diag(q)
    if np.any(rates <= 0):
        raise NotTransient("every state needs a positive exit rate")
    P = q / rates[:, None]
    np.fill_diagonal(P, 0.0)
    return P


def _series_remainder(P: np.ndarray, n_terms: int, inv_rates: np.ndarray) -> float:
    """Bound on the neglected tail ``sum_{n >= N} P^n diag(1/q)`` in the max norm."""
    n = P.shape[0]
    PN = np.linalg.matrix_power(P, n_terms)
    resolvent = linalg.invert(np.eye(n) - P)
    return float(np.max(np.abs(PN).sum(axis=1)) * np.max(np.abs(resolvent).sum(axis=1)) * inv_rates.max())


def sojourn_series_check(q, n_terms: int) -> SojournReport:
    """Compare ``-q^{-1}`` with the jump-chain series ``sum_{n < N} P^n diag(1/q_j)``."""
    q = linalg.as_matrix(q)
    tau = _occupation_times(q)
    P = jump_matrix(q)
    inv_rates = 1.0 / -np.diag(q)
    acc = np.zeros_like(P)
    term = np.eye(P.shape[0])
    for _ in range(n_terms):
        acc += term
        term = term @ P
    series = acc * inv_rates[None, :]
    return SojournReport(n_terms, float(np.max(np.abs(series - tau))),
                         _series_remainder(P, n_terms, inv_rates))


def terms_for_tolerance(q, eps: float = 1e-12, limit: int = 1_000_000) -> int:
    """Smallest power-of-two term count whose remainder bound is below ``eps``."""
    q = linalg.as_matrix(q)
    P = jump_matrix(q)
    inv_rates = 1.0 / -np.diag(q)
    n = 1
    while _series_remainder(P, n, inv_rates) >= eps:
        n *= 2
        if n > limit:
            raise NotTransient("jump chain does not leak fast enough for the series to converge")
    return n


def random_transient_generator(n: int, rng: np.random.Generator) -> np.ndarray:
    """Off-diagonal rates U(0,1); a random nonempty subset of rows leaks U(0, 0.5)."""
    q = rng.uniform(0.0, 1.0, size=(n, n))
    np.fill_diagonal(q, 0.0)
    leak = np.zeros(n)
    mask = rng.random(n) < 0.5
    if not mask.any():
        mask[rng.integers(n)] = True
    leak[mask] = rng.uniform(0.0, 0.5, size=int(mask.sum()))
    np.fill_diagonal(q, -(q.sum(axis=1) + leak))
    return q

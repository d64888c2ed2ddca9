"""Level factor, phase factors and the product-form stationary distribution.

For an ergodic Cox(k)/M^Y/1 queue the stationary probabilities on levels
``m >= 1`` factor as

    pi(m, i) = pi(1, 0) * gamma**(m - 1) * prod_{l=1..i} q_{l-1} alpha_l

where ``gamma`` is the unique root below one of ``gamma = F(gamma)`` and
``alpha_l = lambda_{l-1} / (lambda_l + mu - mu phi_Y(gamma))``. Level zero
follows from its own balance equations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, NoConvergence, NotErgodic
from .model import CoxianArrival, InfiniteCoxianArrival, QueueModel, is_ergodic

NULL_RECURRENT_GAP = 1e-8
NEWTON_STEP = 1e-7


class Method(str, enum.Enum):
    FIXED_POINT = "fixed-point"
    NEWTON = "newton"
    BISECTION = "bisection"


DEFAULT_MAX_ITER = {Method.FIXED_POINT: 1_000_000, Method.NEWTON: 200, Method.BISECTION: 200}


@dataclass(frozen=True)
class SpectralSolution:
    gamma: float
    alphas: np.ndarray
    method: Method
    iterations: int
    residual: float

    @property
    def alpha(self) -> float:
        """Common phase factor (homogeneous rates); NaN for a single phase."""
        return float(self.alphas[0]) if len(self.alphas) else math.nan

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "alphas": [float(a) for a in self.alphas],
            "method": self.method.value,
            "iterations": self.iterations,
            "residual": self.residual,
        }


def _service_gap(model: QueueModel, gamma: float) -> float:
    """mu (1 - phi_Y(gamma))."""
    return model.service.mu * (1.0 - model.service.phi(gamma))


def phase_factors(model: QueueModel, gamma: float) -> np.ndarray:
    """alpha_1 .. alpha_{k-1}; a single common value for infinite order."""
    gap = _service_gap(model, gamma)
    a = model.arrival
    if isinstance(a, InfiniteCoxianArrival):
        return np.array([a.lam / (a.lam + gap)])
    lam = a.rates
    return lam[:-1] / (lam[1:] + gap)


def fixpoint_F_general(model: QueueModel, gamma: float) -> float:
    """Balance of state (m, 0) rearranged as ``gamma = F(gamma)``; any finite order."""
    a, s = model.arrival, model.service
    if not isinstance(a, CoxianArrival):
        raise ModelError("arrival.k", "the general map needs a finite order")
    lam, q = a.rates, a.probs
    phi = s.phi(gamma)
    inflow = lam[0] * (1.0 - q[0])
    if a.k > 1:
        weights = np.cumprod(q[:-1] * phase_factors(model, gamma))
        inflow += float(weights @ ((1.0 - q[1:]) * lam[1:]))
    return (inflow + gamma * s.mu * phi) / (lam[0] + s.mu)


def fixpoint_F(model: QueueModel, gamma: float) -> float:
    """Map whose root below one is the level factor.

    Homogeneous-rate models use the phase-independent form written in the
    single factor ``alpha``, with the Erlang and infinite-order shortcuts.
    Other models fall back to :func:`fixpoint_F_general`.
    """
    a = model.arrival
    if isinstance(a, InfiniteCoxianArrival):
        lq = a.lam * (1.0 - a.q)
        return lq / (lq + _service_gap(model, gamma))
    if not a.is_homogeneous or a.k == 1:
        return fixpoint_F_general(model, gamma)
    alpha = a.lambdas[0] / (a.lambdas[0] + _service_gap(model, gamma))
    k = a.k
    if a.is_erlang:
        return alpha ** k
    q = a.probs
    reach = a.reach_probabilities()
    powers = alpha ** np.arange(1, k + 1)
    return float(np.sum(reach * powers * (1.0 - q)))


def _check_gamma(model, gamma, method, iterations, residual):
    if not gamma < 1.0 - NULL_RECURRENT_GAP:
        raise NoConvergence(
            f"{method.value}: level factor {gamma!r} is within {NULL_RECURRENT_GAP:g} of 1 "
            "(model is at the edge of stability)", iterations, residual)


def _fixed_point(model, gamma0, tol, max_iter):
    """Iterate ``g <- F(g)``.

    Stops once the step, divided by ``1 - r`` with ``r`` the observed
    contraction ratio of consecutive steps, is below ``tol``. That bounds the
    distance to the fixed point, not just the residual, which matters when
    the slope of ``F`` is close to one (slow contraction).
    """
    g = gamma0
    prev_step = math.inf
    for it in range(1, max_iter + 1):
        nxt = fixpoint_F(model, g)
        step = abs(nxt - g)
        g = nxt
        ratio = min(step / prev_step, 0.999) if prev_step > 0 else 0.0
        if step < tol * (1.0 - ratio) or step == 0.0:
            return g, it, abs(fixpoint_F(model, g) - g)
        prev_step = step
    raise NoConvergence("fixed-point iteration did not converge", max_iter, step)


def _newton(model, gamma0, tol, max_iter):
    """Newton on G = F - id with a central-difference slope.

    G is convex with G(0) >= 0, so Newton started at 0 climbs monotonically
    to the smallest root. Any step that would head for the root at 1 (or
    leave [0, 1)) restarts from 0.
    """
    def G(x):
        return fixpoint_F(model, x) - x

    g = gamma0
    residual = abs(G(g))
    for it in range(1, max_iter + 1):
        if residual < tol:
            return g, it - 1, residual
        slope = (G(g + NEWTON_STEP) - G(g - NEWTON_STEP)) / (2.0 * NEWTON_STEP)
        nxt = g - G(g) / slope if slope < 0.0 else 0.0
        g = nxt if 0.0 <= nxt < 1.0 else 0.0
        residual = abs(G(g))
    if residual < tol:
        return g, max_iter, residual
    raise NoConvergence("Newton iteration did not converge", max_iter, residual)


def _bisection(model, tol, max_iter):
    def G(x):
        return fixpoint_F(model, x) - x

    lo = 0.0
    if G(lo) <= tol:
        return lo, 0, abs(G(lo))
    hi = None
    for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, NULL_RECURRENT_GAP):
        if G(1.0 - eps) < 0.0:
            hi = 1.0 - eps
            break
    if hi is None:
        raise NotErgodic(f"F(g) - g has no sign change below 1 - {NULL_RECURRENT_GAP:g}")
    mid, residual = lo, abs(G(lo))
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        gm = G(mid)
        residual = abs(gm)
        if residual < tol or hi - lo < 1e-16:
            return mid, it, residual
        if gm > 0.0:
            lo = mid
        else:
            hi = mid
    raise NoConvergence("bisection did not converge", max_iter, residual)


def solve_gamma(model: QueueModel, method: Method | str = Method.FIXED_POINT, gamma0: float = 0.5,
                tol: float = 1e-12, max_iter: int | None = None) -> SpectralSolution:
    """Find the level factor and the phase factors.

    Parameters
    ----------
    model : QueueModel
        Must satisfy the stability condition.
    method : Method or str
        ``fixed-point`` iterates ``g <- F(g)`` (the root below one is an
        attracting fixed point); ``newton`` and ``bisection`` solve
        ``F(g) - g = 0`` directly.
    gamma0 : float
        Starting value in (0, 1); ignored by bisection.
    tol : float
        Newton and bisection stop once ``|F(gamma) - gamma| < tol``; the
        fixed-point loop stops once its error bound is below ``tol``, which
        implies the same residual condition.
    max_iter : int, optional
        Defaults to 10**6 for fixed point and 200 otherwise.
    """
    method = Method(method)
    if not (0.0 < gamma0 < 1.0):
        raise ValueError(f"gamma0 must lie in (0, 1), got {gamma0}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not is_ergodic(model):
        raise NotErgodic("arrival rate is not below the mean service capacity mu E[Y]")
    if max_iter is None:
        max_iter = DEFAULT_MAX_ITER[method]
    if method is Method.FIXED_POINT:
        g, it, res = _fixed_point(model, gamma0, tol, max_iter)
    elif method is Method.NEWTON:
        g, it, res = _newton(model, gamma0, tol, max_iter)
    else:
        g, it, res = _bisection(model, tol, max_iter)
    _check_gamma(model, g, method, it, res)
    return SpectralSolution(g, phase_factors(model, g), method, it, res)


# ---------------------------------------------------------------------------
# Stationary distribution
# ---------------------------------------------------------------------------

INFINITE_PHASE_CUTOFF = 1e-18


@dataclass(frozen=True)
class StationaryDistribution:
    """Stationary law of an ergodic Cox(k)/M^Y/1 queue.

    ``boundary`` holds ``pi(0, i)``; for infinite order it is cut where the
    remaining phases carry less than ``INFINITE_PHASE_CUTOFF`` of the mass,
    while :meth:`prob` evaluates any phase exactly.
    """

    model: QueueModel
    solution: SpectralSolution
    pi00: float
    boundary: np.ndarray
    pi10: float

    @property
    def gamma(self) -> float:
        return self.solution.gamma

    def phase_profile(self, i: int) -> float:
        """prod_{l=1..i} q_{l-1} alpha_l, the phase shape on levels >= 1."""
        a = self.model.arrival
        if isinstance(a, InfiniteCoxianArrival):
            return (a.q * self.solution.alpha) ** i
        return float(np.prod(a.probs[:i] * self.solution.alphas[:i]))

    def profile_sum(self) -> float:
        a = self.model.arrival
        if isinstance(a, InfiniteCoxianArrival):
            return 1.0 / (1.0 - a.q * self.solution.alpha)
        return float(np.sum(_profile(a, self.solution.alphas)))

    def prob(self, m: int, i: int) -> float:
        k = self.model.k
        if m < 0 or i < 0 or i >= k:
            raise IndexError(f"state ({m}, {i}) is outside the state space")
        if m == 0:
            if i < len(self.boundary) and not self.model.is_infinite:
                return float(self.boundary[i])
            return _infinite_boundary(self.model.arrival, self.solution.alpha, self.pi00, i)
        return self.pi10 * self.gamma ** (m - 1) * self.phase_profile(i)

    def level(self, m: int) -> float:
        """Probability of ``m`` customers in the system."""
        if m < 0:
            raise IndexError(f"level {m} is negative")
        if m == 0:
            a = self.model.arrival
            if isinstance(a, InfiniteCoxianArrival):
                al = self.solution.alpha
                if al == 1.0:
                    raise ValueError("degenerate phase factor")
                return self.pi00 / (1.0 - al) * (1.0 / (1.0 - a.q) - al / (1.0 - a.q * al))
            return float(np.sum(self.boundary))
        return self.pi10 * self.gamma ** (m - 1) * self.profile_sum()

    def total_mass(self) -> float:
        return self.level(0) + self.pi10 * self.profile_sum() / (1.0 - self.gamma)

    def to_dict(self) -> dict:
        out = self.solution.to_dict()
        out.update({"pi00": self.pi00, "pi10": self.pi10, "boundary": [float(x) for x in self.boundary]})
        return out


def _profile(a: CoxianArrival, alphas: np.ndarray) -> np.ndarray:
    return np.concatenate(([1.0], np.cumprod(a.probs[:-1] * alphas)))


def _infinite_boundary(a: InfiniteCoxianArrival, alpha: float, pi00: float, i: int) -> float:
    return pi00 * a.q ** i * math.fsum(alpha ** j for j in range(i + 1))


def boundary_distribution(model: QueueModel, sol: SpectralSolution) -> StationaryDistribution:
    """Level-zero probabilities and the seam value ``pi(1, 0)``.

    Level zero solves ``pi_0 W0 = -sum_j pi_j D'_j``; with the product form
    above the right-hand side collapses to ``pi00 lambda_0`` times the phase
    profile, which gives

        pi(0, i) = pi00 (lambda_0 / lambda_i) q_0...q_{i-1} (1 + sum_{j=1..i} alpha_1...alpha_j)

    and ``pi(1, 0) = pi00 (lambda_0 / mu) (1 - gamma) / (1 - phi_Y(gamma))``.
    ``pi00`` follows from the arrival-phase marginal, which does not depend
    on the queue.
    """
    gamma = sol.gamma
    s, a = model.service, model.arrival
    gap = 1.0 - s.phi(gamma)
    if isinstance(a, InfiniteCoxianArrival):
        if a.q == 1.0:
            raise ModelError("arrival.q", "q = 1 with infinitely many phases never produces an arrival; "
                                          "there is no stationary distribution")
        alpha = sol.alpha
        pi00 = (1.0 - a.q) * (1.0 - alpha)
        pi10 = pi00 * a.lam * (1.0 - gamma) / (s.mu * gap)
        n = 1
        while a.q ** n / max(1.0 - alpha, 1e-300) > INFINITE_PHASE_CUTOFF and n < 100_000:
            n += 1
        boundary = np.array([_infinite_boundary(a, alpha, pi00, i) for i in range(n)])
        return StationaryDistribution(model, sol, pi00, boundary, pi10)

    lam = a.rates
    reach = a.reach_probabilities()
    if a.is_erlang and a.k > 1:
        pi00 = (1.0 - sol.alpha) / a.k
    elif a.is_probabilistic and a.k > 1:
        q = a.qs[0]
        pi00 = (1.0 - q) * (1.0 - sol.alpha) / (1.0 - q ** a.k)
    else:
        pi00 = general_pi00(model, gamma)
    cum_alpha = np.cumsum(np.concatenate(([1.0], np.cumprod(sol.alphas))))
    boundary = pi00 * (lam[0] / lam) * reach * cum_alpha
    pi10 = pi00 * lam[0] * (1.0 - gamma) / (s.mu * gap)
    return StationaryDistribution(model, sol, pi00, boundary, pi10)


def general_pi00(model: QueueModel, gamma: float) -> float:
    """pi(0, 0) for any finite-order model.

    The arrival phase alone is a Markov chain, so phase 0 carries total mass
    ``1 / (lambda_0 E[C])``; on levels >= 1 phase 0 holds ``pi(1,0)/(1-gamma)``.
    """
    a, s = model.arrival, model.service
    lam0 = a.lambdas[0]
    ratio = 1.0 + lam0 / (s.mu * (1.0 - s.phi(gamma)))
    return 1.0 / (ratio * math.fsum(lam0 * a.reach_probabilities() / a.rates))


def stationary_distribution(model: QueueModel, method: Method | str = Method.FIXED_POINT, **kwargs) -> StationaryDistribution:
    return boundary_distribution(model, solve_gamma(model, method, **kwargs))


def stationary_prob(dist: StationaryDistribution, m: int, i: int) -> float:
    return dist.prob(m, i)


def level_marginal(dist: StationaryDistribution, m: int) -> float:
    return dist.level(m)


def erlang_level_marginal(model: QueueModel, gamma: float, m: int) -> float:
    """Closed-form number-in-system law for Erlang arrivals (modified geometric)."""
    a, s = model.arrival, model.service
    lam, k = a.lambdas[0], a.k
    gap = 1.0 - s.phi(gamma)
    if m == 0:
        return 1.0 - lam * (1.0 - gamma) / (k * s.mu * gap)
    return lam * (1.0 - gamma) ** 2 * gamma ** (m - 1) / (k * s.mu * gap)

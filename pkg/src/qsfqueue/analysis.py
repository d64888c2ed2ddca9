"""Comparisons across the number of phases, performance measures and the D/M^Y/1 limit.

A calibrated family keeps the mean inter-arrival time fixed at ``1/lambda*``
while the number of phases ``k`` varies. With ``rho = lambda*/mu`` the
number-in-system law of every member is modified geometric with ratio
``gamma_k``, which gives closed forms for the mean and the variance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ModelError, NotErgodic
from .model import BatchService, CoxianArrival, InfiniteCoxianArrival, QueueModel
from .product import SpectralSolution, stationary_distribution

XI_TOL = 1e-14

TABLE_LAMBDA = 0.5
TABLE_MU = 0.8
TABLE_PMF = (0.25, 0.5, 0.25)
TABLE_GAMMA0 = 0.35
TABLE1_Q = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
TABLE1_K = (2, 5, 20, 1000, math.inf)
TABLE2_Q = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
TABLE2_K = (2, 5, 10, 20, 50, 1000)
APPROX_ZERO = 5e-5


def calibrated_rate(lambda_star: float, q: float, k: int) -> float:
    """Per-phase rate giving mean inter-arrival time ``1/lambda_star``."""
    if not (lambda_star > 0 and math.isfinite(lambda_star)):
        raise ModelError("lambda_star", f"must be positive and finite, got {lambda_star}")
    if not (0.0 < q <= 1.0):
        raise ModelError("q", f"must lie in (0, 1], got {q}")
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ModelError("k", f"must be a positive integer, got {k!r}")
    if q == 1.0:
        return k * lambda_star
    return lambda_star * (1.0 - q ** k) / (1.0 - q)


def calibrate(lambda_star: float, q: float, k: int) -> CoxianArrival:
    """Homogeneous Cox(k, lambda_k, q) with mean inter-arrival time ``1/lambda_star``."""
    return CoxianArrival.homogeneous(k, calibrated_rate(lambda_star, q, k), q)


@dataclass(frozen=True)
class CalibratedFamily:
    lambda_star: float
    q: float
    k_values: tuple

    def rate(self, k: int) -> float:
        return calibrated_rate(self.lambda_star, self.q, k)

    @property
    def rates(self) -> list[float]:
        return [self.rate(k) for k in self.k_values]

    def model(self, k: int, service: BatchService) -> QueueModel:
        return QueueModel(calibrate(self.lambda_star, self.q, k), service)


# ---------------------------------------------------------------------------
# Performance measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsRow:
    k: float
    lambda_k: float
    gamma: float
    alpha: float
    pi0_bar: float
    L: float
    W: float
    V: float

    def to_dict(self) -> dict:
        return asdict(self)


def common_alpha(model: QueueModel, gamma: float) -> float:
    """``lambda / (lambda + mu (1 - phi_Y(gamma)))`` for homogeneous rates, NaN otherwise.

    Defined for a single phase as well, where it still satisfies
    ``gamma = alpha`` in the Erlang family.
    """
    a, s = model.arrival, model.service
    gap = s.mu * (1.0 - s.phi(gamma))
    if isinstance(a, InfiniteCoxianArrival):
        return a.lam / (a.lam + gap)
    if not a.is_homogeneous:
        return math.nan
    return a.lambdas[0] / (a.lambdas[0] + gap)


def mean_customers(rho: float, gamma: float, service: BatchService) -> float:
    return rho / (1.0 - service.phi(gamma))


def variance_customers(rho: float, gamma: float, service: BatchService) -> float:
    L = mean_customers(rho, gamma, service)
    return L * ((1.0 + gamma) / (1.0 - gamma) - L)


def empty_probability(rho: float, gamma: float, service: BatchService) -> float:
    """P{no customers}: ``1 - rho (1 - gamma) / (1 - phi_Y(gamma))``."""
    return 1.0 - rho * (1.0 - gamma) / (1.0 - service.phi(gamma))


def metrics(model: QueueModel, sol: SpectralSolution, lambda_star: float | None = None) -> MetricsRow:
    """Mean, sojourn time (Little) and variance of the number in system.

    ``lambda_star`` defaults to the model's own arrival rate.
    """
    s = model.service
    if lambda_star is None:
        lambda_star = model.arrival_rate
    rho = lambda_star / s.mu
    g = sol.gamma
    L = mean_customers(rho, g, s)
    a = model.arrival
    lam_k = a.lam if isinstance(a, InfiniteCoxianArrival) else a.lambdas[0]
    return MetricsRow(k=model.k, lambda_k=lam_k, gamma=g, alpha=common_alpha(model, g),
                      pi0_bar=empty_probability(rho, g, s), L=L, W=L / lambda_star,
                      V=variance_customers(rho, g, s))


# ---------------------------------------------------------------------------
# D/M^Y/1 reference queue
# ---------------------------------------------------------------------------

def _check_rho(rho: float, service: BatchService) -> None:
    if not (rho > 0 and math.isfinite(rho)):
        raise ValueError(f"rho must be positive and finite, got {rho}")
    if rho >= service.mean_batch:
        raise NotErgodic(f"rho = {rho} is not below the mean batch size {service.mean_batch}")


def gamma_star(rho: float, service: BatchService) -> float:
    """Root below one of ``xi = exp(-(1 - phi_Y(xi)) / rho)``.

    ``h(x) = exp(-(1 - phi(x))/rho) - x`` is convex with ``h(0) > 0`` and
    ``h(1) = 0``; the wanted root lies left of the minimum of ``h``, which is
    located first by bisection on ``h'``.
    """
    _check_rho(rho, service)
    coeffs = np.array(service.pmf)
    powers = np.arange(1, service.b + 1)

    def dphi(x):
        return float(np.sum(coeffs * powers * x ** (powers - 1)))

    def h(x):
        return math.exp(-(1.0 - service.phi(x)) / rho) - x

    def dh(x):
        return math.exp(-(1.0 - service.phi(x)) / rho) * dphi(x) / rho - 1.0

    lo, hi = 0.0, 1.0
    if dh(lo) >= 0.0:
        hi = 0.0
    else:
        while hi - lo > XI_TOL:
            mid = 0.5 * (lo + hi)
            if dh(mid) < 0.0:
                lo = mid
            else:
                hi = mid
    x_min = hi
    if h(x_min) >= 0.0:
        raise NotErgodic("no root below one")
    lo, hi = 0.0, x_min
    while hi - lo > XI_TOL:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DeterministicArrivalLaw:
    """Number-in-system law of the D/M^Y/1 queue (modified geometric in ``sigma``)."""

    rho: float
    sigma: float
    service: BatchService

    @property
    def gap(self) -> float:
        return 1.0 - self.service.phi(self.sigma)

    def level(self, m: int) -> float:
        if m < 0:
            raise IndexError(f"level {m} is negative")
        if m == 0:
            return 1.0 - self.rho * (1.0 - self.sigma) / self.gap
        return self.rho * (1.0 - self.sigma) ** 2 * self.sigma ** (m - 1) / self.gap

    def head(self, n: int) -> list[float]:
        return [self.level(m) for m in range(n)]

    def tail(self, M: int) -> float:
        """P{at least M customers}."""
        if M <= 0:
            return 1.0
        return self.rho * (1.0 - self.sigma) * self.sigma ** (M - 1) / self.gap

    @property
    def mean(self) -> float:
        return self.rho / self.gap

    def to_dict(self, head: int = 10) -> dict:
        return {"rho": self.rho, "sigma": self.sigma, "mean": self.mean, "levels": self.head(head)}


def dm1_distribution(rho: float, service: BatchService) -> DeterministicArrivalLaw:
    return DeterministicArrivalLaw(rho, gamma_star(rho, service), service)


# ---------------------------------------------------------------------------
# Sweeps over k
# ---------------------------------------------------------------------------

TAIL_LEVELS = 50
DOMINANCE_SLACK = 1e-12
CONSTANT_TOL = 1e-12


def _strictly(values, op) -> bool:
    return all(op(b, a) for a, b in zip(values, values[1:]))


@dataclass
class SweepResult:
    """Rows ordered by ``k`` plus named verdicts.

    ``asserted`` lists the verdicts backed by theory for this family (Erlang
    arrivals); for other ``q`` every verdict is only reported.
    """

    lambda_star: float
    q: float
    rows: list
    verdicts: dict = field(default_factory=dict)
    asserted: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdicts[name] for name in self.asserted)

    def summary(self) -> dict:
        return {"lambda_star": self.lambda_star, "q": self.q, "verdicts": self.verdicts,
                "asserted": self.asserted, "passed": self.passed}


def monotonicity_sweep(lambda_star: float, q: float, k_list, service: BatchService,
                       tail_levels: int = TAIL_LEVELS, **gamma_kwargs) -> SweepResult:
    """Solve each calibrated member and check the monotonicity statements.

    Tail probabilities ``P{N >= M}`` come from each member's own level law,
    whose geometric tail is summed in closed form.
    """
    ks = sorted(int(k) for k in k_list)
    family = CalibratedFamily(lambda_star, q, tuple(ks))
    rho = lambda_star / service.mu
    rows, tails = [], []
    for k in ks:
        model = family.model(k, service)
        dist = stationary_distribution(model, **gamma_kwargs)
        rows.append(metrics(model, dist.solution, lambda_star))
        ratio = dist.level(1) / (1.0 - dist.gamma)
        tails.append([1.0] + [ratio * dist.gamma ** (M - 1) for M in range(1, tail_levels + 1)])

    gam = [r.gamma for r in rows]
    v = {
        "gamma_decreasing": _strictly(gam, lambda b, a: b < a),
        "L_nonincreasing": _strictly([r.L for r in rows], lambda b, a: b <= a),
        "W_nonincreasing": _strictly([r.W for r in rows], lambda b, a: b <= a),
        "V_nonincreasing": _strictly([r.V for r in rows], lambda b, a: b <= a),
    }
    single = service.is_single
    if single:
        v["pi0_constant"] = all(abs(r.pi0_bar - (1.0 - rho)) < CONSTANT_TOL for r in rows)
        v["alpha_increasing"] = _strictly([r.alpha for r in rows], lambda b, a: b > a) and \
            all(r.alpha < 1.0 for r in rows)
        v["tail_dominance"] = all(
            nxt[M] <= cur[M] + DOMINANCE_SLACK
            for cur, nxt in zip(tails, tails[1:]) for M in range(tail_levels + 1))
    else:
        v["pi0_decreasing"] = _strictly([r.pi0_bar for r in rows], lambda b, a: b < a)

    asserted = list(v) if q == 1.0 else []
    return SweepResult(lambda_star, q, rows, v, asserted)


# ---------------------------------------------------------------------------
# Table grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TableCell:
    q: float
    k: float
    gamma: float
    alpha: float

    @property
    def approx_zero(self) -> bool:
        return self.gamma < APPROX_ZERO


def table_service() -> BatchService:
    return BatchService(TABLE_MU, TABLE_PMF)


def table1_model(q: float, k) -> QueueModel:
    """Fixed per-phase rate 0.5; ``k = inf`` gives the infinite-order law."""
    if k == math.inf:
        arrival = InfiniteCoxianArrival(TABLE_LAMBDA, q)
    else:
        arrival = CoxianArrival.homogeneous(int(k), TABLE_LAMBDA, q)
    return QueueModel(arrival, table_service())


def table2_model(q: float, k: int) -> QueueModel:
    """Per-phase rate calibrated to mean inter-arrival time 1/0.5."""
    return QueueModel(calibrate(TABLE_LAMBDA, q, int(k)), table_service())


def _grid(builder, qs, ks, **gamma_kwargs) -> list[TableCell]:
    from .product import solve_gamma

    kwargs = {"gamma0": TABLE_GAMMA0, **gamma_kwargs}
    cells = []
    for q in qs:
        for k in ks:
            model = builder(q, k)
            sol = solve_gamma(model, **kwargs)
            cells.append(TableCell(q, k, sol.gamma, common_alpha(model, sol.gamma)))
    return cells


def table1(**gamma_kwargs) -> list[TableCell]:
    return _grid(table1_model, TABLE1_Q, TABLE1_K, **gamma_kwargs)


def table2(**gamma_kwargs) -> list[TableCell]:
    return _grid(table2_model, TABLE2_Q, TABLE2_K, **gamma_kwargs)

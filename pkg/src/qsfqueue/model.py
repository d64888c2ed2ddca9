"""Model types for the Cox(k)/M^Y/1 queue.

State ``(m, i)`` means ``m`` customers in the system while the next arrival
has completed ``i`` of its Coxian phases. Phase ``i`` lasts Exp(lambda_i);
when it ends a customer arrives with probability ``1 - q_i``, otherwise phase
``i + 1`` starts. The server removes a batch of ``min(Y, m)`` customers at
rate ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ModelError

PMF_TOL = 1e-12


@dataclass(frozen=True)
class CoxianArrival:
    """Coxian inter-arrival law of finite order ``k = len(lambdas)``.

    ``qs[i]`` is the probability of moving on to phase ``i + 1``; the last one
    is always zero.
    """

    lambdas: tuple[float, ...]
    qs: tuple[float, ...]

    def __post_init__(self):
        lams = tuple(float(x) for x in self.lambdas)
        qs = tuple(float(x) for x in self.qs)
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "qs", qs)
        k = len(lams)
        if k == 0:
            raise ModelError("arrival.lambda", "at least one phase is required")
        if len(qs) != k:
            raise ModelError("arrival.q", f"expected {k} continuation probabilities, got {len(qs)}")
        for i, lam in enumerate(lams):
            if not (math.isfinite(lam) and lam > 0):
                raise ModelError(f"arrival.lambda[{i}]", f"rate must be positive and finite, got {lam}")
        if qs[-1] != 0.0:
            raise ModelError(f"arrival.q[{k - 1}]", "the last continuation probability must be 0")
        for i, q in enumerate(qs[:-1]):
            if not (0.0 < q <= 1.0):
                raise ModelError(f"arrival.q[{i}]", f"must lie in (0, 1], got {q}")

    @classmethod
    def homogeneous(cls, k: int, lam: float, q: float) -> "CoxianArrival":
        if k < 1:
            raise ModelError("arrival.k", f"order must be >= 1, got {k}")
        return cls((lam,) * k, (q,) * (k - 1) + (0.0,))

    @classmethod
    def erlang(cls, k: int, lam: float) -> "CoxianArrival":
        return cls.homogeneous(k, lam, 1.0)

    @classmethod
    def exponential(cls, lam: float) -> "CoxianArrival":
        return cls((lam,), (0.0,))

    @property
    def k(self) -> int:
        return len(self.lambdas)

    @property
    def rates(self) -> np.ndarray:
        return np.array(self.lambdas)

    @property
    def probs(self) -> np.ndarray:
        return np.array(self.qs)

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.lambdas)) == 1

    @property
    def is_probabilistic(self) -> bool:
        """Homogeneous rates and one common continuation probability."""
        return self.is_homogeneous and len(set(self.qs[:-1])) <= 1

    @property
    def is_erlang(self) -> bool:
        return self.is_homogeneous and all(q == 1.0 for q in self.qs[:-1])

    def reach_probabilities(self) -> np.ndarray:
        """P{phase i is visited} = q_0 ... q_{i-1}."""
        return np.concatenate(([1.0], np.cumprod(self.qs[:-1])))


@dataclass(frozen=True)
class InfiniteCoxianArrival:
    """Homogeneous Coxian law with infinitely many phases.

    ``q == 1`` is accepted as the degenerate law that never produces an
    arrival (it appears as the k = inf column of the q = 1 table row).
    """

    lam: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "q", float(self.q))
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ModelError("arrival.lambda", f"rate must be positive and finite, got {self.lam}")
        if not (0.0 < self.q <= 1.0):
            raise ModelError("arrival.q", f"must lie in (0, 1], got {self.q}")

    k = math.inf
    is_homogeneous = True
    is_probabilistic = True
    is_erlang = False


Arrival = Union[CoxianArrival, InfiniteCoxianArrival]


@dataclass(frozen=True)
class BatchService:
    """Exponential server (rate ``mu``) removing batches with pmf ``p_1..p_b``."""

    mu: float
    pmf: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        pmf = tuple(float(x) for x in self.pmf)
        object.__setattr__(self, "pmf", pmf)
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ModelError("service.mu", f"rate must be positive and finite, got {self.mu}")
        if not pmf:
            raise ModelError("service.p", "batch-size pmf must have at least one entry")
        for j, p in enumerate(pmf):
            if not (math.isfinite(p) and p >= 0):
                raise ModelError(f"service.p[{j}]", f"probability must be >= 0, got {p}")
        if abs(math.fsum(pmf) - 1.0) > PMF_TOL:
            raise ModelError("service.p", f"probabilities sum to {math.fsum(pmf)!r}, not 1")

    @classmethod
    def single(cls, mu: float) -> "BatchService":
        return cls(mu, (1.0,))

    @property
    def b(self) -> int:
        return len(self.pmf)

    @property
    def probs(self) -> np.ndarray:
        return np.array(self.pmf)

    @property
    def mean_batch(self) -> float:
        return math.fsum(j * p for j, p in enumerate(self.pmf, start=1))

    @property
    def is_single(self) -> bool:
        """True when every batch has size one."""
        return self.pmf[0] == 1.0

    def phi(self, x: float) -> float:
        # Horner on p_b x^b + ... + p_1 x
        acc = 0.0
        for p in reversed(self.pmf):
            acc = (acc + p) * x
        return acc

    def tail(self, j: int) -> float:
        """P{Y >= j}."""
        return math.fsum(self.pmf[j - 1:]) if j >= 1 else 1.0


@dataclass(frozen=True)
class QueueModel:
    arrival: Arrival
    service: BatchService

    @property
    def k(self):
        return self.arrival.k

    @property
    def is_infinite(self) -> bool:
        return isinstance(self.arrival, InfiniteCoxianArrival)

    @property
    def arrival_rate(self) -> float:
        return 1.0 / mean_interarrival(self.arrival)

    @property
    def rho(self) -> float:
        """Arrival rate over service rate, lambda*/mu."""
        return self.arrival_rate / self.service.mu


def phi_Y(service: BatchService, x: float) -> float:
    """Probability generating function of the batch size."""
    return service.phi(x)


def mean_interarrival(arrival: Arrival) -> float:
    """E[C] = sum_i (q_0 ... q_{i-1}) / lambda_i; ``inf`` when arrivals never happen."""
    if isinstance(arrival, InfiniteCoxianArrival):
        if arrival.q == 1.0:
            return math.inf
        return 1.0 / (arrival.lam * (1.0 - arrival.q))
    return math.fsum(arrival.reach_probabilities() / arrival.rates)


def is_ergodic(model: QueueModel) -> bool:
    """Mean arrival rate strictly below the mean service throughput mu E[Y]."""
    capacity = model.service.mu * model.service.mean_batch
    a = model.arrival
    if isinstance(a, InfiniteCoxianArrival):
        return a.lam * (1.0 - a.q) < capacity
    return 1.0 / mean_interarrival(a) < capacity


# ---------------------------------------------------------------------------
# JSON model documents
# ---------------------------------------------------------------------------

def _number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(field, f"expected a number, got {value!r}")
    return float(value)


def _numbers(value, field: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ModelError(field, f"expected a non-empty list of numbers, got {value!r}")
    return [_number(v, f"{field}[{i}]") for i, v in enumerate(value)]


def arrival_from_dict(d) -> Arrival:
    if not isinstance(d, dict):
        raise ModelError("arrival", "expected an object")
    if "lambda" not in d:
        raise ModelError("arrival.lambda", "missing")
    lam, q = d["lambda"], d.get("q", 0.0)
    k = d.get("k")
    if k in ("inf", "infinity", "Infinity"):
        return InfiniteCoxianArrival(_number(lam, "arrival.lambda"), _number(q, "arrival.q"))
    if k is None:
        if not isinstance(lam, list):
            raise ModelError("arrival.k", "missing (required when lambda is a scalar)")
        k = len(lam)
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ModelError("arrival.k", f"expected a positive integer or \"inf\", got {k!r}")

    if isinstance(lam, list):
        lams = _numbers(lam, "arrival.lambda")
        if len(lams) != k:
            raise ModelError("arrival.lambda", f"expected {k} rates, got {len(lams)}")
    else:
        lams = [_number(lam, "arrival.lambda")] * k

    if isinstance(q, list):
        qs = _numbers(q, "arrival.q") if q else []
        if len(qs) == k - 1:
            qs = qs + [0.0]
        elif len(qs) != k:
            raise ModelError("arrival.q", f"expected {k} or {k - 1} probabilities, got {len(qs)}")
    else:
        qs = [_number(q, "arrival.q")] * (k - 1) + [0.0]
    return CoxianArrival(tuple(lams), tuple(qs))


def service_from_dict(d) -> BatchService:
    if not isinstance(d, dict):
        raise ModelError("service", "expected an object")
    if "mu" not in d:
        raise ModelError("service.mu", "missing")
    p = d.get("p", [1.0])
    return BatchService(_number(d["mu"], "service.mu"), tuple(_numbers(p, "service.p")))


def model_from_dict(d) -> QueueModel:
    if not isinstance(d, dict):
        raise ModelError("model", "expected a JSON object")
    for key in ("arrival", "service"):
        if key not in d:
            raise ModelError(key, "missing")
    return QueueModel(arrival_from_dict(d["arrival"]), service_from_dict(d["service"]))


def model_to_dict(model: QueueModel) -> dict:
    a = model.arrival
    if isinstance(a, InfiniteCoxianArrival):
        arrival = {"k": "inf", "lambda": a.lam, "q": a.q}
    else:
        arrival = {"k": a.k, "lambda": list(a.lambdas), "q": list(a.qs)}
    return {"arrival": arrival, "service": {"mu": model.service.mu, "p": list(model.service.pmf)}}

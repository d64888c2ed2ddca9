import math

import numpy as np
import pytest

from qsfqueue.analysis import (CalibratedFamily, calibrate, calibrated_rate, dm1_distribution, gamma_star,
                               metrics, monotonicity_sweep, table1, table2, table2_model)
from qsfqueue.errors import ModelError, NotErgodic
from qsfqueue.model import BatchService, CoxianArrival, QueueModel, mean_interarrival
from qsfqueue.product import solve_gamma, stationary_distribution


def test_calibration_examples():
    assert calibrated_rate(0.5, 1.0, 4) == pytest.approx(2.0)
    assert calibrated_rate(0.5, 0.5, 2) == pytest.approx(0.75)
    assert calibrated_rate(0.5, 1.0 - 1e-9, 3) == pytest.approx(1.5, abs=1e-7)


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9, 1.0])
@pytest.mark.parametrize("k", [1, 2, 7, 50])
def test_calibration_keeps_mean(q, k):
    assert mean_interarrival(calibrate(0.5, q, k)) == pytest.approx(2.0, abs=1e-12)


def test_calibration_validation():
    with pytest.raises(ModelError):
        calibrate(0.5, 0.0, 2)
    with pytest.raises(ModelError):
        calibrate(-1.0, 0.5, 2)
    fam = CalibratedFamily(0.5, 1.0, (1, 2, 3))
    assert fam.rates == [0.5, 1.0, 1.5]


def test_mm1_metrics(mm1):
    row = metrics(mm1, solve_gamma(mm1))
    assert round(row.L, 4) == 1.6667
    assert row.W == pytest.approx(row.L / 0.5)
    assert row.pi0_bar == pytest.approx(0.375, abs=1e-11)


def test_erlang_two_variance():
    s = BatchService.single(0.8)
    m = QueueModel(calibrate(0.5, 1.0, 2), s)
    sol = solve_gamma(m)
    g, rho = sol.gamma, 0.625
    row = metrics(m, sol, 0.5)
    # single-batch specialization of the general variance
    assert row.V == pytest.approx((rho * (1 + g) - rho ** 2) / (1 - g) ** 2, rel=1e-12)
    # brute-force second moment of the modified geometric law
    levels = np.arange(1, 400)
    probs = rho * (1 - g) ** 2 * g ** (levels - 1) / (1 - g)
    mean = float(np.sum(levels * probs))
    assert row.V == pytest.approx(float(np.sum(levels ** 2 * probs)) - mean ** 2, rel=1e-12)


def test_mm1_variance():
    s = BatchService.single(0.8)
    m = QueueModel(CoxianArrival.exponential(0.5), s)
    row = metrics(m, solve_gamma(m))
    assert row.V == pytest.approx(0.625 / 0.375 ** 2, rel=1e-10)


@pytest.mark.parametrize("arrival, pmf", [
    (CoxianArrival.homogeneous(5, 0.5, 0.5), (0.25, 0.5, 0.25)),
    (CoxianArrival((0.4, 1.3, 0.9), (0.6, 0.3, 0.0)), (0.5, 0.5)),
    (CoxianArrival.erlang(3, 1.5), (1.0,)),
])
def test_moments_against_series(arrival, pmf):
    m = QueueModel(arrival, BatchService(0.8, pmf))
    dist = stationary_distribution(m)
    row = metrics(m, dist.solution)
    L = V2 = 0.0
    level = 0
    while True:
        p = dist.level(level)
        L += level * p
        V2 += level * level * p
        if level > 0 and p < 1e-18:
            break
        level += 1
    assert row.L == pytest.approx(L, abs=1e-10)
    assert row.V == pytest.approx(V2 - L * L, abs=1e-10)
    assert row.pi0_bar == pytest.approx(dist.level(0), abs=1e-12)


def test_gamma_star_single_batch():
    s = BatchService.single(0.8)
    xi = gamma_star(0.625, s)
    assert abs(xi - math.exp(-(1 - xi) / 0.625)) < 1e-14
    # independent bisection on the scalar equation
    lo, hi = 0.0, 0.99
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.exp(-(1 - mid) / 0.625) - mid > 0:
            lo = mid
        else:
            hi = mid
    assert xi == pytest.approx(lo, abs=1e-13)
    assert gamma_star(0.05, s) < 1e-6


def test_gamma_star_not_ergodic():
    with pytest.raises(NotErgodic):
        gamma_star(1.0, BatchService.single(1.0))
    with pytest.raises(NotErgodic):
        gamma_star(2.5, BatchService(1.0, (0.0, 1.0)))


def test_dm1_distribution():
    s = BatchService.single(0.8)
    law = dm1_distribution(0.625, s)
    assert law.level(0) == pytest.approx(0.375, abs=1e-14)
    total = sum(law.head(400))
    assert total == pytest.approx(1.0, abs=1e-13)
    assert law.tail(3) == pytest.approx(1.0 - sum(law.head(3)), abs=1e-13)


def test_dm1_close_to_long_erlang(table_service):
    lambda_star = 0.5
    rho = lambda_star / table_service.mu
    law = dm1_distribution(rho, table_service)
    dist = stationary_distribution(QueueModel(calibrate(lambda_star, 1.0, 1000), table_service))
    assert abs(dist.gamma - law.sigma) < 1e-3
    assert max(abs(dist.level(m) - law.level(m)) for m in range(30)) < 1e-3


def test_erlang_family_limit():
    s = BatchService.single(0.8)
    xi = gamma_star(0.625, s)
    gammas = [solve_gamma(QueueModel(calibrate(0.5, 1.0, k), s)).gamma for k in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(gammas, gammas[1:]))
    assert all(g > xi for g in gammas)
    assert abs(gammas[-1] - xi) < 1e-3


def test_sweep_small_erlang_family():
    res = monotonicity_sweep(0.5, 1.0, [1, 2, 4, 8], BatchService.single(0.8))
    assert res.passed and all(res.verdicts.values())
    assert [r.k for r in res.rows] == [1, 2, 4, 8]


def test_sweep_batch_family_pi0_decreasing(table_service):
    res = monotonicity_sweep(0.5, 1.0, [1, 2, 3, 5], table_service)
    assert res.verdicts["pi0_decreasing"]
    assert res.passed


def test_sweep_general_q_only_reports(table_service):
    res = monotonicity_sweep(0.5, 0.9, [2, 5, 10, 20], table_service)
    assert res.asserted == []
    assert res.verdicts["gamma_decreasing"] is False  # table 2, q = 0.9 is not monotone


def test_table2_examples(table_service):
    sol = solve_gamma(table2_model(0.9, 50), gamma0=0.35)
    assert round(sol.gamma, 4) == 0.4484 and round(sol.alpha, 4) == 0.8905
    sol = solve_gamma(table2_model(0.1, 2), gamma0=0.35)
    assert round(sol.gamma, 4) == 0.4485 and round(sol.alpha, 4) == 0.4734


def test_table_grids_shape():
    assert len(table1()) == 50
    assert len(table2()) == 54

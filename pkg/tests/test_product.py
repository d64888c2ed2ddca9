import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model
from qsfqueue.errors import ModelError, NotErgodic
from qsfqueue.model import BatchService, CoxianArrival, InfiniteCoxianArrival, QueueModel
from qsfqueue.oracle import oracle_stationary
from qsfqueue.product import (Method, boundary_distribution, erlang_level_marginal, fixpoint_F,
                              fixpoint_F_general, general_pi00, solve_gamma, stationary_distribution)


def test_table_spot_values(table_service):
    m = QueueModel(CoxianArrival.homogeneous(2, 0.5, 0.1), table_service)
    assert abs(solve_gamma(m).gamma - 0.4168) < 5e-5
    m = QueueModel(CoxianArrival.homogeneous(5, 0.5, 0.5), table_service)
    sol = solve_gamma(m, gamma0=0.35)
    assert round(sol.gamma, 4) == 0.2585 and round(sol.alpha, 4) == 0.4105
    m = QueueModel(CoxianArrival.erlang(20, 0.5), table_service)
    sol = solve_gamma(m)
    assert sol.gamma < 5e-5 and round(sol.alpha, 4) == 0.3846


@pytest.mark.parametrize("gamma0", [0.01, 0.35, 0.5, 0.99])
def test_start_value_does_not_matter(table_model, gamma0):
    ref = solve_gamma(table_model).gamma
    assert solve_gamma(table_model, gamma0=gamma0).gamma == pytest.approx(ref, abs=1e-11)


@pytest.mark.parametrize("method", list(Method))
def test_methods_agree(table_model, method):
    ref = solve_gamma(table_model, Method.FIXED_POINT).gamma
    assert solve_gamma(table_model, method).gamma == pytest.approx(ref, abs=1e-10)


def test_general_and_homogeneous_maps_share_the_root(table_model):
    # the phase-independent form is derived using gamma = F(gamma), so the two
    # maps only coincide at the fixed point (and at 1)
    g = solve_gamma(table_model).gamma
    assert fixpoint_F_general(table_model, g) == pytest.approx(g, abs=1e-12)
    assert fixpoint_F_general(table_model, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_F_at_one_is_one(table_model):
    assert fixpoint_F(table_model, 1.0) == pytest.approx(1.0, abs=1e-14)


def test_erlang_gamma_is_alpha_power(table_service):
    m = QueueModel(CoxianArrival.erlang(3, 1.5), table_service)
    sol = solve_gamma(m)
    assert abs(sol.gamma - sol.alpha ** 3) < 1e-10


def test_infinite_order_identity(table_service):
    a = InfiniteCoxianArrival(0.5, 0.5)
    sol = solve_gamma(QueueModel(a, table_service))
    al = sol.alpha
    assert abs(sol.gamma - al * (1 - a.q) / (1 - a.q * al)) < 1e-10
    assert round(sol.gamma, 4) == 0.2582


def test_infinite_order_q_one_has_no_distribution(table_service):
    m = QueueModel(InfiniteCoxianArrival(0.5, 1.0), table_service)
    sol = solve_gamma(m)
    assert sol.gamma == 0.0
    with pytest.raises(ModelError):
        boundary_distribution(m, sol)


def test_not_ergodic():
    m = QueueModel(CoxianArrival.exponential(1.0), BatchService.single(0.9))
    with pytest.raises(NotErgodic):
        solve_gamma(m)


def test_bad_arguments(table_model):
    with pytest.raises(ValueError):
        solve_gamma(table_model, gamma0=1.0)
    with pytest.raises(ValueError):
        solve_gamma(table_model, tol=0.0)


def test_boundary_matches_oracle(table_model):
    dist = stationary_distribution(table_model)
    ref = oracle_stationary(table_model, 300)
    assert np.max(np.abs(dist.boundary - ref[0])) < 1e-8
    assert abs(dist.prob(3, 2) - ref[3, 2]) < 1e-8


def test_special_pi00_forms_agree_with_general(table_service):
    for arrival in (CoxianArrival.homogeneous(5, 0.5, 0.5), CoxianArrival.erlang(4, 2.0)):
        m = QueueModel(arrival, table_service)
        dist = stationary_distribution(m)
        assert dist.pi00 == pytest.approx(general_pi00(m, dist.gamma), rel=1e-12)


def test_total_mass_and_indexing(table_model):
    dist = stationary_distribution(table_model)
    assert dist.total_mass() == pytest.approx(1.0, abs=1e-13)
    with pytest.raises(IndexError):
        dist.prob(0, 5)
    with pytest.raises(IndexError):
        dist.level(-1)


def test_erlang_marginal_closed_form(table_service):
    m = QueueModel(CoxianArrival.erlang(3, 1.5), table_service)
    dist = stationary_distribution(m)
    for level in range(8):
        assert dist.level(level) == pytest.approx(erlang_level_marginal(m, dist.gamma, level), abs=1e-12)


def test_infinite_order_distribution(table_service):
    m = QueueModel(InfiniteCoxianArrival(0.5, 0.5), table_service)
    dist = stationary_distribution(m)
    assert dist.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert dist.level(0) == pytest.approx(float(np.sum(dist.boundary)), abs=1e-15)
    # a long Coxian chain approaches the infinite one
    big = stationary_distribution(QueueModel(CoxianArrival.homogeneous(200, 0.5, 0.5), table_service))
    for level in range(5):
        assert dist.level(level) == pytest.approx(big.level(level), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_models_against_oracle(seed):
    model = random_model(np.random.default_rng(seed), max_k=4)
    dist = stationary_distribution(model)
    cap = 60
    while dist.gamma ** cap > 1e-13 and cap < 2000:
        cap *= 2
    ref = oracle_stationary(model, cap)
    top = min(cap, 40)
    exact = np.array([[dist.prob(m, i) for i in range(model.k)] for m in range(top + 1)])
    assert np.max(np.abs(exact - ref[:top + 1])) < 1e-9

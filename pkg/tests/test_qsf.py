import numpy as np
import pytest

from qsfqueue import qsf
from qsfqueue.errors import InvalidBlocks, NoExitState
from qsfqueue.model import BatchService, CoxianArrival, QueueModel
from qsfqueue.oracle import queue_transitions
from qsfqueue.product import solve_gamma


def char_poly(m: np.ndarray) -> np.ndarray:
    """Faddeev-LeVerrier: coefficients c_0..c_n of det(xI - m), c_0 = 1."""
    n = m.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    M = np.zeros_like(m)
    for j in range(1, n + 1):
        M = m @ M + c[j - 1] * np.eye(n)
        c[j] = -np.trace(m @ M) / j
    return c


def largest_real_root(c: np.ndarray, hi: float) -> float:
    """Bisection for the largest root of a polynomial that is positive beyond it."""
    def p(x):
        return np.polyval(c, x)
    lo = hi
    while p(lo) > 0:
        lo *= 0.999
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if p(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_blocks_validate_and_row_sums(table_model):
    blocks = qsf.cox_blocks(table_model)
    assert blocks.phases == 5 and blocks.b == 3
    assert np.allclose(blocks.D_boundary[0], 0.8 * np.eye(5))
    assert np.allclose(blocks.D_boundary[2], 0.2 * np.eye(5))


def test_invalid_blocks_rejected():
    W0 = np.array([[-1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(InvalidBlocks):
        qsf.QsfBlocks(W0, W0, [np.zeros((2, 2))], [np.eye(2)])
    with pytest.raises(InvalidBlocks):
        qsf.QsfBlocks(np.eye(2), np.eye(3), [np.eye(2)], [np.eye(2)])


def test_no_exit_state():
    U = np.array([[0.5, 0.5], [0.0, 0.0]])
    W0 = np.array([[-1.0, 0.0], [0.0, 0.0]])
    W = W0 - np.eye(2)
    blocks = qsf.QsfBlocks(W0, W, [U], [np.eye(2)])
    assert not qsf.has_exit_state(blocks)
    with pytest.raises(NoExitState):
        qsf.embedded_q_tilde(blocks)


@pytest.mark.parametrize("k, q", [(1, 0.0), (2, 0.3), (5, 0.5), (3, 1.0)])
def test_three_routes_to_q_tilde(k, q, table_service):
    arrival = CoxianArrival.homogeneous(k, 0.5, q) if k > 1 else CoxianArrival.exponential(0.5)
    model = QueueModel(arrival, table_service)
    blocks = qsf.cox_blocks(model)
    direct = qsf.cox_q_tilde(model)
    assert np.allclose(qsf.embedded_q_tilde(blocks), direct, atol=1e-15)
    ext = qsf.extended_q_tilde(blocks)
    assert np.allclose(qsf.censor_state(ext, ext.shape[0] - 1), direct, atol=1e-15)
    assert np.allclose(qsf.embedded_a_tilde(blocks), qsf.cox_a_tilde(model), atol=1e-15)


def test_a_tilde_shape_and_rows(table_model):
    A = qsf.cox_a_tilde(table_model)
    assert A.shape == (15, 5)
    Q = qsf.cox_q_tilde(table_model)
    # total rate leaving level m downward from level m+1 equals mu
    assert np.allclose(A[:5].sum(axis=1), 0.8)
    # the only way out of the watched level is an arrival
    lam, q = table_model.arrival.rates, table_model.arrival.probs
    assert np.allclose(Q.sum(axis=1), -(1.0 - q) * lam)


def test_truncated_generator_matches_transition_list(table_model):
    blocks = qsf.cox_blocks(table_model)
    dense = qsf.assemble_truncated_generator(blocks, 12)
    listed = queue_transitions(table_model, 12).dense()
    assert np.allclose(dense, listed, atol=1e-15)


def test_mm1_rate_matrix():
    model = QueueModel(CoxianArrival.exponential(0.5), BatchService.single(0.8))
    res = qsf.rate_matrix(qsf.cox_blocks(model))
    assert res.R.shape == (1, 1)
    assert res.gamma == pytest.approx(0.625, abs=1e-12)


def test_table_model_rate_matrix(table_model):
    res = qsf.rate_matrix(qsf.cox_blocks(table_model))
    assert round(res.gamma, 4) == 0.2585
    assert res.eigen_residual < 1e-9


@pytest.mark.parametrize("k, q, pmf", [(2, 0.5, (1.0,)), (3, 0.7, (0.25, 0.5, 0.25)), (5, 1.0, (0.5, 0.5))])
def test_rate_matrix_against_characteristic_polynomial(k, q, pmf):
    model = QueueModel(CoxianArrival.homogeneous(k, 0.5, q), BatchService(0.8, pmf))
    res = qsf.rate_matrix(qsf.cox_blocks(model))
    c = char_poly(res.R)
    root = largest_real_root(c, hi=float(np.abs(res.R).sum(axis=1).max()) + 1.0)
    assert 1.0 / root == pytest.approx(res.gamma, abs=1e-9)
    assert res.gamma == pytest.approx(solve_gamma(model).gamma, abs=1e-10)


def test_censor_state_formula():
    q = np.array([[-3.0, 1.0, 2.0], [1.0, -2.0, 0.5], [0.5, 0.5, -1.5]])
    c = qsf.censor_state(q, 2)
    assert c[0, 1] == pytest.approx(1.0 + 2.0 * 0.5 / 1.5)
    assert c[1, 0] == pytest.approx(1.0 + 0.5 * 0.5 / 1.5)

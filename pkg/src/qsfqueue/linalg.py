"""Small dense real-matrix kernel.

Matrices are plain 2-D ``numpy.ndarray`` objects. The sizes involved here
(order at most ``b*k`` plus a few states) make dense O(n^3) elimination the
right tool; nothing in this module tries to be clever about sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NegativeEntries, NoConvergence, SingularMatrix

PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class EigenPair:
    value: float
    left_vector: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def as_matrix(m, square: bool = True) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _lu_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """In-place Doolittle LU with partial pivoting.

    Returns the packed factors and the row permutation. A pivot is declared
    singular when it falls below ``PIVOT_TOL`` times the largest magnitude in
    its (original) row.
    """
    n = a.shape[0]
    lu = a.copy()
    perm = np.arange(n)
    scale = np.max(np.abs(a), axis=1)
    for col in range(n):
        p = col + int(np.argmax(np.abs(lu[col:, col])))
        if p != col:
            lu[[col, p]] = lu[[p, col]]
            perm[[col, p]] = perm[[p, col]]
        pivot = lu[col, col]
        row_scale = scale[perm[col]]
        if row_scale == 0.0 or abs(pivot) < PIVOT_TOL * row_scale:
            raise SingularMatrix(f"pivot {pivot:.3e} in column {col} below tolerance")
        if col + 1 < n:
            lu[col + 1:, col] /= pivot
            lu[col + 1:, col + 1:] -= np.outer(lu[col + 1:, col], lu[col, col + 1:])
    return lu, perm


def _lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    x = b[perm].astype(float, copy=True)
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for a vector or a matrix of right-hand sides."""
    a = as_matrix(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"right-hand side has {b.shape[0]} rows, matrix order is {a.shape[0]}")
    lu, perm = _lu_factor(a)
    return _lu_solve(lu, perm, b)


def invert(m) -> np.ndarray:
    m = as_matrix(m)
    return solve(m, np.eye(m.shape[0]))


def solve_left(a, b) -> np.ndarray:
    """Solve ``x @ a = b`` (row-vector convention used for stationary vectors)."""
    a = as_matrix(a)
    return solve(a.T, np.asarray(b, dtype=float).T).T


def dominant_left_eigenpair(m, tol: float = 1e-12, max_iter: int = 100_000) -> EigenPair:
    """Perron root and left Perron vector of a nonnegative matrix.

    Plain power iteration on row vectors, ``v <- v M / sum(v M)``. The
    returned vector is normalized to sum to one and the loop stops once
    ``max|v M - r v| < tol``.

    Parameters
    ----------
    m : array_like
        Square matrix with nonnegative entries, irreducible on its support.
    tol : float
        Residual tolerance in the max norm.
    max_iter : int
        Iteration cap; exceeding it raises ``NoConvergence``.
    """
    m = as_matrix(m)
    if np.any(m < 0):
        raise NegativeEntries("power iteration needs a nonnegative matrix")
    n = m.shape[0]
    v = np.full(n, 1.0 / n)
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = v @ m
        r = float(w.sum())
        if r == 0.0:
            return EigenPair(0.0, v, it, 0.0)
        residual = float(np.max(np.abs(w - r * v)))
        if residual < tol:
            return EigenPair(r, w / r, it, residual)
        v = w / r
    raise NoConvergence("power iteration did not converge", max_iter, residual)

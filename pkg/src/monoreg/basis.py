"""Bernstein polynomial design matrices and the increment reparameterization.

A monotone nondecreasing curve on [0, 1] is represented as a weighted sum of
Bernstein polynomials.  Writing the coefficients as an intercept plus
nonnegative increments (the increment transform below) turns the shape
constraint into simple sign constraints, which is what the sampler exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "BasisSet",
    "IncrementTransform",
    "bernstein_row",
    "build_basis_set",
    "evaluate_derivative",
    "evaluate_f",
    "increment_transform",
]


@dataclass(frozen=True)
class IncrementTransform:
    """Integer matrices mapping curve coefficients to increments and back.

    ``a_matrix`` differences successive coefficients (1 on the diagonal, -1 on
    the subdiagonal), so applying it to a coefficient vector beta yields
    theta_0 = beta_0 and theta_k = beta_k - beta_{k-1}.  ``a_inverse`` is the
    lower-triangular all-ones matrix that accumulates increments back into
    coefficients.  Both are exact in integer arithmetic.
    """

    a_matrix: np.ndarray
    a_inverse: np.ndarray


def increment_transform(order: int) -> IncrementTransform:
    """Build the (order+1) x (order+1) increment transform pair."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    size = order + 1
    a = np.eye(size, dtype=np.int64) - np.eye(size, k=-1, dtype=np.int64)
    a_inv = np.tril(np.ones((size, size), dtype=np.int64))
    return IncrementTransform(a_matrix=a, a_inverse=a_inv)


@dataclass(frozen=True)
class BasisSet:
    """Dense design matrices for a fixed order and x grid.

    Attributes
    ----------
    order : int
        Polynomial order (number of increments).
    x_grid : ndarray, shape (n,)
        Evaluation points in [0, 1].
    psi : ndarray, shape (n, order+1)
        Raw Bernstein design; row i holds psi_k(x_i) for k = 0..order.
    lam : ndarray, shape (n, order+1)
        Cumulative (increment-space) design, psi times the accumulation
        matrix.  Column 0 is identically one.  Named ``lam`` because
        ``lambda`` is reserved in Python.
    dpsi : ndarray, shape (n, order)
        Derivative design: column k holds order * psi_k(x_i, order-1), so the
        first derivative of the curve is dpsi @ theta[1:].
    """

    order: int
    x_grid: np.ndarray
    psi: np.ndarray
    lam: np.ndarray
    dpsi: np.ndarray


def _log_binomial(order: int) -> np.ndarray:
    k = np.arange(order + 1)
    return gammaln(order + 1) - gammaln(k + 1) - gammaln(order - k + 1)


def _bernstein_matrix(x: np.ndarray, order: int) -> np.ndarray:
    """Rows of Bernstein basis values, computed in log space.

    Direct binomial coefficients overflow near order 1000 and lose accuracy
    long before; summing log terms keeps rows accurate to ~1e-13 even at
    order 200.  x exactly 0 or 1 would produce 0 * inf in the log form, so
    those rows are set explicitly.
    """
    out = np.empty((x.size, order + 1))
    at_zero = x == 0.0
    at_one = x == 1.0
    interior = ~(at_zero | at_one)
    if np.any(interior):
        xi = x[interior, None]
        k = np.arange(order + 1)[None, :]
        log_terms = _log_binomial(order)[None, :] + k * np.log(xi) + (order - k) * np.log1p(-xi)
        out[interior] = np.exp(log_terms)
    out[at_zero] = 0.0
    out[at_zero, 0] = 1.0
    out[at_one] = 0.0
    out[at_one, order] = 1.0
    return out


def _validate_x(x: np.ndarray) -> None:
    if x.size and (np.min(x) < 0.0 or np.max(x) > 1.0):
        raise ValueError("x values must lie in [0, 1]")
    if not np.all(np.isfinite(x)):
        raise ValueError("x values must be finite")


def bernstein_row(x: float, order: int) -> np.ndarray:
    """Evaluate all Bernstein basis polynomials of ``order`` at a point.

    Returns the length order+1 vector (psi_0(x), ..., psi_order(x)).  Entries
    are nonnegative and sum to one.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    arr = np.asarray([x], dtype=float)
    _validate_x(arr)
    return _bernstein_matrix(arr, order)[0]


def build_basis_set(x_grid, order: int) -> BasisSet:
    """Precompute the raw, cumulative, and derivative designs for a grid."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    x = np.ascontiguousarray(x_grid, dtype=float)
    if x.ndim != 1:
        raise ValueError("x_grid must be one-dimensional")
    _validate_x(x)
    psi = _bernstein_matrix(x, order)
    # The accumulation matrix is lower-triangular ones, so lam[:, j] is the
    # tail sum of psi over k >= j; a reversed cumulative sum avoids ever
    # materializing it.
    lam = np.cumsum(psi[:, ::-1], axis=1)[:, ::-1]
    lam = np.ascontiguousarray(lam)
    if order == 1:
        dpsi = np.ones((x.size, 1))
    else:
        dpsi = order * _bernstein_matrix(x, order - 1)
    return BasisSet(order=order, x_grid=x, psi=psi, lam=lam, dpsi=dpsi)


def evaluate_f(basis: BasisSet, theta) -> np.ndarray:
    """Evaluate the fitted curve at the basis grid for one increment vector."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (basis.order + 1,):
        raise ValueError(
            f"theta must have length {basis.order + 1}, got shape {theta.shape}"
        )
    return basis.lam @ theta


def evaluate_derivative(basis: BasisSet, theta) -> np.ndarray:
    """Evaluate the first derivative of the fitted curve at the basis grid.

    The intercept theta[0] does not enter the derivative.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (basis.order + 1,):
        raise ValueError(
            f"theta must have length {basis.order + 1}, got shape {theta.shape}"
        )
    return basis.dpsi @ theta[1:]

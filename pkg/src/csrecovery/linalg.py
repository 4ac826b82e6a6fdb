"""Dense linear algebra and scalar numerics shared by the solvers."""

import math

import numpy as np
from scipy import linalg as sla
from scipy import optimize

from .exceptions import (
    BracketError,
    ContractViolation,
    DomainError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)
from .rng import RngStream

__all__ = [
    "matvec",
    "solve_least_squares",
    "solve_spd",
    "digamma",
    "find_root_scalar",
    "spectral_norm_estimate",
]


def _as_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ContractViolation(f"{name} must be 2-D, got shape {A.shape}")
    return A


def matvec(A, x):
    A = _as_matrix(A)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ContractViolation(
            f"dimension mismatch: A is {A.shape}, x has shape {x.shape}"
        )
    return A @ x


def solve_least_squares(A, b, rcond=None):
    """Minimize ``||Ax - b||_2`` for a tall matrix of full column rank.

    Uses a Householder QR factorization rather than forming the
    pseudo-inverse.  A diagonal entry of ``R`` below
    ``rcond * max|diag(R)|`` is reported as a rank deficiency at that column.
    """
    A = _as_matrix(A)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if b.shape != (m,):
        raise ContractViolation(f"b must have shape ({m},), got {b.shape}")
    if m < n:
        raise ContractViolation(f"need rows >= cols, got {A.shape}")
    if n == 0:
        return np.zeros(0)
    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diag(R))
    if rcond is None:
        rcond = max(m, n) * np.finfo(float).eps
    scale = diag.max()
    bad = np.flatnonzero(diag <= rcond * scale) if scale > 0 else np.arange(n)
    if bad.size:
        j = int(bad[0])
        raise SingularMatrixError(
            f"matrix is rank deficient: column {j} has pivot {diag[j]:.3e}", column=j
        )
    return sla.solve_triangular(R, Q.T @ b, lower=False)


def solve_spd(A, B):
    """Solve ``A X = B`` for symmetric positive-definite ``A`` via Cholesky."""
    A = _as_matrix(A)
    B = np.asarray(B, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ContractViolation(f"A must be square, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise ContractViolation(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
    scale = np.abs(A).max() if A.size else 0.0
    if np.abs(A - A.T).max(initial=0.0) > 1e-12 * scale:
        raise ContractViolation("A is not symmetric within 1e-12 relative")
    try:
        factor = sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc
    return sla.cho_solve(factor, B, check_finite=False)


# Bernoulli-number coefficients B_2k / (2k) of the asymptotic expansion.
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x):
    """Digamma function for real ``x > 0``.

    Shifts ``x`` upward to at least 6 with ``psi(x) = psi(x + 1) - 1/x`` and
    then sums the asymptotic series; absolute error is below 1e-12.
    """
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"digamma requires finite x > 0, got {x}")
    shift = 0.0
    while x < 6.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for coef in _DIGAMMA_SERIES:
        series += coef * power
        power *= inv2
    return shift + math.log(x) - 0.5 / x - series


def find_root_scalar(f, lo, hi, tol=1e-12, maxiter=200):
    """Root of ``f`` on a sign-changing bracket ``[lo, hi]``.

    Brent's method (bisection safeguarded with secant/inverse quadratic
    steps).  Raises :class:`BracketError` when ``f(lo)`` and ``f(hi)`` share a
    strict sign.
    """
    if not lo < hi:
        raise ContractViolation(f"need lo < hi, got [{lo}, {hi}]")
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0:
        return float(lo)
    if f_hi == 0:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={f_lo:.3e}, {f_hi:.3e}")
    return float(optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=maxiter))


def spectral_norm_estimate(A, iters=100, tol=1e-12):
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = _as_matrix(A)
    n = A.shape[1]
    v = RngStream(0x5EED, 0).gaussian(n) + 1.0
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max(1, iters)):
        w = A.T @ (A @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        previous, estimate = estimate, math.sqrt(norm_w)
        if abs(estimate - previous) <= tol * estimate:
            break
    return estimate

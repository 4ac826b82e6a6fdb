"""Basis pursuit as a linear program, and gradient descent with sparsification."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from ..exceptions import ContractViolation, InfeasibleError
from ..linalg import spectral_norm_estimate
from ._common import RecoveryResult, as_sensing, check_budget, check_measurements
from .greedy import hard_threshold

__all__ = [
    "BpConfig",
    "GradesConfig",
    "LpSolution",
    "lp_primal_dual",
    "solve_basis_pursuit",
    "solve_grades",
]


@dataclass(frozen=True)
class BpConfig:
    tol_gap: float = 1e-8
    tol_pinf: float = 1e-8
    tol_dinf: float = 1e-8
    max_iter: int = 100

    def __post_init__(self):
        if min(self.tol_gap, self.tol_pinf, self.tol_dinf) <= 0:
            raise ContractViolation("LP tolerances must be positive")
        if self.max_iter < 1:
            raise ContractViolation(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class GradesConfig:
    gamma: float = 4.0 / 3.0
    max_iter: int = 500
    tol_residual: float = 1e-7
    scale_to_columns: bool = True

    def __post_init__(self):
        if self.gamma < 1:
            raise ContractViolation(f"gamma must be >= 1, got {self.gamma}")
        if self.max_iter < 1:
            raise ContractViolation(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class LpSolution:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    iterations: int
    converged: bool
    gap: float
    pinf: float
    dinf: float


class _DenseOperator:
    def __init__(self, A):
        self.A = A
        self.shape = A.shape

    def dot(self, x):
        return self.A @ x

    def rdot(self, y):
        return self.A.T @ y

    def normal(self, d):
        return (self.A * d) @ self.A.T


class _SplitOperator:
    """``A = [phi, -phi]`` without materializing the 2N columns."""

    def __init__(self, phi):
        self.phi = phi
        m, n = phi.shape
        self.n = n
        self.shape = (m, 2 * n)

    def dot(self, x):
        return self.phi @ (x[: self.n] - x[self.n:])

    def rdot(self, y):
        v = self.phi.T @ y
        return np.concatenate([v, -v])

    def normal(self, d):
        w = d[: self.n] + d[self.n:]
        return (self.phi * w) @ self.phi.T


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def _factor_normal(op, d):
    M = op.normal(d)
    scale = np.trace(M) / M.shape[0] if M.shape[0] else 0.0
    if not scale > 0:
        return None
    reg = 1e-14 * scale
    for _ in range(8):
        try:
            return sla.cho_factor(M + reg * np.eye(M.shape[0]), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            reg *= 100.0
    return None


def _mehrotra(op, b, c, cfg):
    m, n = op.shape
    b_norm = np.linalg.norm(b)
    c_norm = np.linalg.norm(c)

    # least-norm starting point; also detects b outside range(A)
    ones = np.ones(n)
    factor = _factor_normal(op, ones)
    if factor is None:
        raise InfeasibleError("constraint matrix is numerically zero")
    x = op.rdot(sla.cho_solve(factor, b))
    if np.linalg.norm(op.dot(x) - b) > 1e-6 * (1.0 + b_norm):
        raise InfeasibleError("b is not in the range of A: Ax = b has no solution")
    y = sla.cho_solve(factor, op.dot(c))
    z = c - op.rdot(y)
    x = x + max(-1.5 * x.min(), 0.0)
    z = z + max(-1.5 * z.min(), 0.0)
    xz = x @ z
    x = x + 0.5 * xz / max(z.sum(), 1e-300) + 1e-12
    z = z + 0.5 * xz / max(x.sum(), 1e-300) + 1e-12

    iterations = 0
    converged = False
    pinf = dinf = gap = np.inf
    for iterations in range(cfg.max_iter + 1):
        rb = b - op.dot(x)
        rc = c - op.rdot(y) - z
        pinf = float(np.linalg.norm(rb))
        dinf = float(np.linalg.norm(rc))
        primal_obj = float(c @ x)
        gap = abs(primal_obj - float(b @ y))
        if (
            pinf <= cfg.tol_pinf * (1.0 + b_norm)
            and dinf <= cfg.tol_dinf * (1.0 + c_norm)
            and gap <= cfg.tol_gap * (1.0 + abs(primal_obj))
        ):
            converged = True
            break
        if iterations == cfg.max_iter:
            break
        if max(np.abs(x).max(), np.abs(y).max(initial=0.0)) > 1e13 * (1.0 + b_norm + c_norm):
            raise InfeasibleError("iterates diverged; the LP appears infeasible or unbounded")

        mu = float(x @ z) / n
        d = x / z
        factor = _factor_normal(op, d)
        if factor is None:
            break

        def direction(rxz):
            # rxz is the right-hand side of Z dx + X dz = rxz
            rhs = rb - op.dot((rxz - x * rc) / z)
            dy = sla.cho_solve(factor, rhs)
            dz = rc - op.rdot(dy)
            dx = (rxz - x * dz) / z
            return dx, dy, dz

        dx_aff, dy_aff, dz_aff = direction(-x * z)
        ap = _max_step(x, dx_aff)
        ad = _max_step(z, dz_aff)
        mu_aff = float((x + ap * dx_aff) @ (z + ad * dz_aff)) / n
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dx, dy, dz = direction(-x * z - dx_aff * dz_aff + sigma * mu)
        eta = min(0.99999, max(0.95, 1.0 - 10.0 * mu))
        ap = min(1.0, eta * _max_step(x, dx))
        ad = min(1.0, eta * _max_step(z, dz))
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InfeasibleError("non-finite iterate; the LP appears infeasible")

    return LpSolution(x, y, z, iterations, converged, gap, pinf, dinf)


def lp_primal_dual(A, b, c, cfg=None):
    """Solve ``min c^T x  s.t.  Ax = b, x >= 0`` and its dual.

    Primal-dual path following with Mehrotra predictor-corrector steps; the
    Newton systems are reduced to the ``m x m`` normal equations
    ``A D A^T dy = r``.  Returns an :class:`LpSolution`; ``converged`` is
    False when ``max_iter`` is hit first.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],) or c.shape != (A.shape[1],):
        raise ContractViolation(
            f"inconsistent LP shapes: A {A.shape}, b {b.shape}, c {c.shape}"
        )
    return _mehrotra(_DenseOperator(A), b, c, cfg or BpConfig())


def solve_basis_pursuit(y, phi, cfg=None):
    """Minimize ``||x||_1`` subject to ``phi x = y``.

    Splits ``x = x_plus - x_minus`` and solves the LP with
    ``A = [phi, -phi]``, ``b = y`` and unit costs.
    """
    phi = as_sensing(phi)
    y = check_measurements(y, phi)
    cfg = cfg or BpConfig()
    n = phi.shape[1]
    sol = _mehrotra(_SplitOperator(phi), y, np.ones(2 * n), cfg)
    x_plus, x_minus = sol.x[:n], sol.x[n:]
    return RecoveryResult(
        x_hat=x_plus - x_minus,
        iterations=sol.iterations,
        converged=sol.converged,
        diagnostics={
            "gap": sol.gap,
            "primal_infeasibility": sol.pinf,
            "dual_infeasibility": sol.dinf,
            "split_overlap": float(np.minimum(x_plus, x_minus).max(initial=0.0)),
            "residual_norm": float(np.linalg.norm(y - phi @ (x_plus - x_minus))),
        },
    )


def solve_grades(y, phi, s, cfg=None):
    """Gradient descent with sparsification.

    Iterates ``x <- H_s(x + phi^T r / gamma)`` with ``r = y - phi x`` from
    ``x = 0`` and stops when ``||r|| <= tol_residual * ||y||`` or at
    ``max_iter``.

    ``gamma = 4/3`` presumes unit-norm columns.  With ``scale_to_columns`` the
    step denominator is multiplied by the mean squared column norm, which is
    the same iteration run on the column-normalized matrix; it is a no-op for
    normalized matrices.

    If the residual norm grows for 10 consecutive iterations the run restarts
    from zero with ``gamma = max(gamma, ||phi||_2^2)``; ``diagnostics["safeguarded"]``
    records this.
    """
    phi = as_sensing(phi)
    y = check_measurements(y, phi)
    s = check_budget(s, phi.shape[1])
    cfg = cfg or GradesConfig()

    gamma = cfg.gamma
    if cfg.scale_to_columns:
        col_energy = float(np.mean(np.einsum("ij,ij->j", phi, phi)))
        if col_energy > 0:
            gamma *= col_energy
    safeguarded = False
    y_norm = np.linalg.norm(y)
    x = np.zeros(phi.shape[1])
    r = y.copy()
    r_norm = y_norm
    rising = 0
    converged = False
    stop_reason = "max_iter"
    iterations = 0
    if y_norm == 0.0:
        converged, stop_reason = True, "residual"
    else:
        for iterations in range(1, cfg.max_iter + 1):
            x_new = hard_threshold(x + (phi.T @ r) / gamma, s)
            r_new = y - phi @ x_new
            r_new_norm = np.linalg.norm(r_new)
            if not np.isfinite(r_new_norm):
                if safeguarded:
                    stop_reason = "diverged"
                    break
                rising = 10
            else:
                rising = rising + 1 if r_new_norm > r_norm else 0
                x, r, r_norm = x_new, r_new, r_new_norm
                if r_norm <= cfg.tol_residual * y_norm:
                    converged, stop_reason = True, "residual"
                    break
            if rising >= 10 and not safeguarded:
                safeguarded = True
                gamma = max(gamma, spectral_norm_estimate(phi) ** 2)
                x = np.zeros(phi.shape[1])
                r, r_norm, rising = y.copy(), y_norm, 0

    return RecoveryResult(
        x_hat=x,
        iterations=iterations,
        converged=converged,
        diagnostics={
            "residual_norm": float(r_norm),
            "gamma": gamma,
            "safeguarded": safeguarded,
            "stop_reason": stop_reason,
        },
    )

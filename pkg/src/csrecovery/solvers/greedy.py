"""Greedy pursuit: orthogonal matching pursuit and iterative hard thresholding."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ContractViolation, ExhaustedError, SingularMatrixError
from ..linalg import solve_least_squares, spectral_norm_estimate
from ._common import RecoveryResult, as_sensing, check_budget, check_measurements

__all__ = [
    "OmpConfig",
    "IhtConfig",
    "hard_threshold",
    "select_atom",
    "restricted_least_squares",
    "solve_omp",
    "solve_iht",
]


@dataclass(frozen=True)
class OmpConfig:
    """``max_atoms=None`` means ``M // 2``."""

    max_atoms: int = None
    tol_residual: float = 1e-6

    def __post_init__(self):
        if self.max_atoms is not None and self.max_atoms < 1:
            raise ContractViolation(f"max_atoms must be >= 1, got {self.max_atoms}")
        if self.tol_residual < 0:
            raise ContractViolation(f"tol_residual must be >= 0, got {self.tol_residual}")


IHT_STEP_MODES = ("unit", "normalized", "adaptive")


@dataclass(frozen=True)
class IhtConfig:
    max_iter: int = 1000
    tol: float = 1e-7
    step_mode: str = "normalized"

    def __post_init__(self):
        if self.max_iter < 1:
            raise ContractViolation(f"max_iter must be >= 1, got {self.max_iter}")
        if self.step_mode not in IHT_STEP_MODES:
            raise ContractViolation(
                f"step_mode must be one of {IHT_STEP_MODES}, got {self.step_mode!r}"
            )


def hard_threshold(x, s):
    """Keep the ``s`` largest-magnitude entries of ``x``, zero the rest.

    Ties in magnitude keep the lower index.
    """
    x = np.asarray(x, dtype=float)
    if not 0 <= s <= x.shape[0]:
        raise ContractViolation(f"need 0 <= s <= {x.shape[0]}, got {s}")
    out = np.zeros_like(x)
    if s == 0:
        return out
    keep = np.argsort(-np.abs(x), kind="stable")[:s]
    out[keep] = x[keep]
    return out


def select_atom(phi, r, excluded=()):
    """Index of the column most correlated with ``r``, skipping ``excluded``."""
    phi = as_sensing(phi)
    r = check_measurements(r, phi)
    corr = np.abs(phi.T @ r)
    excluded = list(excluded)
    if excluded:
        corr[excluded] = -np.inf
    j = int(np.argmax(corr))
    if corr[j] == -np.inf:
        raise ExhaustedError("all columns are already in the support")
    return j


def restricted_least_squares(phi, support, y):
    """Least-squares fit on the columns in ``support``; zeros elsewhere."""
    phi = as_sensing(phi)
    y = check_measurements(y, phi)
    support = list(support)
    x = np.zeros(phi.shape[1])
    if support:
        x[support] = solve_least_squares(phi[:, support], y)
    return x


def solve_omp(y, phi, cfg=None, callback=None):
    """Orthogonal matching pursuit.

    Each iteration adds the atom most correlated with the residual, refits by
    least squares on the selected atoms and updates the residual.  Stops when
    ``||r|| <= tol_residual * ||y||`` or the support reaches ``max_atoms``.

    ``callback(iteration, support, x, r)`` is invoked after every refit.
    """
    phi = as_sensing(phi)
    y = check_measurements(y, phi)
    cfg = cfg or OmpConfig()
    m, n = phi.shape
    max_atoms = cfg.max_atoms if cfg.max_atoms is not None else max(1, m // 2)
    max_atoms = min(max_atoms, m, n)

    x = np.zeros(n)
    r = y.copy()
    support = []
    threshold = cfg.tol_residual * np.linalg.norm(y)
    residual_norms = [float(np.linalg.norm(r))]
    converged = True
    while residual_norms[-1] > threshold and len(support) < max_atoms:
        try:
            j = select_atom(phi, r, support)
            candidate = support + [j]
            x_new = restricted_least_squares(phi, candidate, y)
        except (ExhaustedError, SingularMatrixError):
            converged = False
            break
        support, x = candidate, x_new
        r = y - phi[:, support] @ x[support]
        residual_norms.append(float(np.linalg.norm(r)))
        if callback is not None:
            callback(len(support), list(support), x, r)

    return RecoveryResult(
        x_hat=x,
        iterations=len(support),
        converged=converged,
        diagnostics={
            "residual_norm": residual_norms[-1],
            "selected": list(support),
            "residual_history": residual_norms,
        },
    )


def _adaptive_step(phi, x, g, s, support, c=0.01, kappa=2.0):
    """Step size and thresholded iterate for adaptive-step IHT.

    The step is the exact line-search minimizer restricted to the current
    support.  If the support changes and the step exceeds
    ``(1 - c) ||x_new - x||^2 / ||phi (x_new - x)||^2`` it is shrunk by
    ``kappa (1 - c)`` until the objective is guaranteed to decrease.
    """
    gs = g[support]
    denom = np.linalg.norm(phi[:, support] @ gs) ** 2
    step = float(gs @ gs) / denom if denom > 0 else 1.0
    while True:
        x_new = hard_threshold(x + step * g, s)
        new_support = np.flatnonzero(x_new)
        if not np.any(x) or np.array_equal(new_support, support):
            return step, x_new
        d = x_new - x
        bound = (1.0 - c) * float(d @ d) / max(np.linalg.norm(phi @ d) ** 2, 1e-300)
        if step <= bound:
            return step, x_new
        step /= kappa * (1.0 - c)


def solve_iht(y, phi, s, cfg=None, callback=None):
    """Iterative hard thresholding ``x <- H_s(x + step * phi^T (y - phi x))``.

    ``step_mode`` picks the step:

    * ``"unit"``: step 1, the literal iteration (diverges when ``||phi||_2 > 1``).
    * ``"normalized"``: fixed step ``1 / ||phi||_2^2``; never diverges but can
      stall at a wrong support.
    * ``"adaptive"``: step recomputed every iteration by an exact line search
      on the current support with a backtracking safeguard; stable and scale
      invariant.
    """
    phi = as_sensing(phi)
    y = check_measurements(y, phi)
    s = check_budget(s, phi.shape[1])
    cfg = cfg or IhtConfig()
    step = 1.0
    if cfg.step_mode == "normalized":
        norm = spectral_norm_estimate(phi)
        step = 1.0 / norm**2 if norm > 0 else 1.0

    x = np.zeros(phi.shape[1])
    r = y.copy()
    y_norm = np.linalg.norm(y)
    support = np.sort(np.argsort(-np.abs(phi.T @ y), kind="stable")[:s])
    converged = False
    stop_reason = "max_iter"
    iterations = 0
    if y_norm == 0.0:
        converged, stop_reason = True, "residual"
    else:
        for iterations in range(1, cfg.max_iter + 1):
            g = phi.T @ r
            if cfg.step_mode == "adaptive":
                step, x_new = _adaptive_step(phi, x, g, s, support)
            else:
                x_new = hard_threshold(x + step * g, s)
            if not np.all(np.isfinite(x_new)):
                stop_reason = "diverged"
                break
            with np.errstate(over="ignore", invalid="ignore"):
                delta = np.linalg.norm(x_new - x)
                x_norm = np.linalg.norm(x)
            x = x_new
            support = np.flatnonzero(x)
            with np.errstate(over="ignore", invalid="ignore"):
                r = y - phi @ x
                r_norm = np.linalg.norm(r)
            if not np.isfinite(r_norm):
                stop_reason = "diverged"
                break
            if callback is not None:
                callback(iterations, x, r)
            if r_norm <= cfg.tol * y_norm:
                converged, stop_reason = True, "residual"
                break
            if x_norm > 0 and delta <= cfg.tol * x_norm:
                converged, stop_reason = True, "stationary"
                break

    return RecoveryResult(
        x_hat=x,
        iterations=iterations,
        converged=converged,
        diagnostics={
            "residual_norm": float(np.linalg.norm(r)),
            "step": step,
            "stop_reason": stop_reason,
        },
    )

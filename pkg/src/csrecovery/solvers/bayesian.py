"""Sparse Bayesian learning: fast Laplace-prior inference and the RVM.

Both solvers keep an explicit active set of basis columns and only ever
factor matrices over that set (or, for the RVM while the active set is
larger than the number of measurements, the ``M x M`` marginal covariance).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from ..exceptions import BracketError, ContractViolation
from ..linalg import digamma, find_root_scalar
from ._common import RecoveryResult, as_sensing, check_measurements

__all__ = [
    "FastLaplaceConfig",
    "FastLaplaceState",
    "RvmConfig",
    "RvmState",
    "fl_compute_sq",
    "fl_gamma_update",
    "fl_objective",
    "fl_lambda_update",
    "fl_beta_update",
    "fl_theta_update",
    "solve_fast_laplace",
    "rvm_update",
    "rvm_log_marginal_likelihood",
    "solve_rvm",
]

BETA_MAX = 1e12
THETA_BRACKET = (1e-6, 1e6)


# ---------------------------------------------------------------------------
# Fast Laplace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FastLaplaceConfig:
    max_iter: int = 1000
    tol: float = 1e-8
    a_beta: float = 1e-6
    b_beta: float = 1e-6
    theta0: float = 2.0
    update_lambda: bool = True
    update_theta: bool = True
    update_beta: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ContractViolation(f"max_iter must be >= 1, got {self.max_iter}")
        if self.theta0 <= 0:
            raise ContractViolation(f"theta0 must be > 0, got {self.theta0}")


@dataclass
class FastLaplaceState:
    """Hyperparameters and posterior over the active set.

    ``gamma`` holds one prior variance per column (zero means inactive);
    ``Sigma`` and ``mu`` are indexed by position in ``active``.
    """

    gamma: np.ndarray
    lam: float
    beta: float
    theta: float
    active: list = field(default_factory=list)
    Sigma: np.ndarray = None
    mu: np.ndarray = None
    s_all: np.ndarray = None
    q_all: np.ndarray = None
    a_beta: float = 1e-6
    b_beta: float = 1e-6

    @classmethod
    def initial(cls, n, beta, theta=2.0, a_beta=1e-6, b_beta=1e-6):
        return cls(
            gamma=np.zeros(n),
            lam=0.0,
            beta=float(beta),
            theta=float(theta),
            Sigma=np.zeros((0, 0)),
            mu=np.zeros(0),
            a_beta=a_beta,
            b_beta=b_beta,
        )


def _spd_inverse(A):
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    chol, info = sla.lapack.dpotrf(A, lower=1, clean=1)
    if info != 0:
        raise np.linalg.LinAlgError("posterior precision is not positive definite")
    inv, info = sla.lapack.dpotri(chol, lower=1)
    if info != 0:
        raise np.linalg.LinAlgError("posterior precision is not positive definite")
    # dpotri fills the lower triangle only; the upper one is still zero
    out = inv + inv.T
    out[np.diag_indices_from(out)] *= 0.5
    return out


def _fl_moments(gram, phity_a, gamma_a, beta):
    """Posterior over the active set from ``Phi_A^T Phi_A`` and ``Phi_A^T y``."""
    if gram.shape[0] == 0:
        return np.zeros((0, 0)), np.zeros(0)
    precision = beta * gram
    precision[np.diag_indices_from(precision)] += 1.0 / gamma_a
    Sigma = _spd_inverse(precision)
    return Sigma, beta * (Sigma @ phity_a)


def _fl_posterior(phi, y, gamma, active, beta):
    """``Sigma = (beta Phi_A^T Phi_A + diag(1/gamma_A))^-1``, ``mu = beta Sigma Phi_A^T y``."""
    Phi_A = phi[:, list(active)]
    return _fl_moments(Phi_A.T @ Phi_A, Phi_A.T @ y, gamma[list(active)], beta)


def _fl_rank_one(Sigma, mu, pos, new_gamma, old_gamma, beta, c=None, S=None, Q=None):
    """Posterior after changing one prior variance, at fixed ``beta``.

    ``pos`` is the position in the active set; ``None`` adds a column, with
    ``c = Phi_A^T phi_i`` and its factors ``S``, ``Q``.  Exact rank-one
    (Sherman-Morrison) forms, O(|A|^2).
    """
    if pos is None:
        sii = 1.0 / (1.0 / new_gamma + S)
        mui = sii * Q
        e = beta * (Sigma @ c)
        k = Sigma.shape[0]
        out = np.empty((k + 1, k + 1))
        out[:k, :k] = Sigma + sii * np.outer(e, e)
        out[:k, k] = out[k, :k] = -sii * e
        out[k, k] = sii
        return out, np.append(mu - mui * e, mui)
    col = Sigma[:, pos]
    if new_gamma == 0.0:
        keep = np.arange(Sigma.shape[0]) != pos
        Sigma = Sigma - np.outer(col, col) / col[pos]
        mu = mu - (mu[pos] / col[pos]) * col
        return Sigma[np.ix_(keep, keep)], mu[keep]
    delta = 1.0 / new_gamma - 1.0 / old_gamma
    kappa = delta / (1.0 + col[pos] * delta)
    return Sigma - kappa * np.outer(col, col), mu - (kappa * mu[pos]) * col


def _fl_sq(beta, gamma, active, Sigma, mu, col_sq, phity, cross):
    # cross = phi^T Phi_A; Q = beta phi^T y - beta phi^T Phi_A mu
    if active:
        S = beta * col_sq - beta**2 * np.einsum("ij,ij->i", cross @ Sigma, cross)
        Q = beta * (phity - cross @ mu)
    else:
        S = beta * col_sq
        Q = beta * phity
    s, q = S.copy(), Q.copy()
    skipped = np.zeros(col_sq.shape[0], dtype=bool)
    if active:
        # For in-model columns use Sigma_ii = 1/(1/gamma_i + s_i) and
        # mu_i = Sigma_ii q_i; same values as S/(1 - gamma S) without the
        # cancellation in 1 - gamma S.
        diag = np.diag(Sigma)
        s_act = 1.0 / diag - 1.0 / gamma[active]
        bad = ~(s_act > 0)
        s[active] = np.where(bad, S[active], s_act)
        q[active] = mu / diag
        skipped[np.asarray(active)[bad]] = True
    return s, q, skipped


def fl_compute_sq(state, phi, y, cross=None):
    """Leave-one-out sparsity and quality factors for every column.

    Returns ``(s, q, skipped)`` where ``skipped`` flags indices whose
    ``1 - gamma_i S_i`` was not positive.  ``cross`` may carry the cached
    ``phi^T Phi_A``.
    """
    phi = as_sensing(phi)
    y = np.asarray(y, dtype=float)
    active = list(state.active)
    col_sq = np.einsum("ij,ij->j", phi, phi)
    if cross is None:
        cross = phi.T @ phi[:, active]
    return _fl_sq(state.beta, state.gamma, active, state.Sigma, state.mu,
                  col_sq, phi.T @ y, cross)


def fl_gamma_update(s, q, lam):
    """Maximizer over ``gamma >= 0`` of the single-column objective.

    Zero unless ``q^2 - s > lam``; otherwise the positive root of
    ``lam s^2 g^2 + s (s + 2 lam) g + (s + lam - q^2) = 0``, evaluated in the
    cancellation-free form ``2 (q^2 - s - lam) / (s (s + 2 lam) + s sqrt(D))``
    which reduces to ``(q^2 - s) / s^2`` at ``lam = 0``.
    """
    s = np.asarray(s, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(s <= 0):
        raise ContractViolation("s must be positive")
    if np.any(np.asarray(lam) < 0):
        raise ContractViolation("lambda must be >= 0")
    excess = q * q - s - lam
    grow = excess > 0
    disc = (s + 2 * lam) ** 2 + 4 * lam * np.where(grow, excess, 0.0)
    assert np.all(disc >= 0), "negative discriminant"
    root = 2 * excess / (s * (s + 2 * lam) + s * np.sqrt(disc))
    out = np.where(grow, root, 0.0)
    return float(out) if out.ndim == 0 else out


def fl_objective(gamma, s, q, lam):
    """``h(g) = (log(1/(1 + g s)) + q^2 g / (1 + g s) - lam g) / 2``."""
    t = 1.0 + gamma * s
    return 0.5 * (-np.log(t) + q * q * gamma / t - lam * gamma)


def fl_lambda_update(gamma, theta, n=None):
    """``lambda = (N - 1 + theta/2) / (sum(gamma)/2 + theta/2)``."""
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.shape[0] if n is None else n
    return (n - 1 + theta / 2) / (gamma.sum() / 2 + theta / 2)


def fl_beta_update(residual_energy, trace, m, a_beta=1e-6, b_beta=1e-6):
    """Noise precision from the expected residual energy, clamped at 1e12.

    The expected energy is ``||y - Phi_A mu||^2 + trace(Phi_A Sigma Phi_A^T)``;
    ``m`` is the number of measurements.
    """
    denom = (residual_energy + trace) / 2 + b_beta
    if denom <= 0:
        return BETA_MAX
    return min(BETA_MAX, (m / 2 + a_beta) / denom)


def _theta_equation(theta, lam):
    return math.log(theta) + 1.0 - digamma(theta / 2) + math.log(lam) - lam


def fl_theta_update(lam, previous):
    """Root in ``theta`` of ``log t + 1 - psi(t/2) + log(lam) - lam = 0``.

    Returns ``(theta, found)``; without a sign change on ``[1e-6, 1e6]`` the
    previous value is kept and ``found`` is False.
    """
    if not lam > 0:
        raise ContractViolation(f"lambda must be > 0, got {lam}")
    lo, hi = THETA_BRACKET
    try:
        return find_root_scalar(lambda t: _theta_equation(t, lam), lo, hi, tol=1e-12), True
    except BracketError:
        return previous, False


def solve_fast_laplace(y, phi, cfg=None, callback=None):
    """Sequential sparse Bayesian learning with a Laplace prior.

    Each iteration proposes the optimal ``gamma_i`` for every column, applies
    the single add / re-estimate / prune action with the largest gain in the
    marginal objective, then refreshes the posterior, ``lambda``, ``beta`` and
    ``theta``.  Stops once no column would change by more than ``cfg.tol``.
    """
    phi = as_sensing(phi)
    y = check_measurements(y, phi)
    cfg = cfg or FastLaplaceConfig()
    m, n = phi.shape

    var_y = float(np.var(y))
    if var_y == 0.0 and not np.any(y):
        return RecoveryResult(x_hat=np.zeros(n), iterations=0, converged=True,
                              diagnostics={"active": [], "beta": BETA_MAX})
    beta0 = min(BETA_MAX, 1.0 / (0.01 * var_y)) if var_y > 0 else BETA_MAX
    state = FastLaplaceState.initial(n, beta0, cfg.theta0, cfg.a_beta, cfg.b_beta)

    col_sq = np.einsum("ij,ij->j", phi, phi)
    phity = phi.T @ y
    cross = np.zeros((n, 0))  # phi^T Phi_A, one column per active index

    def posterior():
        act = state.active
        return _fl_moments(cross[act], phity[act], state.gamma[act], state.beta)

    skipped_total = 0
    theta_fallbacks = 0
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        state.Sigma, state.mu = posterior()
        s, q, skipped = _fl_sq(state.beta, state.gamma, state.active, state.Sigma,
                               state.mu, col_sq, phity, cross)
        state.s_all, state.q_all = s, q
        skipped_total += int(skipped.sum())
        s_safe = np.where(s > 0, s, 1.0)
        proposal = np.where(skipped | ~(s > 0), state.gamma,
                            fl_gamma_update(s_safe, q, state.lam))
        change = np.abs(proposal - state.gamma)
        if change.max() <= cfg.tol:
            converged = True
            iterations -= 1
            break
        gain = fl_objective(proposal, s_safe, q, state.lam) - fl_objective(state.gamma, s_safe, q, state.lam)
        gain[change == 0] = -np.inf
        i = int(np.argmax(gain))

        was_active = state.gamma[i] > 0
        if was_active:
            pos = state.active.index(i)
            state.Sigma, state.mu = _fl_rank_one(state.Sigma, state.mu, pos, proposal[i],
                                                 state.gamma[i], state.beta)
        else:
            state.Sigma, state.mu = _fl_rank_one(state.Sigma, state.mu, None, proposal[i], 0.0,
                                                 state.beta, cross[i], s[i], q[i])
        state.gamma[i] = proposal[i]
        if not was_active:
            state.active.append(i)
            cross = np.column_stack([cross, phi.T @ phi[:, i]])
        elif proposal[i] == 0:
            state.active.pop(pos)
            cross = np.delete(cross, pos, axis=1)
        if callback is not None:
            callback(iterations, state)
        if cfg.update_lambda:
            # count only in-model coefficients; the full length N drives
            # lambda so high that every column is pruned
            state.lam = max(0.0, fl_lambda_update(state.gamma, state.theta, len(state.active)))
        if cfg.update_theta and state.lam > 0:
            state.theta, found = fl_theta_update(state.lam, state.theta)
            theta_fallbacks += not found
        if not cfg.update_beta:
            continue
        act = state.active
        residual = y - phi[:, act] @ state.mu
        trace = float(np.einsum("ij,ij->", cross[act], state.Sigma))
        energy = float(residual @ residual)
        state.beta = fl_beta_update(energy, trace, m, cfg.a_beta, cfg.b_beta)

    state.Sigma, state.mu = _fl_posterior(phi, y, state.gamma, state.active, state.beta)
    x = np.zeros(n)
    if state.active:
        x[state.active] = state.mu
    return RecoveryResult(
        x_hat=x,
        iterations=iterations,
        converged=converged,
        diagnostics={
            "active": list(state.active),
            "beta": state.beta,
            "lambda": state.lam,
            "theta": state.theta,
            "skipped": skipped_total,
            "theta_fallbacks": theta_fallbacks,
            "residual_norm": float(np.linalg.norm(y - phi @ x)),
        },
    )


# ---------------------------------------------------------------------------
# Relevance vector machine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RvmConfig:
    max_iter: int = 300
    tol: float = 1e-6
    prune_threshold: float = 1e12
    alpha0_max: float = 1e12
    # noise precision is frozen while more than this fraction of M columns
    # are active; None re-estimates it every sweep
    noise_hold_fraction: float = 0.5

    def __post_init__(self):
        if self.max_iter < 1:
            raise ContractViolation(f"max_iter must be >= 1, got {self.max_iter}")
        if self.noise_hold_fraction is not None and self.noise_hold_fraction < 0:
            raise ContractViolation("noise_hold_fraction must be >= 0")


@dataclass
class RvmState:
    """Precisions ``alpha`` (``inf`` once pruned) and the noise precision.

    ``mu``, ``sigma_diag`` and (when the active set has at most M columns)
    ``Sigma`` describe the posterior for the current ``alpha``; ``log_ml`` is
    the log marginal likelihood at that ``alpha``.
    """

    alpha: np.ndarray
    alpha0: float
    prune_threshold: float = 1e12
    active: np.ndarray = None
    Sigma: np.ndarray = None
    sigma_diag: np.ndarray = None
    mu: np.ndarray = None
    log_ml: float = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.active is None:
            self.active = np.flatnonzero(self.alpha <= self.prune_threshold)


def _rvm_posterior(phi, y, alpha, alpha0, active):
    """Posterior moments and log marginal likelihood over ``active``."""
    m = phi.shape[0]
    Phi_A = phi[:, active]
    a = alpha[active]
    k = len(active)
    if k == 0:
        log_det_c = -m * math.log(alpha0)
        quad = alpha0 * float(y @ y)
        mu = np.zeros(0)
        return None, np.zeros(0), mu, -0.5 * (m * math.log(2 * math.pi) + log_det_c + quad)
    if k <= m:
        precision = alpha0 * (Phi_A.T @ Phi_A)
        precision[np.diag_indices_from(precision)] += a
        chol = sla.cholesky(precision, lower=True, check_finite=False)
        Sigma = sla.cho_solve((chol, True), np.eye(k), check_finite=False)
        Sigma = 0.5 * (Sigma + Sigma.T)
        mu = alpha0 * (Sigma @ (Phi_A.T @ y))
        sigma_diag = np.diag(Sigma).copy()
        residual = y - Phi_A @ mu
        log_det_c = -m * math.log(alpha0) - np.log(a).sum() + 2 * np.log(np.diag(chol)).sum()
        quad = alpha0 * float(residual @ residual) + float(a @ (mu * mu))
    else:
        # Woodbury form: factor C = I/alpha0 + Phi_A diag(1/a) Phi_A^T (M x M)
        scaled = Phi_A / a
        C = scaled @ Phi_A.T
        C[np.diag_indices_from(C)] += 1.0 / alpha0
        chol = sla.cholesky(C, lower=True, check_finite=False)
        Cinv_y = sla.cho_solve((chol, True), y, check_finite=False)
        Cinv_Phi = sla.cho_solve((chol, True), Phi_A, check_finite=False)
        mu = (Phi_A.T @ Cinv_y) / a
        sigma_diag = 1.0 / a - np.einsum("ij,ij->j", Phi_A, Cinv_Phi) / (a * a)
        Sigma = None
        log_det_c = 2 * np.log(np.diag(chol)).sum()
        quad = float(y @ Cinv_y)
    log_ml = -0.5 * (m * math.log(2 * math.pi) + log_det_c + quad)
    return Sigma, sigma_diag, mu, log_ml


def rvm_log_marginal_likelihood(alpha, alpha0, phi, y, prune_threshold=1e12):
    """``-(M log 2pi + log|C| + y^T C^-1 y) / 2`` with ``C = I/alpha0 + Phi A^-1 Phi^T``."""
    phi = as_sensing(phi)
    alpha = np.asarray(alpha, dtype=float)
    active = np.flatnonzero(alpha <= prune_threshold)
    return _rvm_posterior(phi, np.asarray(y, dtype=float), alpha, alpha0, active)[3]


def rvm_update(state, phi, y, alpha0_max=1e12, update_alpha0=True):
    """One re-estimation sweep; returns a new :class:`RvmState`.

    Computes the posterior for the current precisions, then sets
    ``gamma_i = 1 - alpha_i Sigma_ii``, ``alpha_i <- gamma_i / mu_i^2`` and
    ``1/alpha0 <- ||y - Phi_A mu||^2 / (M - sum(gamma))``.  Columns whose new
    precision exceeds ``prune_threshold`` are dropped.  When
    ``M - sum(gamma) <= 0`` the noise precision is left unchanged and
    ``flags["alpha0_held"]`` is set.  ``update_alpha0=False`` keeps it fixed
    without setting the flag.
    """
    phi = as_sensing(phi)
    y = np.asarray(y, dtype=float)
    m = phi.shape[0]
    active = state.active
    Sigma, sigma_diag, mu, log_ml = _rvm_posterior(phi, y, state.alpha, state.alpha0, active)

    alpha_new = np.full_like(state.alpha, np.inf)
    flags = {"alpha0_held": False}
    alpha0 = state.alpha0
    if len(active):
        gamma = 1.0 - state.alpha[active] * sigma_diag
        with np.errstate(divide="ignore"):
            alpha_new[active] = np.where(mu != 0, gamma / (mu * mu), np.inf)
        residual = y - phi[:, active] @ mu
        denom = m - gamma.sum()
    else:
        gamma = np.zeros(0)
        residual = y
        denom = float(m)
    energy = float(residual @ residual)
    if update_alpha0:
        if denom > 0:
            alpha0 = alpha0_max if energy <= denom / alpha0_max else denom / energy
        else:
            flags["alpha0_held"] = True
    alpha_new[alpha_new > state.prune_threshold] = np.inf
    new_active = np.flatnonzero(alpha_new <= state.prune_threshold)
    return RvmState(
        alpha=alpha_new,
        alpha0=float(alpha0),
        prune_threshold=state.prune_threshold,
        active=new_active,
        Sigma=Sigma,
        sigma_diag=sigma_diag,
        mu=mu,
        log_ml=log_ml,
        flags=dict(flags, previous_active=active, gamma=gamma),
    )


def solve_rvm(y, phi, cfg=None, callback=None):
    """Relevance vector machine by iterated re-estimation of the precisions.

    Starts from ``alpha_i = 1`` and ``alpha0 = 100 / var(y)``; stops when the
    largest relative change of a surviving precision is below ``cfg.tol`` and
    no column was pruned.

    While more than ``noise_hold_fraction * M`` columns are active the model
    can absorb the noise completely, and re-estimating ``alpha0`` there sends
    it towards ``alpha0_max``, after which nothing is ever pruned.  The noise
    precision is therefore only re-estimated once the active set has shrunk.
    """
    phi = as_sensing(phi)
    y = check_measurements(y, phi)
    cfg = cfg or RvmConfig()
    m, n = phi.shape

    var_y = float(np.var(y))
    if not np.any(y):
        return RecoveryResult(x_hat=np.zeros(n), iterations=0, converged=True,
                              diagnostics={"active": [], "log_marginal_likelihood": None})
    alpha0 = min(cfg.alpha0_max, 100.0 / var_y) if var_y > 0 else cfg.alpha0_max
    state = RvmState(alpha=np.ones(n), alpha0=alpha0, prune_threshold=cfg.prune_threshold)

    converged = False
    held = 0
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        frac = cfg.noise_hold_fraction
        free = frac is None or len(state.active) <= frac * m
        new = rvm_update(state, phi, y, cfg.alpha0_max, update_alpha0=free)
        held += new.flags["alpha0_held"]
        if callback is not None:
            callback(iterations, new)
        survivors = new.active
        pruned = len(survivors) < len(state.active)
        if len(survivors):
            rel = np.abs(new.alpha[survivors] - state.alpha[survivors]) / state.alpha[survivors]
            small = rel.max() <= cfg.tol
        else:
            small = True
        state = new
        if small and not pruned:
            converged = True
            break

    Sigma, sigma_diag, mu, log_ml = _rvm_posterior(phi, y, state.alpha, state.alpha0, state.active)
    x = np.zeros(n)
    x[state.active] = mu
    return RecoveryResult(
        x_hat=x,
        iterations=iterations,
        converged=converged,
        diagnostics={
            "active": state.active.tolist(),
            "alpha0": state.alpha0,
            "log_marginal_likelihood": log_ml,
            "alpha0_held": held,
            "residual_norm": float(np.linalg.norm(y - phi @ x)),
        },
    )

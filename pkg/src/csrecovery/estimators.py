"""scikit-learn style wrappers around the solvers.

``fit(phi, y)`` treats the sensing matrix as the design matrix and the
measurements as the target, and stores the recovered sparse vector in
``coef_``, the same convention as :class:`sklearn.linear_model.OrthogonalMatchingPursuit`.
"""

import time

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .solvers import (
    BpConfig,
    FastLaplaceConfig,
    GradesConfig,
    IhtConfig,
    OmpConfig,
    RvmConfig,
    solve_basis_pursuit,
    solve_fast_laplace,
    solve_grades,
    solve_iht,
    solve_omp,
    solve_rvm,
)


class _SparseRecoveryRegressor(RegressorMixin, BaseEstimator):
    """Shared fit/predict plumbing; subclasses implement ``_solve``."""

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, ensure_min_samples=1)
        start = time.perf_counter()
        result = self._solve(np.asarray(X, dtype=float), np.asarray(y, dtype=float))
        self.fit_time_ = time.perf_counter() - start
        self.coef_ = result.x_hat
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.diagnostics_ = result.diagnostics
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_


class BasisPursuit(_SparseRecoveryRegressor):
    """Minimum-l1 solution of ``X coef = y`` by a primal-dual interior-point LP."""

    def __init__(self, tol=1e-8, max_iter=100):
        self.tol = tol
        self.max_iter = max_iter

    def _solve(self, X, y):
        cfg = BpConfig(tol_gap=self.tol, tol_pinf=self.tol, tol_dinf=self.tol, max_iter=self.max_iter)
        return solve_basis_pursuit(y, X, cfg)


class GraDeS(_SparseRecoveryRegressor):
    def __init__(self, n_nonzero_coefs=1, gamma=4.0 / 3.0, max_iter=500, tol=1e-7,
                 scale_to_columns=True):
        self.n_nonzero_coefs = n_nonzero_coefs
        self.gamma = gamma
        self.max_iter = max_iter
        self.tol = tol
        self.scale_to_columns = scale_to_columns

    def _solve(self, X, y):
        cfg = GradesConfig(gamma=self.gamma, max_iter=self.max_iter, tol_residual=self.tol,
                           scale_to_columns=self.scale_to_columns)
        return solve_grades(y, X, self.n_nonzero_coefs, cfg)


class OrthogonalMatchingPursuit(_SparseRecoveryRegressor):
    """Greedy pursuit; ``n_nonzero_coefs=None`` allows up to half the samples."""

    def __init__(self, n_nonzero_coefs=None, tol=1e-6):
        self.n_nonzero_coefs = n_nonzero_coefs
        self.tol = tol

    def _solve(self, X, y):
        return solve_omp(y, X, OmpConfig(max_atoms=self.n_nonzero_coefs, tol_residual=self.tol))


class IterativeHardThresholding(_SparseRecoveryRegressor):
    def __init__(self, n_nonzero_coefs=1, step_mode="normalized", max_iter=1000, tol=1e-7):
        self.n_nonzero_coefs = n_nonzero_coefs
        self.step_mode = step_mode
        self.max_iter = max_iter
        self.tol = tol

    def _solve(self, X, y):
        cfg = IhtConfig(max_iter=self.max_iter, tol=self.tol, step_mode=self.step_mode)
        return solve_iht(y, X, self.n_nonzero_coefs, cfg)


class FastLaplace(_SparseRecoveryRegressor):
    """Sequential sparse Bayesian learning with a Laplace prior."""

    def __init__(self, max_iter=1000, tol=1e-8):
        self.max_iter = max_iter
        self.tol = tol

    def _solve(self, X, y):
        return solve_fast_laplace(y, X, FastLaplaceConfig(max_iter=self.max_iter, tol=self.tol))


class RelevanceVectorMachine(_SparseRecoveryRegressor):
    def __init__(self, max_iter=300, tol=1e-6, prune_threshold=1e12):
        self.max_iter = max_iter
        self.tol = tol
        self.prune_threshold = prune_threshold

    def _solve(self, X, y):
        cfg = RvmConfig(max_iter=self.max_iter, tol=self.tol, prune_threshold=self.prune_threshold)
        return solve_rvm(y, X, cfg)

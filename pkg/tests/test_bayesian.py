import math

import numpy as np
import pytest
from scipy.optimize import brentq

from csrecovery.exceptions import ContractViolation
from csrecovery.linalg import digamma
from csrecovery.metrics import recovery_error
from csrecovery.problem import make_instance
from csrecovery.solvers.bayesian import (
    FastLaplaceConfig,
    FastLaplaceState,
    RvmConfig,
    RvmState,
    fl_beta_update,
    fl_compute_sq,
    fl_gamma_update,
    fl_lambda_update,
    fl_objective,
    fl_theta_update,
    rvm_update,
    solve_fast_laplace,
    solve_rvm,
)
from csrecovery.solvers.greedy import restricted_least_squares


def _numeric_argmax(s, q, lam):
    # maximise h by locating the sign change of h' on a log grid, then
    # bisection-safeguarded refinement; never touches the quadratic
    def dh(g):
        t = 1.0 + g * s
        return 0.5 * (-s / t + q * q / (t * t) - lam)

    grid = np.geomspace(1e-14, 1e6, 2001)
    vals = dh(grid)
    j = int(np.flatnonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0])
    return brentq(dh, grid[j], grid[j + 1], xtol=1e-300, rtol=1e-15)


def _sq_oracle(phi, y, gamma, active, beta):
    # direct leave-one-out covariance C_{-i} = I/beta + sum_{j != i} gamma_j phi_j phi_j^T
    m, n = phi.shape
    s = np.empty(n)
    q = np.empty(n)
    for i in range(n):
        C = np.eye(m) / beta
        for j in active:
            if j != i:
                C += gamma[j] * np.outer(phi[:, j], phi[:, j])
        s[i] = phi[:, i] @ np.linalg.solve(C, phi[:, i])
        q[i] = phi[:, i] @ np.linalg.solve(C, y)
    return s, q


class TestGammaUpdate:
    def test_examples(self):
        assert fl_gamma_update(1.0, 1.0, 0.5) == 0.0
        assert fl_gamma_update(1.0, 2.0, 0.0) == pytest.approx(3.0, rel=1e-14)
        assert fl_gamma_update(1.0, 2.0, 1.0) == pytest.approx((-3 + math.sqrt(17)) / 2, rel=1e-12)

    def test_contracts(self):
        with pytest.raises(ContractViolation):
            fl_gamma_update(0.0, 1.0, 0.0)
        with pytest.raises(ContractViolation):
            fl_gamma_update(1.0, 1.0, -1.0)

    def test_sign_law(self):
        rng = np.random.default_rng(11)
        s = rng.uniform(1e-3, 10, 1000)
        q = rng.normal(0, 4, 1000)
        lam = rng.uniform(0, 5, 1000)
        g = fl_gamma_update(s, q, lam)
        assert np.array_equal(g > 0, q * q - s > lam)

    def test_vs_numeric_maximization(self):
        rng = np.random.default_rng(12)
        count = 0
        while count < 1000:
            s = rng.uniform(1e-2, 10)
            lam = rng.uniform(0, 5)
            q2 = s + lam + rng.uniform(1e-2, 50)
            q = math.sqrt(q2) * rng.choice([-1, 1])
            g = fl_gamma_update(s, q, lam)
            g_ref = _numeric_argmax(s, q, lam)
            # the stationary point is a maximum of h
            assert fl_objective(g_ref, s, q, lam) >= fl_objective(g_ref * (1 + 1e-3), s, q, lam)
            assert abs(g - g_ref) <= 1e-6 * g_ref, (s, q, lam, g, g_ref)
            count += 1

    def test_lambda_zero_limit(self):
        s, q = 2.0, 3.0
        assert fl_gamma_update(s, q, 1e-10) == pytest.approx(fl_gamma_update(s, q, 0.0), rel=1e-8)


class TestScalarUpdates:
    def test_lambda_examples(self):
        assert fl_lambda_update(np.zeros(5), 2.0, n=11) == pytest.approx(11.0)
        assert fl_lambda_update(np.array([1e15]), 2.0, n=11) < 1e-13
        assert fl_lambda_update(np.array([4.0]), 2.0, n=1) == pytest.approx(1 / 3)
        assert fl_lambda_update(np.zeros(11), 2.0) == pytest.approx(11.0)

    def test_beta_examples(self):
        assert fl_beta_update(0.0, 0.0, 10, 0.0, 0.0) == 1e12
        assert fl_beta_update(2.0, 0.0, 10, 0.0, 0.0) == pytest.approx(5.0)
        assert fl_beta_update(2.0, 0.0, 10, 1.0, 1e9) == pytest.approx(6.0 / (1e9 + 1), rel=1e-6)

    def test_theta_root_where_sign_change(self):
        for lam in (0.01, 0.1, 0.2, 5.0, 20.0):
            theta, found = fl_theta_update(lam, 2.0)
            assert found
            residual = math.log(theta) + 1 - digamma(theta / 2) + math.log(lam) - lam
            assert abs(residual) <= 1e-8

    def test_theta_continuous(self):
        a, _ = fl_theta_update(0.5, 2.0)
        b, _ = fl_theta_update(0.5 + 1e-6, 2.0)
        assert abs(a - b) <= 1e-3 * a

    def test_theta_fallback_at_unit_lambda(self):
        # log t + 1 - psi(t/2) stays above 1.69 for t > 0: no root exists
        theta, found = fl_theta_update(1.0, 7.5)
        assert (theta, found) == (7.5, False)

    def test_theta_contract(self):
        with pytest.raises(ContractViolation):
            fl_theta_update(0.0, 1.0)


class TestComputeSq:
    def test_empty_active_unit_beta(self):
        phi = np.array([[1.0, 0.0], [0.0, 1.0]])
        st = FastLaplaceState.initial(2, beta=1.0)
        s, q, _ = fl_compute_sq(st, phi, np.array([0.7, 0.0]))
        assert s[0] == pytest.approx(1.0) and q[0] == pytest.approx(0.7)

    def test_empty_active_beta4(self):
        st = FastLaplaceState.initial(3, beta=4.0)
        s, _, _ = fl_compute_sq(st, np.eye(3), np.ones(3))
        assert np.allclose(s, 4.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_vs_direct_leave_one_out(self, seed):
        rng = np.random.default_rng(seed)
        phi = rng.standard_normal((12, 20))
        y = rng.standard_normal(12)
        active = [2, 5, 11, 17]
        gamma = np.zeros(20)
        gamma[active] = rng.uniform(0.1, 2.0, 4)
        beta = 3.0
        Pa = phi[:, active]
        Sigma = np.linalg.inv(beta * Pa.T @ Pa + np.diag(1 / gamma[active]))
        mu = beta * Sigma @ Pa.T @ y
        st = FastLaplaceState(gamma=gamma, lam=0.0, beta=beta, theta=2.0,
                              active=active, Sigma=Sigma, mu=mu)
        s, q, skipped = fl_compute_sq(st, phi, y)
        s_ref, q_ref = _sq_oracle(phi, y, gamma, active, beta)
        assert not skipped.any()
        assert np.allclose(s, s_ref, rtol=1e-9)
        assert np.allclose(q, q_ref, rtol=1e-9, atol=1e-12)
        s2, q2, _ = fl_compute_sq(st, phi, y)
        assert np.array_equal(s, s2) and np.array_equal(q, q2)


class TestFastLaplace:
    def test_zero_input(self):
        res = solve_fast_laplace(np.zeros(8), np.eye(8))
        assert not np.any(res.x_hat) and res.diagnostics["active"] == []

    def test_single_spike_identity(self):
        y = np.zeros(8)
        y[3] = 5.0
        res = solve_fast_laplace(y, np.eye(8))
        assert res.diagnostics["active"] == [3]
        assert abs(res.x_hat[3] - 5.0) <= 1e-3

    def test_sigma_spd_and_hard_zeros(self):
        inst = make_instance(128, 48, 6, 0.01, seed=1, normalize=False, amplitude_model="gaussian")

        def check(it, state):
            if state.active:
                np.linalg.cholesky(state.Sigma)
                assert np.allclose(state.Sigma, state.Sigma.T)
            assert np.all((state.gamma > 0) == np.isin(np.arange(128), state.active))

        res = solve_fast_laplace(inst.y, inst.matrix.entries, FastLaplaceConfig(max_iter=200),
                                 callback=check)
        off = np.setdiff1d(np.arange(128), res.diagnostics["active"])
        assert np.all(res.x_hat[off] == 0.0)

    def test_incremental_posterior_matches_direct(self):
        inst = make_instance(128, 48, 6, 0.01, seed=4, normalize=False, amplitude_model="gaussian")
        phi, y = inst.matrix.entries, inst.y
        worst = []

        def check(it, state):
            if state.active:
                Pa = phi[:, state.active]
                prec = state.beta * Pa.T @ Pa + np.diag(1 / state.gamma[state.active])
                Sigma = np.linalg.inv(prec)
                mu = state.beta * Sigma @ Pa.T @ y
                worst.append(max(np.abs(state.Sigma - Sigma).max() / np.abs(Sigma).max(),
                                 np.abs(state.mu - mu).max() / np.abs(mu).max()))

        solve_fast_laplace(y, phi, FastLaplaceConfig(max_iter=300), callback=check)
        assert max(worst) <= 1e-8

    def test_lambda_zero_reduces_to_marginal_likelihood_rule(self):
        inst = make_instance(96, 40, 5, 0.01, seed=2, normalize=False, amplitude_model="gaussian")
        cfg = FastLaplaceConfig(update_lambda=False, update_theta=False, max_iter=150)
        prev = {"gamma": np.zeros(96)}

        def check(it, state):
            assert state.lam == 0.0
            changed = np.flatnonzero(state.gamma != prev["gamma"])
            assert changed.size == 1
            i = changed[0]
            # an index is in the model iff q_i^2 > s_i
            assert (state.gamma[i] > 0) == (state.q_all[i] ** 2 > state.s_all[i])
            prev["gamma"] = state.gamma.copy()

        solve_fast_laplace(inst.y, inst.matrix.entries, cfg, callback=check)

    def test_matches_least_squares_on_support_noiseless(self):
        inst = make_instance(128, 64, 6, 0.0, seed=5, normalize=False, amplitude_model="gaussian")
        phi = inst.matrix.entries
        res = solve_fast_laplace(inst.y, phi)
        ref = restricted_least_squares(phi, list(inst.signal.support), inst.y)
        assert recovery_error(ref, res.x_hat) <= 1e-3


class TestRvm:
    def test_scalar_update(self):
        st = RvmState(alpha=np.array([1.0]), alpha0=1.0)
        new = rvm_update(st, np.array([[1.0]]), np.array([2.0]))
        assert new.sigma_diag[0] == pytest.approx(0.5)
        assert new.mu[0] == pytest.approx(1.0)
        assert new.flags["gamma"][0] == pytest.approx(0.5)
        assert new.alpha[0] == pytest.approx(0.5)

    def test_noiseless_limit(self):
        rng = np.random.default_rng(3)
        phi = rng.standard_normal((5, 5))
        y = rng.standard_normal(5)
        st = RvmState(alpha=np.full(5, 1e-9), alpha0=1e12)
        new = rvm_update(st, phi, y)
        assert np.allclose(new.mu, np.linalg.solve(phi, y), rtol=1e-5)

    def test_pruning(self):
        st = RvmState(alpha=np.array([1.0, 1e13]), alpha0=1.0)
        assert list(st.active) == [0]

    def test_alpha0_held_when_denominator_nonpositive(self):
        # vanishing precisions make every gamma exactly 1, so M - sum(gamma) = 0
        st = RvmState(alpha=np.full(2, 1e-300), alpha0=5.0)
        new = rvm_update(st, np.eye(2), np.array([1.0, 2.0]))
        assert new.flags["alpha0_held"]
        assert new.alpha0 == 5.0

    def test_zero_input(self):
        res = solve_rvm(np.zeros(4), np.eye(4))
        assert not np.any(res.x_hat)

    def test_identity_spike(self):
        res = solve_rvm(np.array([0.0, 0.0, 3.0, 0.0]), np.eye(4))
        assert np.allclose(res.x_hat, [0, 0, 3, 0], atol=1e-3)

    def test_hard_zeros_off_support(self):
        inst = make_instance(128, 64, 6, 0.01, seed=8, normalize=False, amplitude_model="gaussian")
        res = solve_rvm(inst.y, inst.matrix.entries)
        off = np.setdiff1d(np.arange(128), res.diagnostics["active"])
        assert np.all(res.x_hat[off] == 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_log_marginal_likelihood_non_decreasing(self, seed):
        inst = make_instance(128, 64, 8, 0.01, seed=seed, normalize=False, amplitude_model="gaussian")
        trace = []
        solve_rvm(inst.y, inst.matrix.entries, RvmConfig(max_iter=100),
                  callback=lambda it, st: trace.append(st.log_ml))
        drops = [b - a for a, b in zip(trace, trace[1:]) if b < a - 1e-8 * max(1.0, abs(a))]
        assert not drops, f"{len(drops)} decreasing sweeps, worst {min(drops):.3g}"

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import ZeroRng, make_config, random_spd
from slmc import (
    ChainState,
    InitSpec,
    InvalidInput,
    NumericalBlowup,
    SymMatrix,
    TargetModel,
    coupled_pair_run,
    kernel_moments,
    make_gaussian,
    make_step_cache,
    run_chain,
    scaled_params,
    spd_exp,
    step,
    unscaled_config,
    estimate_theta,
)


def scalar_moments(a, gamma, u, delta, x, v, g):
    """Independent 1-D closed forms for cross-checking the matrix assembly."""
    s = gamma * a * delta
    e1, e2 = math.exp(-s), math.exp(-2.0 * s)
    mean_v = e1 * v - (u / (gamma * a)) * (1.0 - e1) * g
    mean_x = (
        x
        + (1.0 - e1) / (gamma * a) * v
        - (u / (gamma * a)) * (delta - (1.0 - e1) / (gamma * a)) * g
    )
    cov_vv = u * (1.0 - e2)
    cov_xv = (u / (gamma * a)) * (1.0 + e2 - 2.0 * e1)
    cov_xx = (2.0 * u / (gamma * a)) * (
        delta - e2 / (2.0 * gamma * a) + 2.0 * e1 / (gamma * a) - 1.5 / (gamma * a)
    )
    return mean_x, mean_v, cov_xx, cov_vv, cov_xv


class TestKernelMoments:
    def test_scalar_case_decaying_velocity(self):
        config = make_config(SymMatrix([[2.0]]))
        mom = kernel_moments(
            ChainState(x=np.zeros(1), v=np.ones(1)), np.zeros(1), config, 0.5
        )
        assert mom.mean_v[0] == pytest.approx(math.exp(-1.0), rel=1e-12)
        assert mom.mean_x[0] == pytest.approx(0.5 * (1.0 - math.exp(-1.0)), rel=1e-12)
        assert mom.cov_vv.mat[0, 0] == pytest.approx(1.0 - math.exp(-2.0), rel=1e-12)

    def test_scalar_case_gradient_pull(self):
        config = make_config(SymMatrix([[1.0]]))
        mom = kernel_moments(
            ChainState(x=np.zeros(1), v=np.zeros(1)), np.ones(1), config, 1.0
        )
        assert mom.mean_v[0] == pytest.approx(-(1.0 - math.exp(-1.0)), rel=1e-12)
        assert mom.mean_x[0] == pytest.approx(-math.exp(-1.0), rel=1e-12)

    def test_no_time_limit(self):
        rng = np.random.default_rng(2)
        config = make_config(random_spd(rng, 3), u=1.7)
        state = ChainState(x=rng.standard_normal(3), v=rng.standard_normal(3))
        g = rng.standard_normal(3)
        mom = kernel_moments(state, g, config, 1e-12)
        assert np.allclose(mom.mean_x, state.x, atol=1e-9)
        assert np.allclose(mom.mean_v, state.v, atol=1e-9)
        for block in (mom.cov_xx.mat, mom.cov_vv.mat, mom.cov_xv):
            assert np.max(np.abs(block)) < 1e-9

    def test_matches_scalar_closed_forms_per_mode(self):
        rng = np.random.default_rng(5)
        a = random_spd(rng, 3, lo=0.5, hi=6.0)
        gamma, u, delta = 1.3, 0.8, 0.4
        config = make_config(a, u=u, gamma=gamma)
        state = ChainState(x=rng.standard_normal(3), v=rng.standard_normal(3))
        g = rng.standard_normal(3)
        mom = kernel_moments(state, g, config, delta)
        # rotate everything into the eigenbasis and compare mode by mode
        values, vectors = np.linalg.eigh(a.mat)
        xr, vr, gr = vectors.T @ state.x, vectors.T @ state.v, vectors.T @ g
        for i, eig in enumerate(values):
            mx, mv, cxx, cvv, cxv = scalar_moments(eig, gamma, u, delta, xr[i], vr[i], gr[i])
            assert vectors[:, i] @ mom.mean_x == pytest.approx(mx, rel=1e-10, abs=1e-12)
            assert vectors[:, i] @ mom.mean_v == pytest.approx(mv, rel=1e-10, abs=1e-12)
            assert vectors[:, i] @ mom.cov_xx.mat @ vectors[:, i] == pytest.approx(cxx, rel=1e-9)
            assert vectors[:, i] @ mom.cov_vv.mat @ vectors[:, i] == pytest.approx(cvv, rel=1e-9)
            assert vectors[:, i] @ mom.cov_xv @ vectors[:, i] == pytest.approx(cxv, rel=1e-9)

    def test_unscaled_specialization_at_identity(self):
        target = make_gaussian(np.zeros(2), SymMatrix(np.diag([1.0, 5.0])))
        config = unscaled_config(target)
        state = ChainState(x=np.array([0.4, -0.2]), v=np.array([1.0, 0.5]))
        g = target.grad_oracle(state.x)
        mom = kernel_moments(state, g, config, 0.3)
        for i in range(2):
            mx, mv, cxx, cvv, cxv = scalar_moments(
                1.0, config.gamma, config.u, 0.3, state.x[i], state.v[i], g[i]
            )
            assert mom.mean_x[i] == pytest.approx(mx, rel=1e-12)
            assert mom.mean_v[i] == pytest.approx(mv, rel=1e-12)
            assert mom.cov_xx.mat[i, i] == pytest.approx(cxx, rel=1e-9)
            assert mom.cov_vv.mat[i, i] == pytest.approx(cvv, rel=1e-9)
            assert mom.cov_xv[i, i] == pytest.approx(cxv, rel=1e-9)

    def test_cross_covariance_symmetric(self):
        rng = np.random.default_rng(11)
        config = make_config(random_spd(rng, 4), u=2.2, gamma=0.7)
        state = ChainState(x=rng.standard_normal(4), v=rng.standard_normal(4))
        mom = kernel_moments(state, rng.standard_normal(4), config, 0.25)
        assert np.allclose(mom.cov_xv, mom.cov_xv.T, atol=1e-12)

    def test_joint_covariance_psd(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            config = make_config(random_spd(rng, 3, lo=1.0, hi=30.0), u=1.5)
            state = ChainState(x=np.zeros(3), v=np.zeros(3))
            mom = kernel_moments(state, np.zeros(3), config, float(rng.uniform(0.01, 0.5)))
            eigs = np.linalg.eigvalsh(mom.joint_cov().mat)
            assert eigs[0] >= -1e-12 * max(1.0, eigs[-1])

    def test_zero_gradient_semigroup(self):
        # with g = 0 two steps of delta match one step of 2*delta in law
        rng = np.random.default_rng(17)
        a = random_spd(rng, 3, lo=0.8, hi=8.0)
        config = make_config(a, u=1.4, gamma=1.1)
        delta = 0.3
        c1 = make_step_cache(config, delta)
        c2 = make_step_cache(config, 2.0 * delta)
        d = 3
        zeros = np.zeros(d)
        # mean map of one step as a 2d x 2d matrix
        joint = np.zeros((2 * d, 2 * d))
        joint[:d, :d] = np.eye(d)
        joint[:d, d:] = c1.coeffs.mx_v
        joint[d:, d:] = c1.coeffs.mv_v
        sigma1 = c1.joint_cov.mat
        sigma_two_steps = joint @ sigma1 @ joint.T + sigma1
        assert np.allclose(sigma_two_steps, c2.joint_cov.mat, atol=1e-10)
        # means compose as well
        state = ChainState(x=rng.standard_normal(3), v=rng.standard_normal(3))
        m1x, m1v = c1.coeffs.means(state.x, state.v, zeros)
        m2x, m2v = c1.coeffs.means(m1x, m1v, zeros)
        ex, ev = c2.coeffs.means(state.x, state.v, zeros)
        assert np.allclose(np.concatenate([m2x, m2v]), np.concatenate([ex, ev]), atol=1e-12)

    def test_nonpositive_delta_rejected(self):
        config = make_config(SymMatrix(np.eye(2)))
        state = ChainState(x=np.zeros(2), v=np.zeros(2))
        with pytest.raises(InvalidInput):
            kernel_moments(state, np.zeros(2), config, 0.0)


class TestStepCache:
    def test_zero_delta_rejected(self):
        with pytest.raises(InvalidInput):
            make_step_cache(make_config(SymMatrix(np.eye(2))), 0.0)

    def test_diagonal_exponential(self):
        cache = make_step_cache(make_config(SymMatrix(2.0 * np.eye(2))), 0.5)
        assert np.allclose(cache.exp_gA.mat, math.exp(-1.0) * np.eye(2), rtol=1e-12)

    def test_consistent_with_spd_reconstructions(self):
        rng = np.random.default_rng(23)
        a = random_spd(rng, 3, lo=0.5, hi=12.0)
        config = make_config(a, u=1.2, gamma=0.9)
        cache = make_step_cache(config, 0.2)
        assert np.allclose(cache.exp_gA.mat, spd_exp(a, -0.9 * 0.2).mat, atol=1e-9)
        assert np.allclose(cache.exp_2gA.mat, spd_exp(a, -2.0 * 0.9 * 0.2).mat, atol=1e-9)
        assert np.allclose(cache.A_inv.mat @ a.mat, np.eye(3), atol=1e-9)
        assert np.allclose(cache.gA_inv.mat @ (0.9 * a.mat), np.eye(3), atol=1e-9)

    def test_joint_psd_random(self):
        rng = np.random.default_rng(29)
        a = random_spd(rng, 4, lo=2.0, hi=50.0)
        cache = make_step_cache(make_config(a, u=2.0), 0.05)
        eigs = np.linalg.eigvalsh(cache.joint_cov.mat)
        assert eigs[0] >= -1e-12 * eigs[-1]


class TestStep:
    def test_zero_noise_returns_means(self):
        target = make_gaussian(np.zeros(2), SymMatrix(np.diag([1.0, 4.0])))
        config = scaled_params(target, estimate_theta(target, [np.zeros(2)], [np.zeros(2)]))
        cache = make_step_cache(config, 0.1)
        state = ChainState(x=np.array([0.5, -1.0]), v=np.array([0.2, 0.3]))
        out = step(state, target, cache, ZeroRng())
        mom = kernel_moments(state, target.grad_oracle(state.x), config, 0.1)
        assert np.array_equal(out.x, mom.mean_x)
        assert np.array_equal(out.v, mom.mean_v)

    def test_one_step_monte_carlo_moments(self):
        target = make_gaussian(np.zeros(2), SymMatrix(np.diag([1.0, 4.0])))
        config = scaled_params(target, estimate_theta(target, [np.zeros(2)], [np.zeros(2)]))
        cache = make_step_cache(config, 0.3)
        state = ChainState(x=np.array([1.0, -0.5]), v=np.array([0.0, 0.7]))
        rng = np.random.default_rng(101)
        n = 100_000
        outs = np.empty((n, 4))
        for i in range(n):
            nxt = step(state, target, cache, rng)
            outs[i, :2] = nxt.x
            outs[i, 2:] = nxt.v
        mom = kernel_moments(state, target.grad_oracle(state.x), config, 0.3)
        mean = mom.joint_mean()
        sigma = mom.joint_cov().mat
        z_mean = np.abs(outs.mean(axis=0) - mean) / np.sqrt(np.diag(sigma) / n)
        assert z_mean.max() < 5.0
        emp_cov = np.cov(outs, rowvar=False)
        se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma**2) / (n - 1))
        assert (np.abs(emp_cov - sigma) / se).max() < 5.0

    def test_exactly_one_gradient_call(self):
        target = make_gaussian(np.zeros(2), SymMatrix(np.eye(2)))
        calls = {"n": 0}
        counted = TargetModel(
            dim=2,
            name="counting",
            value_oracle=target.value_oracle,
            grad_oracle=lambda x: (calls.__setitem__("n", calls["n"] + 1), target.grad_oracle(x))[1],
            hess_oracle=target.hess_oracle,
            m=target.m,
            L=target.L,
            minimizer=target.minimizer,
            hess_constant=True,
        )
        config = unscaled_config(target)
        cache = make_step_cache(config, 0.1)
        calls["n"] = 0  # discard the minimizer-consistency call made on construction
        step(ChainState(x=np.ones(2), v=np.zeros(2)), counted, cache, np.random.default_rng(0))
        assert calls["n"] == 1


class TestRunChain:
    @pytest.fixture
    def setup(self):
        target = make_gaussian(np.zeros(2), SymMatrix(np.diag([1.0, 4.0])))
        config = scaled_params(target, estimate_theta(target, [np.zeros(2)], [np.zeros(2)]))
        init = InitSpec.from_point(target, np.array([2.0, 1.0]))
        return target, config, init

    def test_single_step_equals_step(self, setup):
        target, config, init = setup
        run = run_chain(init, target, config, 0.1, 1, np.random.default_rng(3))
        cache = make_step_cache(config, 0.1)
        expected = step(
            ChainState(x=init.x0, v=np.zeros(2)), target, cache, np.random.default_rng(3)
        )
        assert run.xs.shape == (1, 2)
        assert np.array_equal(run.xs[0], expected.x)
        assert np.array_equal(run.vs[0], expected.v)

    def test_fixed_seed_bit_identical(self, setup):
        target, config, init = setup
        a = run_chain(init, target, config, 0.05, 200, np.random.default_rng(9))
        b = run_chain(init, target, config, 0.05, 200, np.random.default_rng(9))
        assert np.array_equal(a.xs, b.xs)
        assert np.array_equal(a.vs, b.vs)

    def test_gradient_call_budget(self, setup):
        target, config, init = setup
        calls = {"n": 0}
        counted = TargetModel(
            dim=2,
            name="counting",
            value_oracle=target.value_oracle,
            grad_oracle=lambda x: (calls.__setitem__("n", calls["n"] + 1), target.grad_oracle(x))[1],
            hess_oracle=target.hess_oracle,
            m=target.m,
            L=target.L,
            minimizer=target.minimizer,
            hess_constant=True,
        )
        calls["n"] = 0  # discard the minimizer-consistency call made on construction
        run = run_chain(init, counted, config, 0.05, 137, np.random.default_rng(0))
        assert calls["n"] == 137
        assert run.grad_calls == 137

    def test_burn_in_and_thinning(self, setup):
        target, config, init = setup
        run = run_chain(
            init, target, config, 0.05, 100, np.random.default_rng(1), thin=10, burn_in=20
        )
        assert run.xs.shape == (8, 2)
        assert list(run.steps) == [30, 40, 50, 60, 70, 80, 90, 100]

    def test_stationary_covariance(self, setup):
        target, config, init = setup
        run = run_chain(init, target, config, 0.02, 80_000, np.random.default_rng(0), burn_in=8_000)
        cov = np.cov(run.xs, rowvar=False)
        expected = np.diag([1.0, 0.25])
        rel = np.linalg.norm(cov - expected) / np.linalg.norm(expected)
        assert rel < 0.15

    def test_velocity_stationarity(self):
        target = make_gaussian(np.zeros(4), SymMatrix(np.eye(4)))
        config = scaled_params(target, estimate_theta(target, [np.zeros(4)], [np.zeros(4)]))
        init = InitSpec.from_point(target)
        run = run_chain(init, target, config, 0.05, 30_000, np.random.default_rng(4), burn_in=3_000)
        ratio = (run.vs**2).sum(axis=1).mean() / (config.u * 4)
        assert 0.9 < ratio < 1.1

    def test_blowup_reports_step_index(self):
        target = make_gaussian(np.zeros(1), SymMatrix([[1e6]]))
        config = make_config(SymMatrix(np.eye(1)), u=1.0, gamma=0.1)
        init = InitSpec.from_point(target, np.array([1.0]))
        with pytest.raises(NumericalBlowup) as err:
            run_chain(init, target, config, 1.0, 500, np.random.default_rng(0))
        assert err.value.step_index is not None
        assert err.value.step_index >= 1

    def test_stationary_velocity_init_draws(self, setup):
        target, config, init = setup
        run = run_chain(
            init, target, config, 0.05, 1, np.random.default_rng(7),
            stationary_velocity_init=True,
        )
        base = run_chain(init, target, config, 0.05, 1, np.random.default_rng(7))
        assert not np.array_equal(run.vs, base.vs)


class TestCoupledPair:
    @pytest.fixture
    def setup(self):
        target = make_gaussian(np.zeros(2), SymMatrix(np.diag([1.0, 100.0])))
        config = scaled_params(target, estimate_theta(target, [np.zeros(2)], [np.zeros(2)]))
        return target, config

    def test_identical_inits_stay_equal(self, setup):
        target, config = setup
        init = InitSpec.from_point(target, np.array([1.0, 2.0]))
        rho = coupled_pair_run(init, init, target, config, 0.05, 50, np.random.default_rng(0))
        assert np.array_equal(rho, np.zeros(51))

    def test_contraction_slope(self, setup):
        target, config = setup
        init_a = InitSpec.from_point(target, np.array([3.0, 0.3]))
        init_b = InitSpec.from_point(target)
        rho = coupled_pair_run(init_a, init_b, target, config, 0.01, 2600, np.random.default_rng(1))
        mask = rho > 1e-20
        times = np.arange(rho.size)[mask] * 0.01
        slope = np.polyfit(times, np.log(rho[mask]), 1)[0]
        assert slope <= -(1.0 - 2.0 * config.theta)

    @given(c=st.floats(0.1, 10.0))
    @settings(max_examples=20, deadline=None)
    def test_initial_distance_scales_quadratically(self, c):
        target = make_gaussian(np.zeros(2), SymMatrix(np.diag([1.0, 4.0])))
        config = unscaled_config(target)
        offset = np.array([1.0, -0.5])
        base_a = InitSpec.from_point(target, offset)
        base_b = InitSpec.from_point(target, -offset)
        big_a = InitSpec.from_point(target, c * offset)
        big_b = InitSpec.from_point(target, -c * offset)
        rho_base = coupled_pair_run(base_a, base_b, target, config, 0.1, 1, np.random.default_rng(0))
        rho_big = coupled_pair_run(big_a, big_b, target, config, 0.1, 1, np.random.default_rng(0))
        assert rho_big[0] == pytest.approx(c * c * rho_base[0], rel=1e-9)

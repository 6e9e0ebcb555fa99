"""Kalman filter against dense joint-Gaussian oracles and the bootstrap
particle filter against the exact linear-Gaussian likelihood."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from tsmc.errors import InvalidConfig
from tsmc.filters import (
    BspfConfig,
    LinearGaussianSS,
    StateModel,
    bspf_loglik,
    kalman_loglik,
    multinomial_resample,
    stationary_init_cov,
)

A, SS, SY = 0.8, 0.5, 0.6  # AR coefficient, state shock sd, measurement sd


def ar1_model(a=A, state_sd=SS, meas_sd=SY, intercept=0.0):
    init_cov = stationary_init_cov([[a]], [[state_sd**2]])
    return LinearGaussianSS(
        transition=[[a]], shock_loading=[[1.0]], shock_cov=[[state_sd**2]],
        meas_loading=[[1.0]], meas_intercept=[intercept], meas_cov=[[meas_sd**2]],
        init_mean=[0.0], init_cov=init_cov,
    )


def simulate_ar1(n, rng, a=A, state_sd=SS, meas_sd=SY):
    s = rng.normal(0.0, state_sd / np.sqrt(1 - a**2))
    out = np.empty((n, 1))
    for t in range(n):
        s = a * s + state_sd * rng.standard_normal()
        out[t, 0] = s + meas_sd * rng.standard_normal()
    return out


def dense_joint_loglik(data, a=A, state_sd=SS, meas_sd=SY):
    """Oracle: assemble the full T x T joint covariance of the observations
    (stationary AR(1) state autocovariance plus measurement noise)."""
    t_len = data.shape[0]
    var_s = state_sd**2 / (1 - a**2)
    idx = np.arange(t_len)
    cov = var_s * a ** np.abs(idx[:, None] - idx[None, :]) + meas_sd**2 * np.eye(t_len)
    return multivariate_normal(mean=np.zeros(t_len), cov=cov).logpdf(data[:, 0])


class TestKalman:
    def test_measurement_noise_only(self, rng):
        # loading zero: observations are iid N(intercept, meas var)
        model = LinearGaussianSS(
            transition=[[0.9]], shock_loading=[[1.0]], shock_cov=[[1.0]],
            meas_loading=[[0.0]], meas_intercept=[1.3], meas_cov=[[0.49]],
            init_mean=[0.0], init_cov=[[1.0]],
        )
        data = rng.normal(size=(25, 1))
        total, per = kalman_loglik(model, data)
        expected = norm(1.3, 0.7).logpdf(data[:, 0])
        np.testing.assert_allclose(per, expected, atol=1e-12)
        assert total == pytest.approx(expected.sum())

    def test_white_noise_state_two_periods(self, rng):
        # transition 0: y_t iid N(0, state var + meas var); hand-computable
        model = LinearGaussianSS(
            transition=[[0.0]], shock_loading=[[1.0]], shock_cov=[[SS**2]],
            meas_loading=[[1.0]], meas_intercept=[0.0], meas_cov=[[SY**2]],
            init_mean=[0.0], init_cov=[[SS**2]],
        )
        data = np.array([[0.4], [-1.1]])
        total, _ = kalman_loglik(model, data)
        hand = norm(0, np.sqrt(SS**2 + SY**2)).logpdf(data[:, 0]).sum()
        assert total == pytest.approx(hand, abs=1e-10)

    def test_ar1_matches_dense_joint_oracle(self, rng):
        data = simulate_ar1(20, rng)
        total, _ = kalman_loglik(ar1_model(), data)
        assert total == pytest.approx(dense_joint_loglik(data), abs=1e-8)

    def test_per_period_sums_to_total(self, rng):
        data = simulate_ar1(40, rng)
        total, per = kalman_loglik(ar1_model(), data)
        assert total == pytest.approx(per.sum())
        assert per.shape == (40,)

    def test_multivariate_matches_dense_joint_oracle(self, rng):
        # 2-state VAR(1)-type state with two observables; the oracle builds
        # the full joint covariance from the stationary state autocovariance
        tt = np.array([[0.7, 0.2], [0.0, 0.5]])
        qq = np.array([[0.3, 0.1], [0.1, 0.4]])
        zz = np.array([[1.0, 0.5], [0.0, 1.0]])
        hh = np.diag([0.2, 0.3])
        dd = np.array([0.4, -0.1])
        p_inf = stationary_init_cov(tt, qq)
        model = LinearGaussianSS(
            transition=tt, shock_loading=np.eye(2), shock_cov=qq,
            meas_loading=zz, meas_intercept=dd, meas_cov=hh,
            init_mean=[0.0, 0.0], init_cov=p_inf,
        )
        t_len = 12
        data = rng.normal(size=(t_len, 2)) + dd

        # cov(s_i, s_j) = T^(i-j) P_inf for i >= j under the stationary init
        state_cov = np.zeros((2 * t_len, 2 * t_len))
        powers = [np.linalg.matrix_power(tt, k) for k in range(t_len + 1)]
        for i in range(t_len):
            for j in range(t_len):
                blk = powers[i - j] @ p_inf if i >= j else p_inf @ powers[j - i].T
                state_cov[2 * i:2 * i + 2, 2 * j:2 * j + 2] = blk
        big_z = np.kron(np.eye(t_len), zz)
        joint = big_z @ state_cov @ big_z.T + np.kron(np.eye(t_len), hh)
        oracle = multivariate_normal(
            mean=np.tile(dd, t_len), cov=joint).logpdf(data.flatten())

        total, _ = kalman_loglik(model, data)
        assert total == pytest.approx(oracle, abs=1e-8)

    def test_dimension_check(self, rng):
        with pytest.raises(InvalidConfig):
            kalman_loglik(ar1_model(), rng.normal(size=(10, 2)))

    def test_stationary_init_requires_stable(self):
        with pytest.raises(InvalidConfig):
            stationary_init_cov([[1.01]], [[1.0]])


def bspf_ar1_state_model(data, a=A, state_sd=SS, meas_sd=SY):
    resid = data[:, 0]
    log_norm = -0.5 * np.log(2 * np.pi * meas_sd**2)

    def init_sampler(rng, m):
        return rng.normal(0.0, state_sd / np.sqrt(1 - a**2), size=(m, 1))

    def transition(t, states, rng):
        return a * states + state_sd * rng.standard_normal(states.shape)

    def measurement_logpdf(t, states):
        return log_norm - 0.5 * (resid[t] - states[:, 0]) ** 2 / meas_sd**2

    return StateModel(init_sampler, transition, measurement_logpdf, n_state=1)


class TestBspf:
    def test_state_independent_measurement_is_exact(self, rng):
        # measurement density ignoring the state: the estimate equals the
        # product of marginal densities exactly, for any particle count
        data = rng.normal(size=(15, 1))
        marginal = norm(0.0, 2.0).logpdf(data[:, 0])

        model = StateModel(
            init_sampler=lambda g, m: g.normal(size=(m, 1)),
            transition=lambda t, s, g: 0.5 * s + g.normal(size=s.shape),
            measurement_logpdf=lambda t, s: np.full(s.shape[0], marginal[t]),
        )
        for m in (2, 7, 50):
            total, per = bspf_loglik(model, 15, BspfConfig(m), np.random.default_rng(0))
            assert total == pytest.approx(marginal.sum(), abs=1e-10)
            np.testing.assert_allclose(per, marginal, atol=1e-10)

    def test_reproducible_given_stream(self, rng):
        data = simulate_ar1(20, rng)
        model = bspf_ar1_state_model(data)
        r1, _ = bspf_loglik(model, 20, BspfConfig(200), np.random.default_rng(77))
        r2, _ = bspf_loglik(model, 20, BspfConfig(200), np.random.default_rng(77))
        assert r1 == r2

    def test_unbiased_against_kalman(self, rng):
        # mean of the likelihood-level ratio over replications within 3
        # standard errors of one, and log estimates centered on the truth
        data = simulate_ar1(30, rng)
        exact, _ = kalman_loglik(ar1_model(), data)
        model = bspf_ar1_state_model(data)
        reps = 80
        logs = np.array([
            bspf_loglik(model, 30, BspfConfig(400), np.random.default_rng(1000 + r))[0]
            for r in range(reps)
        ])
        ratios = np.exp(logs - exact)
        se = ratios.std(ddof=1) / np.sqrt(reps)
        assert abs(ratios.mean() - 1.0) < 3 * se
        assert abs(logs.mean() - exact) < 3 * logs.std(ddof=1)

    def test_variance_decreases_with_particles(self, rng):
        data = simulate_ar1(30, rng)
        model = bspf_ar1_state_model(data)

        def sd_for(m, reps=30):
            vals = [
                bspf_loglik(model, 30, BspfConfig(m), np.random.default_rng(5000 + r))[0]
                for r in range(reps)
            ]
            return np.std(vals, ddof=1)

        assert sd_for(1600) < sd_for(100)

    def test_all_weights_zero_returns_neg_inf(self):
        model = StateModel(
            init_sampler=lambda g, m: g.normal(size=(m, 1)),
            transition=lambda t, s, g: s,
            measurement_logpdf=lambda t, s: np.full(s.shape[0], -np.inf),
        )
        total, per = bspf_loglik(model, 5, BspfConfig(16), np.random.default_rng(1))
        assert total == -np.inf
        assert not np.any(np.isnan(per))

    def test_config_validation(self):
        with pytest.raises(InvalidConfig):
            BspfConfig(n_state_particles=1)
        with pytest.raises(InvalidConfig):
            BspfConfig(resampling="stratified")


class TestMultinomialResample:
    def test_equal_weights_frequencies(self):
        rng = np.random.default_rng(12)
        counts = np.zeros(4)
        reps = 100_000
        w = np.ones(4)
        for _ in range(reps // 100):
            for _ in range(100):
                idx = multinomial_resample(w, rng)
                counts += np.bincount(idx, minlength=4)
        total = reps * 4
        p = 0.25
        sd = np.sqrt(total * p * (1 - p))
        assert np.all(np.abs(counts - total * p) < 3 * sd)

    def test_degenerate_weight_vector(self, rng):
        w = np.array([4.0, 0.0, 0.0, 0.0])
        idx = multinomial_resample(w, rng)
        np.testing.assert_array_equal(idx, np.zeros(4, dtype=int))

    def test_three_quarters_frequency(self):
        rng = np.random.default_rng(3)
        w = np.array([0.5, 1.5])  # normalized probabilities {0.25, 0.75}
        hits = 0
        reps = 50_000
        for _ in range(reps):
            hits += int(np.sum(multinomial_resample(w, rng) == 1))
        total = reps * 2
        sd = np.sqrt(total * 0.75 * 0.25)
        assert abs(hits - 0.75 * total) < 3 * sd

    def test_systematic_has_smaller_count_variance(self):
        # both resamplers preserve expected counts; systematic conditional
        # variance is weakly smaller on a fixed weight vector
        from tsmc.engine import systematic_resample

        rng = np.random.default_rng(8)
        w = np.array([0.1, 0.4, 1.2, 0.8, 2.5])  # mean one
        reps = 20_000
        counts_m = np.zeros((reps, 5))
        counts_s = np.zeros((reps, 5))
        for r in range(reps):
            counts_m[r] = np.bincount(multinomial_resample(w, rng), minlength=5)
            counts_s[r] = np.bincount(systematic_resample(w, rng), minlength=5)
        np.testing.assert_allclose(counts_m.mean(0), w, atol=0.05)
        np.testing.assert_allclose(counts_s.mean(0), w, atol=0.05)
        assert np.all(counts_s.var(0) <= counts_m.var(0) + 0.02)

"""Linear-Gaussian state-space pair with exactly computable evidence.

Observation y_t = loc + s_t + eps_t with a latent AR(1) state s_t and a
N(0, 1) prior on the location parameter.  The pair's models share all
parameters; M1 inflates the measurement-noise variance by (1 + gap).  Because
the log-likelihood is an exact quadratic in the location, the marginal data
density -- and the evidence of any tempered likelihood power -- has a closed
form, making the pair the oracle for particle-filter and evidence tests.
"""

from __future__ import annotations

import numpy as np

from ..bridges import ModelSpec
from ..errors import InvalidConfig
from ..filters import (
    LinearGaussianSS,
    StateModel,
    BspfConfig,
    bspf_loglik,
    kalman_loglik,
    stationary_init_cov,
)
from ..transforms import ParamMeta

AR_COEF = 0.8
STATE_SD = 0.5
MEAS_SD = 0.5
PRIOR_SD = 1.0
NUISANCE_PRIOR_SD = 0.3


def _state_space(loc: float, meas_var: float) -> LinearGaussianSS:
    init_cov = stationary_init_cov(np.array([[AR_COEF]]), np.array([[STATE_SD**2]]))
    return LinearGaussianSS(
        transition=[[AR_COEF]],
        shock_loading=[[1.0]],
        shock_cov=[[STATE_SD**2]],
        meas_loading=[[1.0]],
        meas_intercept=[loc],
        meas_cov=[[meas_var]],
        init_mean=[0.0],
        init_cov=init_cov,
    )


def simulate_oracle_data(n_periods: int, rng: np.random.Generator,
                         loc: float = 0.3, gap: float = 0.0) -> np.ndarray:
    if n_periods < 1:
        raise InvalidConfig("n_periods must be positive")
    init_sd = STATE_SD / np.sqrt(1.0 - AR_COEF**2)
    s = rng.normal(0.0, init_sd)
    meas_sd = MEAS_SD * np.sqrt(1.0 + gap)
    data = np.empty((n_periods, 1))
    for t in range(n_periods):
        s = AR_COEF * s + STATE_SD * rng.standard_normal()
        data[t, 0] = loc + s + meas_sd * rng.standard_normal()
    return data


def _loglik(loc: float, meas_var: float, data: np.ndarray) -> float:
    total, _ = kalman_loglik(_state_space(loc, meas_var), data)
    return total


def _quadratic_fit(meas_var: float, data: np.ndarray):
    """The location log-likelihood is exactly quadratic; recover
    (curvature q, maximizer, value at the maximizer) from three evaluations."""
    l0 = _loglik(0.0, meas_var, data)
    l1 = _loglik(1.0, meas_var, data)
    lm = _loglik(-1.0, meas_var, data)
    q = -(l1 + lm - 2.0 * l0)
    peak = (l1 - lm) / (2.0 * q)
    c = l0 + 0.5 * q * peak**2
    return q, peak, c


def oracle_exact_tempered_evidence(data: np.ndarray, psi: float,
                                   gap: float = 0.0, m1_side: bool = False) -> float:
    """Closed-form log of the integral of L(loc)^psi against the N(0,1) prior.

    With log L(loc) = c - q/2 (loc - peak)^2 the powered likelihood is again
    Gaussian-shaped, so the integral reduces to a normal convolution.
    """
    if psi <= 0.0:
        return 0.0
    meas_var = MEAS_SD**2 * (1.0 + gap) if m1_side else MEAS_SD**2
    q, peak, c = _quadratic_fit(meas_var, np.asarray(data, dtype=float))
    pq = psi * q
    var = PRIOR_SD**2 + 1.0 / pq
    log_norm = -0.5 * (np.log(2.0 * np.pi * var) + peak**2 / var)
    return float(psi * c + 0.5 * np.log(2.0 * np.pi / pq) + log_norm)


def oracle_exact_log_mdd(data: np.ndarray, gap: float = 0.0,
                         m1_side: bool = True) -> float:
    """Exact log marginal data density of one side of the pair."""
    return oracle_exact_tempered_evidence(data, 1.0, gap=gap, m1_side=m1_side)


def _bspf_state_model(loc: float, meas_var: float, data: np.ndarray) -> StateModel:
    init_sd = STATE_SD / np.sqrt(1.0 - AR_COEF**2)
    resid = np.asarray(data, dtype=float)[:, 0] - loc
    log_norm = -0.5 * np.log(2.0 * np.pi * meas_var)
    noise_cache = {}

    def init_sampler(rng, m):
        return rng.normal(0.0, init_sd, size=(m, 1))

    def transition(t, states, rng):
        if t == 0 or "eta" not in noise_cache:
            noise_cache["eta"] = rng.standard_normal((resid.shape[0], *states.shape))
        return AR_COEF * states + STATE_SD * noise_cache["eta"][t]

    def measurement_logpdf(t, states):
        return log_norm - 0.5 * (resid[t] - states[:, 0]) ** 2 / meas_var

    return StateModel(init_sampler=init_sampler, transition=transition,
                      measurement_logpdf=measurement_logpdf, n_state=1)


def linear_oracle_pair(data: np.ndarray, gap: float = 0.0, m1_bspf: bool = False,
                       m_bspf: int = 500, enlarge_m0: bool = False):
    """Build the (proxy, target) pair over the shared location parameter.

    ``gap`` perturbs the target's measurement-noise variance; gap = 0 makes
    the two likelihoods identical.  With ``m1_bspf`` the target likelihood is
    estimated by the bootstrap filter instead of the Kalman filter.  With
    ``enlarge_m0`` the proxy gains its own measurement log-scale parameter,
    exercising the proxy-specific block of a model-tempering layout.
    """
    if gap < 0.0:
        raise InvalidConfig("gap must be non-negative")
    data = np.atleast_2d(np.asarray(data, dtype=float))
    meta_common = [ParamMeta("loc", "none", "common")]

    def common_log_prior(theta):
        return float(-0.5 * (theta[0] / PRIOR_SD) ** 2
                     - 0.5 * np.log(2.0 * np.pi * PRIOR_SD**2))

    m1_var = MEAS_SD**2 * (1.0 + gap)

    if m1_bspf:
        def m1_loglik(theta, d, rng):
            model = _bspf_state_model(theta[0], m1_var, d)
            total, _ = bspf_loglik(model, len(d), BspfConfig(m_bspf), rng)
            return total

        def m1_loglik_pp(theta, d, rng):
            model = _bspf_state_model(theta[0], m1_var, d)
            return bspf_loglik(model, len(d), BspfConfig(m_bspf), rng)
    else:
        def m1_loglik(theta, d, rng=None):
            return _loglik(theta[0], m1_var, d)

        def m1_loglik_pp(theta, d, rng=None):
            return kalman_loglik(_state_space(theta[0], m1_var), d)

    m1 = ModelSpec(
        name="oracle_target",
        param_meta=meta_common,
        log_prior=common_log_prior,
        prior_sample=lambda rng: np.array([rng.normal(0.0, PRIOR_SD)]),
        log_likelihood=m1_loglik,
        per_period_log_likelihood=m1_loglik_pp,
        deterministic=not m1_bspf,
    )

    if enlarge_m0:
        meta_m0 = meta_common + [ParamMeta("m0_log_noise_scale", "none", "m0_only")]

        def m0_log_prior(theta):
            return common_log_prior(theta) + float(
                -0.5 * (theta[1] / NUISANCE_PRIOR_SD) ** 2
                - 0.5 * np.log(2.0 * np.pi * NUISANCE_PRIOR_SD**2)
            )

        m0 = ModelSpec(
            name="oracle_proxy",
            param_meta=meta_m0,
            log_prior=m0_log_prior,
            prior_sample=lambda rng: np.array([
                rng.normal(0.0, PRIOR_SD), rng.normal(0.0, NUISANCE_PRIOR_SD),
            ]),
            log_likelihood=lambda theta, d, rng=None: _loglik(
                theta[0], MEAS_SD**2 * np.exp(theta[1]), d
            ),
            per_period_log_likelihood=lambda theta, d, rng=None: kalman_loglik(
                _state_space(theta[0], MEAS_SD**2 * np.exp(theta[1])), d
            ),
            deterministic=True,
            specific_log_prior=lambda t0: float(
                -0.5 * (t0[0] / NUISANCE_PRIOR_SD) ** 2
                - 0.5 * np.log(2.0 * np.pi * NUISANCE_PRIOR_SD**2)
            ),
            specific_sample=lambda rng: np.array([rng.normal(0.0, NUISANCE_PRIOR_SD)]),
        )
    else:
        m0 = ModelSpec(
            name="oracle_proxy",
            param_meta=meta_common,
            log_prior=common_log_prior,
            prior_sample=lambda rng: np.array([rng.normal(0.0, PRIOR_SD)]),
            log_likelihood=lambda theta, d, rng=None: _loglik(theta[0], MEAS_SD**2, d),
            per_period_log_likelihood=lambda theta, d, rng=None: kalman_loglik(
                _state_space(theta[0], MEAS_SD**2), d
            ),
            deterministic=True,
        )
    return m0, m1

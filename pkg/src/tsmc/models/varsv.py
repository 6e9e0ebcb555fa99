"""Bivariate VAR(1) with stochastic volatility and its homoskedastic proxy.

Target model: y_t = Phi1 y_{t-1} + Phic + chol(Sigma) eps_t with
eps_t ~ N(0, diag(d_t)) and log d_{it} following independent AR(1) processes
rho_i log d_{it-1} + xi_i eta_it.  Setting xi = 0 collapses the volatility
states to one and yields the homoskedastic VAR, whose Gaussian likelihood is
exact and cheap; the pair is the canonical model-tempering application.

Sampling parameterization (unconstrained): the 6 regression coefficients,
the log-Cholesky coordinates of Sigma, logit(rho_i), and log(xi_i), with
Jacobian corrections folded into the prior density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..bridges import ModelSpec
from ..errors import InvalidConfig, SingularSigma
from ..filters import BspfConfig, StateModel, bspf_loglik
from ..transforms import ParamMeta
from .minnesota import MinnesotaHyper, MniwPrior, minnesota_dummies, mniw_from_dummies

_LOG2PI = float(np.log(2.0 * np.pi))
N_VARS = 2
N_COEF = 6          # (n_vars + 1) regressors per equation
DIM_COMMON = 9      # coefficients + 3 free elements of Sigma
DIM_FULL = 13       # common + (rho_1, rho_2, xi_1, xi_2)


@dataclass
class VarSvParams:
    """Constrained-space parameters of the VAR-SV data generating process."""

    phi1: np.ndarray
    phic: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.phi1 = np.asarray(self.phi1, dtype=float)
        self.phic = np.asarray(self.phic, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)


_PHI1 = np.array([[0.6, 0.3], [0.0, 0.4]])
_PHIC = np.zeros(2)
_SIGMA = np.array([[1.0, 0.0], [0.7, 1.0]]) @ np.array([[1.0, 0.7], [0.0, 1.0]])

DGP_PRESETS = {
    "dgp1": VarSvParams(_PHI1, _PHIC, _SIGMA, rho=np.array([0.50, 0.90]),
                        xi=np.array([0.20, 0.20])),
    "dgp2": VarSvParams(_PHI1, _PHIC, _SIGMA, rho=np.array([0.20, 0.60]),
                        xi=np.array([0.80, 0.90])),
    "dgp3": VarSvParams(_PHI1, _PHIC, _SIGMA, rho=np.array([0.50, 0.90]),
                        xi=np.array([0.80, 0.90])),
}


# ---------------------------------------------------------------------------
# parameter packing
# ---------------------------------------------------------------------------

PARAM_META_COMMON = [
    ParamMeta("phi_11", "none", "common"),
    ParamMeta("phi_21", "none", "common"),
    ParamMeta("phi_c1", "none", "common"),
    ParamMeta("phi_12", "none", "common"),
    ParamMeta("phi_22", "none", "common"),
    ParamMeta("phi_c2", "none", "common"),
    ParamMeta("sig_l11", "log", "common"),
    ParamMeta("sig_l21", "none", "common"),
    ParamMeta("sig_l22", "log", "common"),
]
PARAM_META_SV = [
    ParamMeta("rho_1", "logit", "m1_only"),
    ParamMeta("rho_2", "logit", "m1_only"),
    ParamMeta("xi_1", "log", "m1_only"),
    ParamMeta("xi_2", "log", "m1_only"),
]


def _encode_sigma(sigma: np.ndarray) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise SingularSigma("Sigma must be symmetric positive definite") from None
    return np.array([np.log(chol[0, 0]), chol[1, 0], np.log(chol[1, 1])])


def _decode_sigma(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    chol = np.array([[np.exp(u[0]), 0.0], [u[1], np.exp(u[2])]])
    return chol @ chol.T, chol


def _sigma_log_jacobian(u: np.ndarray) -> float:
    # |d Sigma / d u| for the 2x2 log-Cholesky map: 2 log 2 + 3 l11 + 2 l22
    return 2.0 * np.log(2.0) + 3.0 * u[0] + 2.0 * u[2]


def pack_var_params(params: VarSvParams, include_sv: bool = True) -> np.ndarray:
    """Constrained parameters -> unconstrained sampler vector."""
    coef = np.vstack([params.phi1.T, params.phic])  # (3, 2), one equation per column
    u = [coef.flatten(order="F"), _encode_sigma(params.sigma)]
    if include_sv:
        rho = np.clip(params.rho, 1e-12, 1.0 - 1e-12)
        u.append(np.log(rho / (1.0 - rho)))
        u.append(np.log(np.maximum(params.xi, 1e-300)))
    return np.concatenate(u)


def unpack_var_params(theta: np.ndarray) -> VarSvParams:
    """Unconstrained sampler vector -> constrained parameters.  Vectors of
    length 9 decode the homoskedastic model (rho = xi = 0)."""
    coef = theta[:N_COEF].reshape((3, 2), order="F")
    sigma, _ = _decode_sigma(theta[N_COEF:N_COEF + 3])
    if theta.shape[0] > DIM_COMMON:
        rho = expit(theta[9:11])
        xi = np.exp(theta[11:13])
    else:
        rho = np.zeros(2)
        xi = np.zeros(2)
    return VarSvParams(phi1=coef[:2, :].T, phic=coef[2, :], sigma=sigma, rho=rho, xi=xi)


# ---------------------------------------------------------------------------
# likelihoods
# ---------------------------------------------------------------------------

def _regression_residuals(coef: np.ndarray, data: np.ndarray) -> np.ndarray:
    x = np.hstack([data[:-1], np.ones((data.shape[0] - 1, 1))])
    return data[1:] - x @ coef


def _whiten_2x2(chol: np.ndarray, resid: np.ndarray) -> np.ndarray:
    """Forward substitution z = chol^-1 resid' for a 2x2 lower triangle,
    vectorized over the rows of resid."""
    z1 = resid[:, 0] / chol[0, 0]
    z2 = (resid[:, 1] - chol[1, 0] * z1) / chol[1, 1]
    return np.column_stack([z1, z2])


def var_loglik_per_period(theta: np.ndarray, data: np.ndarray, rng=None):
    """Per-period conditional Gaussian log-likelihood of the homoskedastic
    VAR, conditioning on the first observation.  Returns (total, per_period)."""
    coef = theta[:N_COEF].reshape((3, 2), order="F")
    _, chol = _decode_sigma(theta[N_COEF:N_COEF + 3])
    resid = _regression_residuals(coef, np.asarray(data, dtype=float))
    z = _whiten_2x2(chol, resid)
    logdet = np.log(chol[0, 0]) + np.log(chol[1, 1])
    per_period = -0.5 * np.sum(z * z, axis=1) - N_VARS * 0.5 * _LOG2PI - logdet
    return float(per_period.sum()), per_period


def var_loglik(theta_or_params, data: np.ndarray, rng=None) -> float:
    """Exact homoskedastic-VAR log-likelihood given the first observation."""
    if isinstance(theta_or_params, VarSvParams):
        theta = pack_var_params(theta_or_params, include_sv=False)
    else:
        theta = np.asarray(theta_or_params, dtype=float)
    total, _ = var_loglik_per_period(theta, data)
    return total


def varsv_state_model(theta: np.ndarray, data: np.ndarray) -> StateModel:
    """Bootstrap-filter state model for the volatility states log d_t.

    The measurement density is conditionally Gaussian: residuals are whitened
    once by chol(Sigma), so each state particle only rescales the whitened
    residual by its own diag(d_t).
    """
    params = unpack_var_params(theta)
    coef = np.vstack([params.phi1.T, params.phic])
    lchol = _decode_sigma(theta[N_COEF:N_COEF + 3])[1]
    resid = _regression_residuals(coef, np.asarray(data, dtype=float))
    z2 = _whiten_2x2(lchol, resid) ** 2  # (T-1, 2)
    logdet = np.log(lchol[0, 0]) + np.log(lchol[1, 1])
    const = -N_VARS * 0.5 * _LOG2PI - logdet
    rho, xi = params.rho, params.xi
    init_sd = np.where(xi > 0.0, xi / np.sqrt(np.maximum(1.0 - rho**2, 1e-12)), 0.0)
    n_per = resid.shape[0]
    noise_cache = {}

    def init_sampler(rng, m):
        return rng.standard_normal((m, N_VARS)) * init_sd

    def transition(t, states, rng):
        # transition noise for the whole filter pass is drawn on first use;
        # consumption order is fixed, so results stay key-deterministic
        if t == 0 or "eta" not in noise_cache:
            noise_cache["eta"] = rng.standard_normal((n_per, *states.shape))
        return states * rho + xi * noise_cache["eta"][t]

    def measurement_logpdf(t, states):
        quad = (states + z2[t] * np.exp(-states)).sum(axis=1)
        return -0.5 * quad + const

    return StateModel(init_sampler=init_sampler, transition=transition,
                      measurement_logpdf=measurement_logpdf, n_state=N_VARS)


def varsv_bspf_loglik_per_period(theta: np.ndarray, data: np.ndarray,
                                 rng: np.random.Generator, m_bspf: int):
    model = varsv_state_model(theta, data)
    config = BspfConfig(n_state_particles=m_bspf)
    return bspf_loglik(model, len(data) - 1, config, rng)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def varsv_simulate(params: VarSvParams, n_periods: int, rng: np.random.Generator,
                   burn_in: int = 100):
    """Simulate the VAR-SV process; returns (data, volatility paths d_t).

    Volatility states start from their stationary distribution; the level
    starts at zero and a burn-in window is discarded.
    """
    if n_periods < 1:
        raise InvalidConfig("n_periods must be positive")
    if np.max(np.abs(np.linalg.eigvals(params.phi1))) >= 1.0:
        raise InvalidConfig("phi1 must be stable for simulation")
    chol = np.linalg.cholesky(params.sigma)
    rho, xi = params.rho, params.xi
    init_sd = np.where(xi > 0.0, xi / np.sqrt(np.maximum(1.0 - rho**2, 1e-12)), 0.0)

    total = n_periods + burn_in
    lnd = rng.standard_normal(N_VARS) * init_sd
    y = np.zeros(N_VARS)
    data = np.empty((total, N_VARS))
    vols = np.empty((total, N_VARS))
    for t in range(total):
        lnd = rho * lnd + xi * rng.standard_normal(N_VARS)
        eps = np.sqrt(np.exp(lnd)) * rng.standard_normal(N_VARS)
        y = params.phi1 @ y + params.phic + chol @ eps
        data[t] = y
        vols[t] = np.exp(lnd)
    return data[burn_in:], vols[burn_in:]


# ---------------------------------------------------------------------------
# priors and the model pair
# ---------------------------------------------------------------------------

def _log_scaled_inv_chi2(x: float, s2: float, nu: float) -> float:
    """Log density of the scaled inverse chi-square with scale s2 and nu dof."""
    if x <= 0.0:
        return -np.inf
    half_nu = 0.5 * nu
    return (half_nu * np.log(half_nu * s2) - math.lgamma(half_nu)
            - (half_nu + 1.0) * np.log(x) - half_nu * s2 / x)


def _xi_unconstrained_log_prior(u: float, s2: float, nu: float) -> float:
    # xi^2 scaled-inv-chi2, change of variables to xi then to log(xi):
    # p_u(u) = p_{xi^2}(e^{2u}) * 2 e^{2u}
    return _log_scaled_inv_chi2(np.exp(2.0 * u), s2, nu) + np.log(2.0) + 2.0 * u


def _sample_xi(rng: np.random.Generator, s2: float, nu: float) -> float:
    return float(np.sqrt(nu * s2 / rng.chisquare(nu)))


def varsv_model_pair(data: np.ndarray, hyper: MinnesotaHyper | None = None,
                     m_bspf: int = 100, xi_s2: float = 0.09, xi_nu: float = 2.0):
    """Homoskedastic-VAR proxy and VAR-SV target sharing the Minnesota/MNIW
    prior on the coefficients and covariance; rho_i ~ Uniform[0,1] and xi_i^2
    follows a scaled inverse chi-square (sqrt scale 0.3, 2 dof)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != N_VARS:
        raise InvalidConfig(f"VAR-SV expects {N_VARS} series")
    if hyper is None:
        hyper = MinnesotaHyper.from_data(data)
    prior = mniw_from_dummies(*minnesota_dummies(hyper))

    def common_log_prior(theta: np.ndarray) -> float:
        coef = theta[:N_COEF].reshape((3, 2), order="F")
        sigma, _ = _decode_sigma(theta[N_COEF:N_COEF + 3])
        return prior.log_density(coef, sigma) + _sigma_log_jacobian(theta[N_COEF:N_COEF + 3])

    def common_sample(rng: np.random.Generator) -> np.ndarray:
        coef, sigma = prior.sample(rng)
        return np.concatenate([coef.flatten(order="F"), _encode_sigma(sigma)])

    def sv_log_prior(theta_sv: np.ndarray) -> float:
        lp = 0.0
        for u in theta_sv[:2]:
            p = expit(u)
            lp += np.log(p) + np.log1p(-p)  # uniform density times logit Jacobian
        for u in theta_sv[2:]:
            lp += _xi_unconstrained_log_prior(float(u), xi_s2, xi_nu)
        return float(lp)

    def sv_sample(rng: np.random.Generator) -> np.ndarray:
        rho = rng.uniform(0.0, 1.0, size=2)
        rho = np.clip(rho, 1e-12, 1.0 - 1e-12)
        xi = np.array([_sample_xi(rng, xi_s2, xi_nu) for _ in range(2)])
        return np.concatenate([np.log(rho / (1.0 - rho)), np.log(xi)])

    m0 = ModelSpec(
        name="var",
        param_meta=list(PARAM_META_COMMON),
        log_prior=common_log_prior,
        prior_sample=common_sample,
        log_likelihood=lambda theta, d, rng=None: var_loglik(theta, d),
        per_period_log_likelihood=lambda theta, d, rng=None: var_loglik_per_period(theta, d),
        n_periods=lambda d: len(d) - 1,
        deterministic=True,
    )
    m1 = ModelSpec(
        name="varsv",
        param_meta=list(PARAM_META_COMMON) + list(PARAM_META_SV),
        log_prior=lambda theta: common_log_prior(theta[:DIM_COMMON]) + sv_log_prior(theta[DIM_COMMON:]),
        prior_sample=lambda rng: np.concatenate([common_sample(rng), sv_sample(rng)]),
        log_likelihood=lambda theta, d, rng: varsv_bspf_loglik_per_period(theta, d, rng, m_bspf)[0],
        per_period_log_likelihood=lambda theta, d, rng: varsv_bspf_loglik_per_period(theta, d, rng, m_bspf),
        n_periods=lambda d: len(d) - 1,
        deterministic=False,
        specific_log_prior=sv_log_prior,
        specific_sample=sv_sample,
    )
    return m0, m1

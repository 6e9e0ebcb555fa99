"""Likelihood evaluation for state-space models.

Two filters: an exact Kalman filter for linear-Gaussian models (also the
oracle in tests) and a bootstrap particle filter for nonlinear models, which
propagates states through the transition prior, weights them by the
measurement density, and resamples multinomially every period.  The particle
filter's likelihood estimate is unbiased in levels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidConfig, SingularPredictiveCovariance

logger = logging.getLogger(__name__)

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass
class LinearGaussianSS:
    """Linear-Gaussian state-space model.

    State:        s_t = transition @ s_{t-1} + shock_loading @ eta_t,
                  eta_t ~ N(0, shock_cov)
    Measurement:  y_t = meas_intercept + meas_loading @ s_t + eps_t,
                  eps_t ~ N(0, meas_cov)
    Initial:      s_0 ~ N(init_mean, init_cov)
    """

    transition: np.ndarray
    shock_loading: np.ndarray
    shock_cov: np.ndarray
    meas_loading: np.ndarray
    meas_intercept: np.ndarray
    meas_cov: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray

    def __post_init__(self):
        self.transition = np.atleast_2d(np.asarray(self.transition, dtype=float))
        self.shock_loading = np.atleast_2d(np.asarray(self.shock_loading, dtype=float))
        self.shock_cov = np.atleast_2d(np.asarray(self.shock_cov, dtype=float))
        self.meas_loading = np.atleast_2d(np.asarray(self.meas_loading, dtype=float))
        self.meas_intercept = np.atleast_1d(np.asarray(self.meas_intercept, dtype=float))
        self.meas_cov = np.atleast_2d(np.asarray(self.meas_cov, dtype=float))
        self.init_mean = np.atleast_1d(np.asarray(self.init_mean, dtype=float))
        self.init_cov = np.atleast_2d(np.asarray(self.init_cov, dtype=float))

    @property
    def n_state(self) -> int:
        return self.transition.shape[0]

    @property
    def n_obs(self) -> int:
        return self.meas_loading.shape[0]


def kalman_loglik(model: LinearGaussianSS, data: np.ndarray):
    """Exact log-likelihood of a linear-Gaussian model.

    Returns ``(total, per_period)`` where ``per_period[t]`` is the predictive
    log-density log p(y_t | y_{1:t-1}).  Covariance propagation uses the
    Joseph form and explicit symmetrization so the filtered covariances stay
    positive semidefinite.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != model.n_obs:
        raise InvalidConfig(
            f"data has {data.shape[1]} columns, model expects {model.n_obs}"
        )
    if model.n_state == 1 and model.n_obs == 1:
        return _kalman_loglik_scalar(model, data)
    tt, zz = model.transition, model.meas_loading
    rqr = model.shock_loading @ model.shock_cov @ model.shock_loading.T
    hh = model.meas_cov
    n_obs = model.n_obs

    mean = model.init_mean.copy()
    cov = model.init_cov.copy()
    per_period = np.empty(data.shape[0])
    eye_s = np.eye(model.n_state)

    for t in range(data.shape[0]):
        mean_pred = tt @ mean
        cov_pred = tt @ cov @ tt.T + rqr
        cov_pred = 0.5 * (cov_pred + cov_pred.T)

        resid = data[t] - model.meas_intercept - zz @ mean_pred
        f_pred = zz @ cov_pred @ zz.T + hh
        f_pred = 0.5 * (f_pred + f_pred.T)
        try:
            chol = np.linalg.cholesky(f_pred)
        except np.linalg.LinAlgError:
            f_pred = f_pred + 1e-10 * np.eye(n_obs)
            try:
                chol = np.linalg.cholesky(f_pred)
            except np.linalg.LinAlgError:
                raise SingularPredictiveCovariance(
                    f"forecast covariance not invertible at period {t}"
                ) from None
        alpha = np.linalg.solve(chol, resid)
        per_period[t] = -0.5 * (
            n_obs * _LOG2PI + 2.0 * np.sum(np.log(np.diag(chol))) + alpha @ alpha
        )

        gain = cov_pred @ zz.T @ np.linalg.solve(
            chol.T, np.linalg.solve(chol, np.eye(n_obs))
        )
        mean = mean_pred + gain @ resid
        ikz = eye_s - gain @ zz
        cov = ikz @ cov_pred @ ikz.T + gain @ hh @ gain.T
        cov = 0.5 * (cov + cov.T)

    return float(per_period.sum()), per_period


def _kalman_loglik_scalar(model: LinearGaussianSS, data: np.ndarray):
    """Scalar-arithmetic recursion for univariate state and observation."""
    tt = float(model.transition[0, 0])
    rqr = float(model.shock_loading[0, 0] ** 2 * model.shock_cov[0, 0])
    zz = float(model.meas_loading[0, 0])
    dd = float(model.meas_intercept[0])
    hh = float(model.meas_cov[0, 0])
    mean = float(model.init_mean[0])
    cov = float(model.init_cov[0, 0])
    y = data[:, 0]
    per_period = np.empty(y.shape[0])
    for t in range(y.shape[0]):
        mean_pred = tt * mean
        cov_pred = tt * cov * tt + rqr
        resid = y[t] - dd - zz * mean_pred
        f_pred = zz * cov_pred * zz + hh
        if f_pred <= 1e-10:
            raise SingularPredictiveCovariance(
                f"forecast variance not positive at period {t}"
            )
        per_period[t] = -0.5 * (_LOG2PI + np.log(f_pred) + resid * resid / f_pred)
        gain = cov_pred * zz / f_pred
        mean = mean_pred + gain * resid
        ikz = 1.0 - gain * zz
        cov = ikz * cov_pred * ikz + gain * hh * gain
    return float(per_period.sum()), per_period


@dataclass
class StateModel:
    """Nonlinear state-space model interface for the bootstrap filter.

    All callables are vectorized over an (M, n_state) particle block; the
    period index lets closures bind observed data (e.g. lagged regressors).
    """

    init_sampler: Callable[[np.random.Generator, int], np.ndarray]
    transition: Callable[[int, np.ndarray, np.random.Generator], np.ndarray]
    measurement_logpdf: Callable[[int, np.ndarray], np.ndarray]
    n_state: int = 1


@dataclass
class BspfConfig:
    """Bootstrap particle filter settings."""

    n_state_particles: int = 100
    resampling: str = "multinomial"

    def __post_init__(self):
        if self.n_state_particles < 2:
            raise InvalidConfig("n_state_particles must be at least 2")
        if self.resampling != "multinomial":
            raise InvalidConfig("only multinomial resampling is supported")


def multinomial_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw M iid ancestor indices proportional to mean-one weights."""
    m = weights.shape[0]
    cum = np.cumsum(weights) / m
    cum[-1] = max(cum[-1], 1.0)
    idx = np.searchsorted(cum, rng.random(m), side="right")
    return np.minimum(idx, m - 1)


def bspf_loglik(model: StateModel, n_periods: int, config: BspfConfig,
                rng: np.random.Generator):
    """Bootstrap particle filter likelihood estimate.

    Per period: propagate particles through the transition prior, weight them
    by the measurement density, record log((1/M) sum of incremental weights
    times carried weights), and resample multinomially.  Returns
    ``(total, per_period)``.  If every particle weight underflows at some
    period the estimate is -inf (with a diagnostic), never NaN.
    """
    m = config.n_state_particles
    log_m = np.log(m)
    states = model.init_sampler(rng, m)
    # resampling uniforms drawn up front; carried weights are identically one
    # because selection runs every period
    uniforms = rng.random((n_periods, m))
    log_w_carried = np.zeros(m)
    per_period = np.full(n_periods, -np.inf)

    for t in range(n_periods):
        states = model.transition(t, states, rng)
        combined = model.measurement_logpdf(t, states) + log_w_carried
        top = combined.max()
        if not np.isfinite(top):
            logger.warning(
                "particle filter: all %d weights underflowed at period %d", m, t
            )
            return float("-inf"), per_period
        shifted = np.exp(combined - top)
        total = shifted.sum()
        per_period[t] = float(top + np.log(total) - log_m)
        cum = np.cumsum(shifted)
        cum /= cum[-1]
        idx = np.minimum(np.searchsorted(cum, uniforms[t], side="right"), m - 1)
        states = states[idx]

    return float(per_period.sum()), per_period


def stationary_init_cov(transition: np.ndarray, shock_cov_full: np.ndarray) -> np.ndarray:
    """Solve the discrete Lyapunov equation P = T P T' + Q for a stable T."""
    from scipy.linalg import solve_discrete_lyapunov

    vals = np.linalg.eigvals(np.atleast_2d(transition))
    if np.max(np.abs(vals)) >= 1.0:
        raise InvalidConfig("transition matrix must be stable for a stationary init")
    out = solve_discrete_lyapunov(np.atleast_2d(transition), np.atleast_2d(shock_cov_full))
    return 0.5 * (out + out.T)

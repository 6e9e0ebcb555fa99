"""Minnesota-style dummy-observation prior for VAR coefficients.

Three dummy blocks -- unit-root centering, co-persistence, and an innovation
covariance block repeated lam3 times -- are stacked into an artificial sample
(Y*, X*) whose least-squares statistics induce a conjugate matric-normal
inverse-Wishart prior on (Phi, Sigma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import multigammaln
from scipy.stats import invwishart

from ..errors import InvalidConfig, RankDeficientDummies

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass
class MinnesotaHyper:
    """Scale hyperparameters plus the per-series location/scale statistics."""

    lam1: float
    lam2: float
    lam3: int
    ybar: np.ndarray
    sbar: np.ndarray

    def __post_init__(self):
        self.ybar = np.atleast_1d(np.asarray(self.ybar, dtype=float))
        self.sbar = np.atleast_1d(np.asarray(self.sbar, dtype=float))
        if self.lam1 <= 0.0 or self.lam2 <= 0.0:
            raise InvalidConfig("lam1 and lam2 must be positive")
        if int(self.lam3) != self.lam3 or self.lam3 < 1:
            raise InvalidConfig("lam3 must be an integer >= 1")
        self.lam3 = int(self.lam3)
        if np.any(self.sbar <= 0.0):
            raise InvalidConfig("per-series scales must be positive")

    @classmethod
    def from_data(cls, data: np.ndarray, lam1: float = 1.0, lam2: float = 1.0,
                  lam3: int = 3) -> "MinnesotaHyper":
        data = np.atleast_2d(np.asarray(data, dtype=float))
        return cls(lam1=lam1, lam2=lam2, lam3=lam3,
                   ybar=data.mean(axis=0), sbar=data.std(axis=0, ddof=1))


def minnesota_dummies(hyper: MinnesotaHyper) -> tuple[np.ndarray, np.ndarray]:
    """Stack the three dummy blocks; regressors are ordered
    [y_{1,t-1}, ..., y_{n,t-1}, intercept]."""
    n = hyper.ybar.shape[0]
    k = n + 1

    # unit-root centering block, scaled by lam1 * sbar_i
    y1 = np.diag(hyper.lam1 * hyper.sbar)
    x1 = np.hstack([np.diag(hyper.lam1 * hyper.sbar), np.zeros((n, 1))])

    # co-persistence block: lagged and current values pinned at the mean
    y2 = (hyper.lam2 * hyper.ybar)[None, :]
    x2 = np.hstack([hyper.lam2 * hyper.ybar, [hyper.lam2]])[None, :]

    # covariance block, repeated lam3 times
    y3 = np.tile(np.diag(hyper.sbar), (hyper.lam3, 1))
    x3 = np.zeros((n * hyper.lam3, k))

    return np.vstack([y1, y2, y3]), np.vstack([x1, x2, x3])


@dataclass
class MniwPrior:
    """Matric-normal inverse-Wishart prior.

    Sigma ~ IW(scale, dof) and vec(Phi) | Sigma ~ N(vec(mean), Sigma kron
    precision^-1), with Phi of shape (k, n) holding one equation per column.
    """

    mean: np.ndarray
    precision: np.ndarray
    scale: np.ndarray
    dof: float

    def __post_init__(self):
        self.mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        self.precision = np.atleast_2d(np.asarray(self.precision, dtype=float))
        self.scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        n = self.scale.shape[0]
        if self.dof <= n - 1:
            raise RankDeficientDummies(f"dof {self.dof} must exceed n - 1 = {n - 1}")
        try:
            self._chol_precision = np.linalg.cholesky(self.precision)
            self._chol_scale = np.linalg.cholesky(self.scale)
        except np.linalg.LinAlgError:
            raise RankDeficientDummies("precision and scale must be positive definite") from None

    @property
    def k(self) -> int:
        return self.mean.shape[0]

    @property
    def n(self) -> int:
        return self.mean.shape[1]

    def log_density(self, coef: np.ndarray, sigma: np.ndarray) -> float:
        """Joint log prior density at (Phi, Sigma) in constrained space."""
        n, k, nu = self.n, self.k, self.dof
        try:
            chol_sig = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            return -np.inf
        logdet_sig = 2.0 * np.sum(np.log(np.diag(chol_sig)))
        logdet_scale = 2.0 * np.sum(np.log(np.diag(self._chol_scale)))
        logdet_prec = 2.0 * np.sum(np.log(np.diag(self._chol_precision)))

        # inverse-Wishart part
        lp = (0.5 * nu * logdet_scale - 0.5 * nu * n * np.log(2.0)
              - multigammaln(0.5 * nu, n) - 0.5 * (nu + n + 1) * logdet_sig)
        inv_sig_scale = np.linalg.solve(sigma, self.scale)
        lp += -0.5 * np.trace(inv_sig_scale)

        # matric-normal part
        resid = coef - self.mean
        quad = np.linalg.solve(sigma, resid.T @ self.precision @ resid)
        lp += (-0.5 * n * k * _LOG2PI - 0.5 * k * logdet_sig
               + 0.5 * n * logdet_prec - 0.5 * np.trace(quad))
        return float(lp)

    def sample(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw (Phi, Sigma) by composition: Sigma from the inverse-Wishart,
        then Phi | Sigma from the matric normal."""
        sigma = invwishart.rvs(df=self.dof, scale=self.scale, random_state=rng)
        sigma = np.atleast_2d(sigma)
        z = rng.standard_normal((self.k, self.n))
        # row factor A with A A' = precision^-1 is inv(chol(precision))'
        a = np.linalg.inv(self._chol_precision).T
        b = np.linalg.cholesky(sigma)
        coef = self.mean + a @ z @ b.T
        return coef, sigma


def mniw_from_dummies(y_star: np.ndarray, x_star: np.ndarray) -> MniwPrior:
    """Least-squares statistics of the dummy sample mapped into the conjugate
    prior: mean = Phi*, precision = X*'X*, scale = dummy residual
    cross-product, dof = T* - k."""
    y_star = np.atleast_2d(np.asarray(y_star, dtype=float))
    x_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    t_star, k = x_star.shape
    n = y_star.shape[1]
    xtx = x_star.T @ x_star
    if np.linalg.matrix_rank(xtx) < k:
        raise RankDeficientDummies("dummy design X*'X* is rank deficient")
    coef_star = np.linalg.solve(xtx, x_star.T @ y_star)
    resid = y_star - x_star @ coef_star
    scale_star = resid.T @ resid
    dof = t_star - k
    if dof <= n - 1:
        raise RankDeficientDummies(f"dummy sample too small: dof {dof} <= {n - 1}")
    try:
        np.linalg.cholesky(scale_star)
    except np.linalg.LinAlgError:
        raise RankDeficientDummies("dummy residual scale is singular") from None
    return MniwPrior(mean=coef_star, precision=xtx, scale=scale_star, dof=float(dof))

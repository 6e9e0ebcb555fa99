"""Univariate Gaussian toy problem.

Both the starting density N(mu, sigma^2) and the target N(0, 1) play the role
of posteriors directly: the bridge is the geometric mean of the two densities
with no separate prior or data term.  Closed forms for the bridge moments and
for the overlap between the densities make this the main calibration case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..bridges import BridgeSpec, ModelSpec, model_tempering
from ..errors import InvalidConfig, QuadratureNonConvergence
from ..transforms import ParamMeta

_LOG2PI = float(np.log(2.0 * np.pi))


def _normal_logpdf(x: float, mean: float, sd: float) -> float:
    z = (x - mean) / sd
    return -0.5 * (z * z + _LOG2PI) - np.log(sd)


@dataclass(frozen=True)
class GaussianToySpec:
    """Starting density N(mu, sigma^2); the target is fixed at N(0, 1)."""

    mu: float = -3.0
    sigma: float = 0.2
    target_mean: float = 0.0
    target_sd: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0.0 or self.target_sd <= 0.0:
            raise InvalidConfig("standard deviations must be positive")


def toy_bridge(spec: GaussianToySpec) -> BridgeSpec:
    """Bridge whose stage-0 swarm is drawn directly from N(mu, sigma^2) and
    whose kernel is the geometric mean of the two normal densities."""
    meta = [ParamMeta("theta", "none", "common")]

    def make_model(name: str, mean: float, sd: float) -> ModelSpec:
        return ModelSpec(
            name=name,
            param_meta=meta,
            log_prior=lambda theta: 0.0,
            prior_sample=lambda rng: np.array([rng.normal(mean, sd)]),
            log_likelihood=lambda theta, data, rng=None: _normal_logpdf(theta[0], mean, sd),
        )

    m0 = make_model("toy_start", spec.mu, spec.sigma)
    m1 = make_model("toy_target", spec.target_mean, spec.target_sd)
    return model_tempering(m0, m1, data=None, psi_star=1.0, stage0="direct")


def geometric_bridge_moments(spec: GaussianToySpec, phi: float) -> tuple[float, float]:
    """Mean and variance of the stage-phi geometric bridge of two normals.

    Precision lambda(phi) = (1-phi)/sigma0^2 + phi/sigma1^2 and the mean is
    the precision-weighted average of the two component means.
    """
    prec = (1.0 - phi) / spec.sigma**2 + phi / spec.target_sd**2
    mean = ((1.0 - phi) * spec.mu / spec.sigma**2
            + phi * spec.target_mean / spec.target_sd**2) / prec
    return mean, 1.0 / prec


@dataclass(frozen=True)
class UnivariateDensity:
    """Pointwise-evaluable density with a location and scale hint for the
    integration window."""

    pdf: Callable[[float], float]
    center: float
    spread: float


def gaussian_density(mean: float, sd: float) -> UnivariateDensity:
    return UnivariateDensity(
        pdf=lambda x: float(np.exp(_normal_logpdf(x, mean, sd))),
        center=mean,
        spread=sd,
    )


def _adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0:
        raise QuadratureNonConvergence("adaptive Simpson recursion limit reached")
    if abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return (_adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def integrate_adaptive_simpson(f, a: float, b: float, tol: float = 1e-8,
                               initial_panels: int = 32, max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature with an initial uniform panel split so
    kinks (e.g. the crossing points of two densities) are localized."""
    edges = np.linspace(a, b, initial_panels + 1)
    total = 0.0
    panel_tol = tol / initial_panels
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        total += _adaptive_simpson(f, lo, hi, flo, fmid, fhi, whole, panel_tol, max_depth)
    return total


def overlap_discrepancy(p0: UnivariateDensity, p1: UnivariateDensity) -> float:
    """One minus the area under the pointwise minimum of the two densities.

    Zero for identical densities, approaching one as the supports separate.
    """
    lo = min(p0.center - 10.0 * p0.spread, p1.center - 10.0 * p1.spread)
    hi = max(p0.center + 10.0 * p0.spread, p1.center + 10.0 * p1.spread)
    area = integrate_adaptive_simpson(lambda x: min(p0.pdf(x), p1.pdf(x)), lo, hi)
    return float(np.clip(1.0 - area, 0.0, 1.0))

"""Support transforms between constrained and unconstrained parameter space.

The sampler mutates particles in unconstrained coordinates; priors on bounded
parameters carry the Jacobian of the inverse transform.  Three scalar
transforms cover every built-in model: identity, log (positive support), and
logit (unit interval).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit as _logit

TRANSFORMS = ("none", "log", "logit")


@dataclass(frozen=True)
class ParamMeta:
    """Name, support transform, and partition tag of one parameter."""

    name: str
    transform: str = "none"   # one of TRANSFORMS
    tag: str = "common"       # "common" | "m0_only" | "m1_only"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.tag not in ("common", "m0_only", "m1_only"):
            raise ValueError(f"unknown partition tag {self.tag!r}")


def constrain(u: float, transform: str) -> float:
    if transform == "none":
        return u
    if transform == "log":
        return float(np.exp(u))
    return float(expit(u))


def unconstrain(x: float, transform: str) -> float:
    if transform == "none":
        return x
    if transform == "log":
        return float(np.log(x))
    return float(_logit(x))


def log_jacobian(u: float, transform: str) -> float:
    """log |dx/du| of the constraining map at unconstrained value u."""
    if transform == "none":
        return 0.0
    if transform == "log":
        return u
    # logit^-1: derivative p(1-p)
    p = expit(u)
    return float(np.log(p) + np.log1p(-p))


def constrain_vector(u: np.ndarray, meta: list[ParamMeta]) -> np.ndarray:
    return np.array([constrain(ui, m.transform) for ui, m in zip(u, meta)])


def unconstrain_vector(x: np.ndarray, meta: list[ParamMeta]) -> np.ndarray:
    return np.array([unconstrain(xi, m.transform) for xi, m in zip(x, meta)])


def constrain_matrix(values: np.ndarray, meta: list[ParamMeta]) -> np.ndarray:
    """Constrain an (N, d) matrix of unconstrained particle values column-wise."""
    out = np.empty_like(values)
    for j, m in enumerate(meta):
        col = values[:, j]
        if m.transform == "none":
            out[:, j] = col
        elif m.transform == "log":
            out[:, j] = np.exp(col)
        else:
            out[:, j] = expit(col)
    return out

"""Built-in model families: Gaussian toy, VAR with stochastic volatility,
and a linear-Gaussian oracle pair with exactly computable evidence."""

from .gaussian_toy import (
    GaussianToySpec,
    gaussian_density,
    geometric_bridge_moments,
    overlap_discrepancy,
    toy_bridge,
)
from .linear_oracle import (
    linear_oracle_pair,
    oracle_exact_log_mdd,
    oracle_exact_tempered_evidence,
    simulate_oracle_data,
)
from .minnesota import MinnesotaHyper, MniwPrior, minnesota_dummies, mniw_from_dummies
from .varsv import (
    DGP_PRESETS,
    VarSvParams,
    pack_var_params,
    unpack_var_params,
    var_loglik,
    varsv_model_pair,
    varsv_simulate,
)

__all__ = [
    "GaussianToySpec",
    "gaussian_density",
    "geometric_bridge_moments",
    "overlap_discrepancy",
    "toy_bridge",
    "linear_oracle_pair",
    "oracle_exact_log_mdd",
    "oracle_exact_tempered_evidence",
    "simulate_oracle_data",
    "MinnesotaHyper",
    "MniwPrior",
    "minnesota_dummies",
    "mniw_from_dummies",
    "DGP_PRESETS",
    "VarSvParams",
    "pack_var_params",
    "unpack_var_params",
    "var_loglik",
    "varsv_model_pair",
    "varsv_simulate",
]

"""Sequential Monte Carlo posterior sampling with likelihood, data, and
model tempering."""

from .bridges import (
    BridgeSpec,
    ModelSpec,
    bridge_log_kernel,
    data_tempering,
    init_stage0,
    likelihood_tempering,
    model_tempering,
    run_tempered_m0,
)
from .engine import (
    MutationTuning,
    ParticleSystem,
    SmcConfig,
    SmcRunResult,
    adapt_scale,
    compute_ess,
    correction_step,
    log_mdd_ratio,
    mutate,
    run_smc,
    solve_next_phi,
    systematic_resample,
    weighted_moments,
)
from .filters import (
    BspfConfig,
    LinearGaussianSS,
    StateModel,
    bspf_loglik,
    kalman_loglik,
    multinomial_resample,
)
from .diagnostics import (
    MultiRunStats,
    RuntimeModel,
    RunStats,
    importance_weight_variance,
    multi_run,
    predicted_runtime,
    runtime_reduction,
    runtime_reduction_limit,
    summarize_run,
)
from .transforms import ParamMeta

__version__ = "0.1.0"

__all__ = [
    "BridgeSpec",
    "ModelSpec",
    "bridge_log_kernel",
    "data_tempering",
    "init_stage0",
    "likelihood_tempering",
    "model_tempering",
    "run_tempered_m0",
    "MutationTuning",
    "ParticleSystem",
    "SmcConfig",
    "SmcRunResult",
    "adapt_scale",
    "compute_ess",
    "correction_step",
    "log_mdd_ratio",
    "mutate",
    "run_smc",
    "solve_next_phi",
    "systematic_resample",
    "weighted_moments",
    "BspfConfig",
    "LinearGaussianSS",
    "StateModel",
    "bspf_loglik",
    "kalman_loglik",
    "multinomial_resample",
    "MultiRunStats",
    "RuntimeModel",
    "RunStats",
    "importance_weight_variance",
    "multi_run",
    "predicted_runtime",
    "runtime_reduction",
    "runtime_reduction_limit",
    "summarize_run",
    "ParamMeta",
    "__version__",
]

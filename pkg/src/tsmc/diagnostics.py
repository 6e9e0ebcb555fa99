"""Computational-gain diagnostics and multi-run Monte Carlo statistics.

The runtime model predicts total cost from per-stage likelihood-call counts
and measured per-call times; the importance-weight variance gives the
ex-ante signal for how much a tempered proxy posterior can shorten the run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .engine import SmcConfig, SmcRunResult, log_mdd_ratio, parallel_map, worker_count
from .errors import InvalidConfig
from .transforms import ParamMeta, constrain_matrix


@dataclass
class RuntimeModel:
    """Stage counts and per-call likelihood times driving the cost formula.

    ``n_stages_m0``/``n_stages_m1`` count all stages including the initial
    one; by convention the proxy count is zero for a pure likelihood-tempered
    run.  ``evals_per_stage`` is N * N_MH * N_blocks.
    """

    n_stages_m0: int
    n_stages_m1: int
    tau0: float
    tau1: float
    evals_per_stage: int

    def __post_init__(self):
        if self.n_stages_m1 <= 0 or self.n_stages_m0 < 0:
            raise InvalidConfig("stage counts must be positive (proxy may be zero)")
        if self.tau0 < 0.0 or self.tau1 <= 0.0 or self.evals_per_stage <= 0:
            raise InvalidConfig("times and eval counts must be positive")


def predicted_runtime(rm: RuntimeModel, psi_star: float) -> float:
    """Predicted seconds: N* (N1 tau1 + 1{psi>0} (N1 + N0) tau0)."""
    cost = rm.n_stages_m1 * rm.tau1
    if psi_star > 0.0:
        cost += (rm.n_stages_m1 + rm.n_stages_m0) * rm.tau0
    return rm.evals_per_stage * cost


def runtime_reduction(rm0: RuntimeModel, rm: RuntimeModel, psi_star: float) -> float:
    """Predicted runtime of a model-tempered run relative to plain
    likelihood tempering with the same per-stage evaluation budget."""
    ratio = rm.n_stages_m1 / rm0.n_stages_m1
    if psi_star > 0.0:
        ratio += ((rm.n_stages_m1 + rm.n_stages_m0) / rm0.n_stages_m1) * (rm.tau0 / rm.tau1)
    return ratio


def runtime_reduction_limit(rm0: RuntimeModel, rm: RuntimeModel) -> float:
    """Reduction in the limit of a free proxy likelihood: the stage ratio."""
    return rm.n_stages_m1 / rm0.n_stages_m1


def build_runtime_model(m1_run: SmcRunResult, m0_run: SmcRunResult | None,
                        tau0: float, tau1: float, config: SmcConfig) -> RuntimeModel:
    return RuntimeModel(
        n_stages_m0=0 if m0_run is None else m0_run.n_stages + 1,
        n_stages_m1=m1_run.n_stages + 1,
        tau0=tau0,
        tau1=tau1,
        evals_per_stage=config.n_particles * config.n_mh * config.n_blocks,
    )


def measure_tau(fn, n_calls: int = 100) -> float:
    """Median wall time of ``fn()`` over ``n_calls`` invocations."""
    times = np.empty(n_calls)
    for i in range(n_calls):
        t0 = time.perf_counter()
        fn()
        times[i] = time.perf_counter() - t0
    return float(np.median(times))


def importance_weight_variance(m1_logliks: np.ndarray, m0_logliks: np.ndarray | None = None,
                               psi_star: float = 0.0) -> float:
    """Variance across draws of the mean-one normalized weights
    exp(logL1 - psi logL0).

    Equal to N/ESS - 1, hence bounded by N - 1 with equality exactly when one
    draw carries all the weight.  Invariant to adding a constant to the log
    weights.
    """
    lw = np.asarray(m1_logliks, dtype=float)
    if psi_star > 0.0:
        if m0_logliks is None:
            raise InvalidConfig("psi_star > 0 requires the proxy log-likelihoods")
        lw = lw - psi_star * np.asarray(m0_logliks, dtype=float)
    n = lw.shape[0]
    log_ess = 2.0 * logsumexp(lw) - logsumexp(2.0 * lw)
    return float(n * np.exp(-log_ess) - 1.0)


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q) -> np.ndarray:
    """Weighted empirical quantile with linear interpolation between order
    statistics (midpoint plotting positions)."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w) - 0.5 * w
    cum /= np.sum(w)
    return np.interp(np.asarray(q, dtype=float), cum, v)


@dataclass
class RunStats:
    """Per-run scalar summaries in constrained parameter space."""

    log_mdd: float
    post_mean: np.ndarray
    post_var: np.ndarray
    post_q05: np.ndarray
    post_q95: np.ndarray
    n_stages: int
    wall_time: float
    param_names: list[str] = field(default_factory=list)
    n_stages_m0: int = 0


def summarize_run(result: SmcRunResult, param_meta: list[ParamMeta],
                  extra_log_mdd: float = 0.0, wall_time: float | None = None) -> RunStats:
    """Posterior statistics of a completed run; ``extra_log_mdd`` folds in the
    evidence contribution of a preceding tempered-proxy run."""
    swarm = result.final_particles
    x = constrain_matrix(swarm.values, param_meta)
    w = swarm.weights
    n = swarm.n_particles
    mean = (w @ x) / n
    var = (w @ (x - mean) ** 2) / n
    q05 = np.array([weighted_quantile(x[:, j], w, 0.05) for j in range(x.shape[1])])
    q95 = np.array([weighted_quantile(x[:, j], w, 0.95) for j in range(x.shape[1])])
    return RunStats(
        log_mdd=log_mdd_ratio(result) + extra_log_mdd,
        post_mean=mean,
        post_var=var,
        post_q05=q05,
        post_q95=q95,
        n_stages=result.n_stages,
        wall_time=float(np.sum(result.wall_times)) if wall_time is None else wall_time,
        param_names=[m.name for m in param_meta],
    )


@dataclass
class MultiRunStats:
    """Stack of per-run summaries with across-run mean and SD."""

    runs: list[RunStats]
    failures: list[tuple[int, str]]
    log_mdd: np.ndarray
    post_mean: np.ndarray
    n_stages: np.ndarray
    wall_times: np.ndarray
    param_names: list[str]

    @property
    def n_completed(self) -> int:
        return len(self.runs)

    def mean_log_mdd(self) -> float:
        return float(np.mean(self.log_mdd))

    def sd_log_mdd(self) -> float:
        return float(np.std(self.log_mdd, ddof=1)) if len(self.log_mdd) > 1 else float("nan")

    def mean_post_mean(self) -> np.ndarray:
        return self.post_mean.mean(axis=0)

    def sd_post_mean(self) -> np.ndarray:
        if self.post_mean.shape[0] > 1:
            return self.post_mean.std(axis=0, ddof=1)
        return np.full(self.post_mean.shape[1], np.nan)


def multi_run(run_fn, n_run: int, base_seed: int, n_threads: int | None = None) -> MultiRunStats:
    """Execute ``run_fn(seed)`` for seeds base_seed + 0..n_run-1.

    Runs are independent and may execute concurrently; aggregation is fixed
    in run-index order.  A failing run is recorded with its index and message
    while the remaining results are preserved.
    """
    if n_run < 1:
        raise InvalidConfig("n_run must be at least 1")

    def one(i: int):
        try:
            return run_fn(base_seed + i)
        except Exception as exc:  # noqa: BLE001 - report per-run failures
            return (i, f"{type(exc).__name__}: {exc}")

    outcomes = parallel_map(one, range(n_run), worker_count(n_threads))
    runs = [r for r in outcomes if isinstance(r, RunStats)]
    failures = [r for r in outcomes if not isinstance(r, RunStats)]
    if not runs:
        raise InvalidConfig(
            "all runs failed; first error: " + (failures[0][1] if failures else "n/a")
        )
    return MultiRunStats(
        runs=runs,
        failures=failures,
        log_mdd=np.array([r.log_mdd for r in runs]),
        post_mean=np.vstack([r.post_mean for r in runs]),
        n_stages=np.array([r.n_stages for r in runs]),
        wall_times=np.array([r.wall_time for r in runs]),
        param_names=runs[0].param_names,
    )

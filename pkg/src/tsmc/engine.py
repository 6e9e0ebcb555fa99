"""Generic sequential Monte Carlo sampler with adaptive tempering.

The engine is agnostic to how the bridge densities are built: it only asks
the bridge object for incremental log weights, posterior-kernel evaluations,
and fresh likelihood caches.  One recursion stage performs

    correction  -- importance-reweight the swarm to the next exponent phi,
    selection   -- systematic resampling when the ESS drops below threshold,
    mutation    -- blocked adaptive random-walk Metropolis sweeps that leave
                   the stage-n posterior invariant.

The exponent schedule is chosen stage by stage so that the post-correction
effective sample size lands on ``alpha`` times the reference ESS of the
previous stage.  Products of the per-stage mean incremental weights estimate
the ratio of terminal to initial normalizing constants.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from . import rng as rngmod
from .errors import (
    BracketFailure,
    DegenerateSwarm,
    InvalidConfig,
    LayoutMismatch,
    IncompleteRun,
    NonFiniteProposalDensity,
    NonFiniteWeight,
    StageCapExceeded,
)

PHI_TOL = 1e-8            # absolute bisection tolerance on the exponent
PHI_MAX_ITER = 200
COV_RIDGE = 1e-8          # relative ridge for near-singular proposal covariances
COV_EIG_FLOOR = 1e-10


def worker_count(requested: int | None = None) -> int:
    """Resolve the worker-thread cap (TSMC_THREADS env var, default 1)."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("TSMC_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def parallel_map(fn, items, n_threads: int):
    """Order-preserving map, threaded when n_threads > 1.

    Results are collected by index, so the output (and anything derived from
    it in index order) is identical for any thread count.
    """
    items = list(items)
    if n_threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class SmcConfig:
    """Tuning constants of the sampler."""

    n_particles: int
    alpha: float = 0.95
    resample_threshold: float = 0.5
    n_mh: int = 1
    n_blocks: int = 1
    initial_scale: float = 0.5
    target_accept: float = 0.25
    seed: int = 0
    max_stages: int = 1000
    n_threads: int | None = None

    def __post_init__(self):
        if self.n_particles < 2:
            raise InvalidConfig("n_particles must be at least 2")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfig("alpha must lie in (0, 1)")
        if not 0.0 < self.resample_threshold <= 1.0:
            raise InvalidConfig("resample_threshold must lie in (0, 1]")
        if self.n_mh < 1 or self.n_blocks < 1:
            raise InvalidConfig("n_mh and n_blocks must be positive")
        if self.initial_scale <= 0.0:
            raise InvalidConfig("initial_scale must be positive")
        if self.max_stages < 1:
            raise InvalidConfig("max_stages must be positive")
        if self.seed < 0:
            raise InvalidConfig("seed must be a non-negative integer")


@dataclass
class MutationTuning:
    """Proposal scale and covariance used by one mutation stage."""

    scale: float
    proposal_cov: np.ndarray
    last_accept_rate: float = float("nan")


@dataclass
class ParticleSystem:
    """Weighted particle swarm at one tempering stage.

    ``log_weights`` are logs of weights normalized to mean one, i.e.
    ``mean(exp(log_weights)) == 1``; equivalently their logsumexp equals
    ``log(N)``.  ``cached_logliks`` maps cache names (e.g. "target", "proxy")
    to per-particle arrays maintained by the bridge.
    """

    values: np.ndarray
    log_weights: np.ndarray
    stage: int = 0
    phi: float = 0.0
    cached_logliks: dict = field(default_factory=dict)

    @property
    def n_particles(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def take(self, indices: np.ndarray) -> "ParticleSystem":
        """Select particles by index and reset weights to one."""
        caches = {k: v[indices].copy() for k, v in self.cached_logliks.items()}
        return ParticleSystem(
            values=self.values[indices].copy(),
            log_weights=np.zeros(len(indices)),
            stage=self.stage,
            phi=self.phi,
            cached_logliks=caches,
        )


@dataclass
class SmcRunResult:
    """Full trace of one sampler run."""

    final_particles: ParticleSystem
    schedule: list[float]
    ess_history: list[float]
    resampled_flags: list[bool]
    accept_rates: list[float]
    log_mdd_increments: list[float]
    n_stages: int
    wall_times: list[float]
    likelihood_eval_counts: dict
    terminal_phi: float = 1.0
    scale_history: list[float] = field(default_factory=list)


def normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    """Rescale so the weights have arithmetic mean one."""
    n = log_weights.shape[0]
    total = logsumexp(log_weights)
    if not np.isfinite(total):
        raise NonFiniteWeight("all particle weights vanished or are non-finite")
    return log_weights - total + np.log(n)


def ess_from_log_weights(log_weights: np.ndarray) -> float:
    """ESS = N / mean(W^2) for mean-one weights; scale-invariant in log space."""
    return float(np.exp(2.0 * logsumexp(log_weights) - logsumexp(2.0 * log_weights)))


def compute_ess(particles: ParticleSystem) -> float:
    """Effective sample size of the swarm, in [1, N]."""
    return ess_from_log_weights(particles.log_weights)


def correction_step(particles: ParticleSystem, bridge, phi_new: float):
    """Reweight the swarm from its current exponent to ``phi_new``.

    Returns the incremental log weights and the reweighted system.  Particle
    values and caches are unchanged; new weights are renormalized to mean one
    with max-subtraction via logsumexp.
    """
    if phi_new <= particles.phi:
        raise InvalidConfig("phi_new must exceed the current exponent")
    incr = bridge.incremental_log_weights(particles.cached_logliks, particles.phi, phi_new)
    if np.any(np.isnan(incr)) or np.any(np.isposinf(incr)):
        raise NonFiniteWeight("incremental weight is NaN or +inf")
    new = ParticleSystem(
        values=particles.values,
        log_weights=normalize_log_weights(particles.log_weights + incr),
        stage=particles.stage + 1,
        phi=phi_new,
        cached_logliks=particles.cached_logliks,
    )
    return incr, new


def solve_next_phi(
    particles: ParticleSystem,
    bridge,
    alpha: float,
    ess_star: float,
    phi_max: float = 1.0,
) -> float:
    """Find the next exponent so that ESS(phi) = alpha * ess_star.

    ESS(phi) is strictly decreasing on (phi_n-1, phi_max] whenever the swarm
    carries at least two distinct likelihood ratios, so bisection is
    guaranteed to bracket the unique root.  If even phi_max keeps the ESS at
    or above the target, phi_max is returned exactly.
    """
    lw = particles.log_weights
    phi_old = particles.phi
    target = alpha * ess_star

    def ess_at(phi: float) -> float:
        incr = bridge.incremental_log_weights_continuous(
            particles.cached_logliks, phi_old, phi
        )
        return ess_from_log_weights(lw + incr)

    if ess_at(phi_max) >= target:
        return phi_max
    f_lo = ess_from_log_weights(lw) - target
    if f_lo < -1e-9 * particles.n_particles:
        raise BracketFailure(
            "ESS at the current exponent is already below the target; "
            "weights are corrupt upstream"
        )
    lo, hi = phi_old, phi_max
    for _ in range(PHI_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if ess_at(mid) - target >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < PHI_TOL:
            break
    phi_star = 0.5 * (lo + hi)
    phi_star = bridge.snap_phi(phi_star, phi_old)
    return min(phi_star, phi_max)


def systematic_resample(weights: np.ndarray, rng: np.random.Generator,
                        n_out: int | None = None) -> np.ndarray:
    """Systematic resampling of mean-one weights; returns sorted indices.

    A single uniform u ~ U[0, 1/n_out) is shifted across a grid of n_out
    equally spaced points; index i is selected once per grid point falling
    inside its cumulative-weight cell.
    """
    n = weights.shape[0]
    m = n if n_out is None else int(n_out)
    cum = np.cumsum(weights) / n
    cum[-1] = max(cum[-1], 1.0)  # guard against round-off at the right edge
    points = (rng.random() + np.arange(m)) / m
    idx = np.searchsorted(cum, points, side="right")
    return np.minimum(idx, n - 1)


def weighted_moments(particles: ParticleSystem):
    """Importance-sampling mean and covariance of the swarm.

    The covariance is symmetrized; if its smallest eigenvalue falls below
    1e-10 a ridge of 1e-8 * trace/d is added to keep proposals well posed.
    """
    w = particles.weights
    n, d = particles.values.shape
    mean = (w @ particles.values) / n
    centered = particles.values - mean
    cov = (centered * w[:, None]).T @ centered / n
    cov = 0.5 * (cov + cov.T)
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] < COV_EIG_FLOOR:
        cov = cov + COV_RIDGE * (np.trace(cov) / d) * np.eye(d)
    return mean, cov


def adapt_scale(c_prev: float, accept_rate: float, target: float = 0.25) -> float:
    """Logistic scale adaptation: multiplier 0.95 + 0.10 * sigmoid(16(x - target)).

    At ``accept_rate == target`` the multiplier is exactly one; the limits are
    0.95 (never accepting) and 1.05 (always accepting).
    """
    return c_prev * (0.95 + 0.10 * float(expit(16.0 * (accept_rate - target))))


def _block_partition(dim: int, n_blocks: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random permutation of parameter indices split into near-equal chunks."""
    perm = rng.permutation(dim)
    return [b for b in np.array_split(perm, min(n_blocks, dim)) if b.size > 0]


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Cholesky factor, falling back to an eigen square root for PSD inputs."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(mat)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


class _ProposalKernelNaN(Exception):
    """Internal marker carrying the particle index of a NaN proposal kernel."""

    def __init__(self, particle_index: int):
        self.particle_index = particle_index


def mutate(
    particles: ParticleSystem,
    bridge,
    phi: float,
    tuning: MutationTuning,
    config: SmcConfig,
    stage: int,
):
    """Blocked random-walk Metropolis sweeps targeting the stage-phi posterior.

    Each particle runs ``n_mh`` sweeps; within a sweep the coordinates are
    split into the stage's random blocks and each block receives a Gaussian
    step scaled by ``tuning.scale`` and the matching submatrix of the
    proposal covariance.  Weights are untouched.  Returns the mutated system,
    the pooled acceptance fraction over (particle, sweep, block) trials, and
    the per-cache count of fresh likelihood evaluations.
    """
    n, d = particles.values.shape
    blocks = _block_partition(d, config.n_blocks, rngmod.stream(config.seed, rngmod.BLOCKS, stage))
    chols = [_psd_sqrt(tuning.proposal_cov[np.ix_(b, b)]) for b in blocks]
    cache_names = list(particles.cached_logliks.keys())

    new_values = np.empty_like(particles.values)
    new_caches = {k: np.empty_like(v) for k, v in particles.cached_logliks.items()}
    accepts = np.zeros(n, dtype=np.int64)
    trials = np.zeros(n, dtype=np.int64)
    evals = np.zeros(n, dtype=np.int64)

    def work(i: int):
        g = rngmod.stream(config.seed, rngmod.MUTATE, stage, i)
        theta = particles.values[i].copy()
        cache_i = {k: np.array(particles.cached_logliks[k][i]) for k in cache_names}
        log_prior_cur = bridge.log_prior(theta)
        kern_cur = bridge.combine_cached(cache_i, phi) + log_prior_cur
        n_acc = n_try = n_eval = 0
        counter = 0
        for _ in range(config.n_mh):
            for b, chol_b in zip(blocks, chols):
                z = g.standard_normal(b.size)
                log_u = np.log(g.random())
                prop = theta.copy()
                prop[b] += tuning.scale * (chol_b @ z)
                n_try += 1
                log_prior_prop = bridge.log_prior(prop)
                if log_prior_prop == -np.inf:
                    continue  # outside support: certain rejection, no evaluation
                fresh = bridge.evaluate_single(prop, config.seed, stage, i, counter)
                counter += 1
                n_eval += 1
                kern_prop = bridge.combine_cached(fresh, phi) + log_prior_prop
                if np.isnan(kern_prop) or kern_prop == np.inf:
                    raise _ProposalKernelNaN(i)
                if log_u < kern_prop - kern_cur:
                    theta = prop
                    cache_i = fresh
                    log_prior_cur = log_prior_prop
                    kern_cur = kern_prop
                    n_acc += 1
        new_values[i] = theta
        for k in cache_names:
            new_caches[k][i] = cache_i[k]
        accepts[i] = n_acc
        trials[i] = n_try
        evals[i] = n_eval

    parallel_map(work, range(n), worker_count(config.n_threads))

    mutated = ParticleSystem(
        values=new_values,
        log_weights=particles.log_weights.copy(),
        stage=particles.stage,
        phi=phi,
        cached_logliks=new_caches,
    )
    accept_rate = float(accepts.sum()) / float(max(trials.sum(), 1))
    return mutated, accept_rate, int(evals.sum())


def log_mdd_ratio(result: SmcRunResult) -> float:
    """Log of the accumulated normalizing-constant ratio of a completed run."""
    if not result.schedule or abs(result.schedule[-1] - result.terminal_phi) > 1e-12:
        raise IncompleteRun("run did not reach its terminal exponent")
    return float(np.sum(result.log_mdd_increments))


def run_smc(bridge, config: SmcConfig, init: ParticleSystem | None = None,
            phi_max: float = 1.0) -> SmcRunResult:
    """Run the full correction/selection/mutation recursion to ``phi_max``.

    ``init`` must be a stage-0 swarm matching the bridge layout; when absent
    the bridge must support direct sampling of its stage-0 distribution.
    Every random draw is derived from ``config.seed`` through counter-based
    streams, so repeated runs are bit-identical for any worker-thread count.
    """
    n = config.n_particles
    if init is None:
        particles = bridge.sample_stage0(config)
    else:
        if init.dim != bridge.dim:
            raise LayoutMismatch(
                f"init swarm has dimension {init.dim}, bridge expects {bridge.dim}"
            )
        particles = init
    eval_counts = dict(getattr(particles, "_init_eval_counts", {}))
    for name in bridge.cache_names():
        eval_counts.setdefault(name, 0)
        if name not in particles.cached_logliks:
            raise LayoutMismatch(f"stage-0 swarm is missing likelihood cache {name!r}")

    # Reference ESS for the adaptive schedule: the nominal particle count
    # right after an equal-weight reset (stage 0 or a resampling), otherwise
    # the realized ESS of the previous stage.
    ess_star = float(n)
    schedule: list[float] = []
    ess_history: list[float] = []
    resampled_flags: list[bool] = []
    accept_rates: list[float] = []
    log_mdd_increments: list[float] = []
    wall_times: list[float] = []
    scale_history: list[float] = []

    c_scale = config.initial_scale
    accept_prev: float | None = None
    degenerate_streak = 0

    for stage in range(1, config.max_stages + 1):
        t0 = time.perf_counter()
        phi_new = solve_next_phi(particles, bridge, config.alpha, ess_star, phi_max)
        if phi_new <= particles.phi:
            raise BracketFailure("schedule failed to advance; weights are corrupt")

        lw_prev = particles.log_weights
        incr, particles = correction_step(particles, bridge, phi_new)
        log_mdd_increments.append(float(logsumexp(incr + lw_prev) - np.log(n)))

        ess = compute_ess(particles)
        ess_history.append(ess)
        if ess < 1.0 + 1e-9:
            degenerate_streak += 1
            if degenerate_streak >= 2:
                raise DegenerateSwarm("ESS collapsed to one particle twice in a row")
        else:
            degenerate_streak = 0

        mean, cov = weighted_moments(particles)

        resample = ess < config.resample_threshold * n
        resampled_flags.append(resample)
        if resample:
            idx = systematic_resample(
                particles.weights, rngmod.stream(config.seed, rngmod.RESAMPLE, stage)
            )
            particles = particles.take(idx)
            next_ess_star = float(n)
        else:
            next_ess_star = ess

        if stage > 1 and accept_prev is not None:
            c_scale = adapt_scale(c_scale, accept_prev, config.target_accept)
        tuning = MutationTuning(scale=c_scale, proposal_cov=cov,
                                last_accept_rate=accept_prev if accept_prev is not None else float("nan"))
        scale_history.append(c_scale)
        try:
            particles, accept_rate, n_evals = mutate(
                particles, bridge, phi_new, tuning, config, stage
            )
        except _ProposalKernelNaN as exc:
            raise NonFiniteProposalDensity(
                f"posterior kernel returned NaN/+inf at a proposal for particle "
                f"{exc.particle_index} in stage {stage}"
            ) from None
        accept_rates.append(accept_rate)
        for name in bridge.cache_names():
            eval_counts[name] = eval_counts.get(name, 0) + n_evals

        schedule.append(phi_new)
        accept_prev = accept_rate
        ess_star = next_ess_star
        wall_times.append(time.perf_counter() - t0)

        if phi_new >= phi_max - 1e-15:
            break
    else:
        raise StageCapExceeded(
            f"exponent reached only {particles.phi:.6f} of {phi_max} "
            f"after {config.max_stages} stages"
        )

    return SmcRunResult(
        final_particles=particles,
        schedule=schedule,
        ess_history=ess_history,
        resampled_flags=resampled_flags,
        accept_rates=accept_rates,
        log_mdd_increments=log_mdd_increments,
        n_stages=len(schedule),
        wall_times=wall_times,
        likelihood_eval_counts=eval_counts,
        terminal_phi=phi_max,
        scale_history=scale_history,
    )

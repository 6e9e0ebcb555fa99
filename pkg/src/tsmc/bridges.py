"""Bridge densities for likelihood, data, and model tempering.

A bridge owns the stage-n posterior kernel p_n(Y|theta) p(theta) and the
exponent algebra connecting consecutive stages:

    likelihood tempering (lt):  p_n = L1(theta)^phi
    data tempering (dt):        p_n = L1(Y_{1:floor(phi T)} | theta), or the
                                anchored variant L1(1:T)^phi L1(1:T0)^(1-phi)
    model tempering (mt):       p_n = L1^phi (L0^psi)^(1-phi)

Nondeterministic likelihoods (particle-filter estimates) are evaluated once
per particle and cached; corrections recycle the cache through the exponent
algebra, and fresh evaluations happen only at stage-0 initialization and at
mutation proposals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .engine import (
    ParticleSystem,
    SmcConfig,
    SmcRunResult,
    compute_ess,
    parallel_map,
    run_smc,
    systematic_resample,
    worker_count,
)
from .errors import InvalidConfig, LayoutMismatch, MissingCache
from .transforms import ParamMeta

STRATEGIES = ("lt", "dt", "mt")


@dataclass
class ModelSpec:
    """A model as seen by the sampler: prior, likelihood, parameter layout.

    ``log_prior`` and ``log_likelihood`` operate on the model's own
    unconstrained parameter vector; the prior density includes the Jacobian
    of any support transform declared in ``param_meta``.  Models whose
    likelihood is a Monte Carlo estimate set ``deterministic=False`` and
    consume the generator passed to ``log_likelihood``.

    ``specific_log_prior``/``specific_sample`` cover the model-specific
    parameter block (prior-independent of the common block); they are needed
    when this model contributes extra coordinates to a model-tempering
    bridge.
    """

    name: str
    param_meta: list[ParamMeta]
    log_prior: Callable[[np.ndarray], float]
    prior_sample: Callable[[np.random.Generator], np.ndarray]
    log_likelihood: Callable[[np.ndarray, object, np.random.Generator | None], float]
    deterministic: bool = True
    eval_cost: float | None = None
    per_period_log_likelihood: Callable | None = None
    n_periods: Callable[[object], int] | None = None
    specific_log_prior: Callable[[np.ndarray], float] | None = None
    specific_sample: Callable[[np.random.Generator], np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return len(self.param_meta)

    def specific_indices(self) -> np.ndarray:
        own = "m0_only" if any(m.tag == "m0_only" for m in self.param_meta) else "m1_only"
        return np.array([j for j, m in enumerate(self.param_meta) if m.tag == own], dtype=int)

    def common_indices(self) -> np.ndarray:
        return np.array([j for j, m in enumerate(self.param_meta) if m.tag == "common"], dtype=int)


@dataclass
class BridgeSpec:
    """Stage-n bridge kernel plus the stage-0 sampling contract."""

    strategy: str
    m1: ModelSpec
    data: object = None
    m0: ModelSpec | None = None
    psi_star: float = 1.0
    t0: int = 0
    stage0: str = "prior"  # "prior" | "m0_posterior" | "direct"
    param_meta: list[ParamMeta] = field(default_factory=list)
    # index maps from the bridge layout into each model's own layout
    idx_m1: np.ndarray | None = None
    idx_m0: np.ndarray | None = None
    idx_m1_only: np.ndarray | None = None
    idx_m0_only: np.ndarray | None = None
    n_data_periods: int = 0

    @property
    def dim(self) -> int:
        return len(self.param_meta)

    def cache_names(self) -> list[str]:
        if self.strategy == "dt":
            return ["target_pp"]
        if self.strategy == "mt" and self.psi_star > 0.0:
            return ["target", "proxy"]
        return ["target"]

    # ---- prior ----------------------------------------------------------

    def log_prior(self, theta: np.ndarray) -> float:
        lp = self.m1.log_prior(theta[self.idx_m1])
        if self.idx_m0_only is not None and self.idx_m0_only.size > 0:
            lp += self.m0.specific_log_prior(theta[self.idx_m0_only])
        return lp

    def prior_sample(self, rng: np.random.Generator) -> np.ndarray:
        theta = np.empty(self.dim)
        theta[self.idx_m1] = self.m1.prior_sample(rng)
        if self.idx_m0_only is not None and self.idx_m0_only.size > 0:
            theta[self.idx_m0_only] = self.m0.specific_sample(rng)
        return theta

    # ---- exponent algebra ------------------------------------------------

    def _floor_periods(self, phi: float) -> int:
        return min(self.n_data_periods, int(np.floor(phi * self.n_data_periods + 1e-9)))

    def combine_cached(self, cache: dict, phi: float) -> float | np.ndarray:
        """Log p_n(Y|theta) from cached likelihood values (vector or scalar)."""
        if self.strategy == "lt":
            return phi * cache["target"]
        if self.strategy == "mt":
            if self.psi_star > 0.0:
                return phi * cache["target"] + (1.0 - phi) * self.psi_star * cache["proxy"]
            return phi * cache["target"]
        rows = cache["target_pp"]
        if self.t0 > 0:
            full = rows.sum(axis=-1)
            head = rows[..., : self.t0].sum(axis=-1)
            return phi * full + (1.0 - phi) * head
        return rows[..., : self._floor_periods(phi)].sum(axis=-1)

    def incremental_log_weights(self, caches: dict, phi_old: float, phi_new: float) -> np.ndarray:
        if self.strategy == "dt" and self.t0 == 0:
            t_old, t_new = self._floor_periods(phi_old), self._floor_periods(phi_new)
            return caches["target_pp"][:, t_old:t_new].sum(axis=1)
        return self.combine_cached(caches, phi_new) - self.combine_cached(caches, phi_old)

    def incremental_log_weights_continuous(self, caches: dict, phi_old: float,
                                           phi: float) -> np.ndarray:
        """Increment used by the schedule solver; for plain data tempering the
        sample-size breakpoints are relaxed by fractional interpolation."""
        if self.strategy == "dt" and self.t0 == 0:
            rows = caches["target_pp"]
            t_old = self._floor_periods(phi_old)
            k = self._floor_periods(phi)
            out = rows[:, t_old:k].sum(axis=1)
            frac = phi * self.n_data_periods - k
            if frac > 0.0 and k < self.n_data_periods:
                out = out + frac * rows[:, k]
            return out
        return self.incremental_log_weights(caches, phi_old, phi)

    def snap_phi(self, phi_star: float, phi_old: float) -> float:
        """Round the solved exponent to an attainable value (data tempering
        snaps up to the next sample-size breakpoint)."""
        if self.strategy != "dt" or self.t0 > 0:
            return phi_star
        t_next = max(
            self._floor_periods(phi_old) + 1,
            int(np.ceil(phi_star * self.n_data_periods - 1e-9)),
        )
        return min(1.0, t_next / self.n_data_periods)

    # ---- likelihood evaluation -------------------------------------------

    def _eval_model(self, model: ModelSpec, theta_own: np.ndarray,
                    rng: np.random.Generator | None, per_period: bool):
        if per_period:
            _, pp = model.per_period_log_likelihood(theta_own, self.data, rng)
            return pp
        return model.log_likelihood(theta_own, self.data, rng)

    def evaluate_single(self, theta: np.ndarray, seed: int, stage: int,
                        particle: int, counter: int,
                        names: list[str] | None = None) -> dict:
        """Fresh likelihood cache entries for one parameter vector."""
        if names is None:
            names = self.cache_names()
        out = {}
        if "target_pp" in names:
            rng = (None if self.m1.deterministic
                   else rngmod.stream(seed, rngmod.LIK_TARGET, stage, particle, counter))
            out["target_pp"] = self._eval_model(self.m1, theta[self.idx_m1], rng, True)
        if "target" in names:
            rng = (None if self.m1.deterministic
                   else rngmod.stream(seed, rngmod.LIK_TARGET, stage, particle, counter))
            out["target"] = self._eval_model(self.m1, theta[self.idx_m1], rng, False)
        if "proxy" in names:
            rng0 = (None if self.m0.deterministic
                    else rngmod.stream(seed, rngmod.LIK_PROXY, stage, particle, counter))
            out["proxy"] = self._eval_model(self.m0, theta[self.idx_m0], rng0, False)
        return out

    def evaluate_caches(self, values: np.ndarray, config: SmcConfig, stage: int,
                        skip: dict | None = None) -> tuple[dict, dict]:
        """Evaluate likelihood caches for a whole swarm (stage-0 filling).

        ``skip`` maps cache names to pre-filled arrays (e.g. lifted from a
        completed proxy run) that should not be recomputed.  Returns the
        cache dict and per-name evaluation counts.
        """
        n = values.shape[0]
        skip = skip or {}
        names = [c for c in self.cache_names() if c not in skip]
        caches = dict(skip)
        counts = {name: 0 for name in self.cache_names()}
        if names:
            rows = parallel_map(
                lambda i: self.evaluate_single(values[i], config.seed, stage, i, 0, names),
                range(n),
                worker_count(config.n_threads),
            )
            for name in names:
                caches[name] = np.array([r[name] for r in rows])
                counts[name] = n
        return caches, counts

    # ---- stage 0 -----------------------------------------------------------

    def sample_stage0(self, config: SmcConfig) -> ParticleSystem:
        """Stage-0 swarm from the bridge's own sampling contract: prior draws
        (or the direct sampler), with an internal anchor-sample warmup run for
        anchored data tempering.  Model-tempering bridges with psi_star > 0
        need a completed proxy-posterior run and must be initialized via
        ``init_stage0``."""
        if self.stage0 == "m0_posterior" and self.psi_star > 0.0:
            raise InvalidConfig(
                "model-tempering stage 0 requires a completed proxy run; "
                "build the swarm with init_stage0()"
            )
        if self.strategy == "dt" and self.t0 > 0:
            return _init_from_run(self, config, _dt_warmup_run(self, config),
                                  lift_proxy=False)
        n = config.n_particles
        if self.stage0 == "direct":
            draw = self.m0.prior_sample
        else:
            draw = self.prior_sample
        values = np.empty((n, self.dim))
        for i in range(n):
            values[i] = draw(rngmod.stream(config.seed, rngmod.INIT, i))
        caches, counts = self.evaluate_caches(values, config, stage=0)
        ps = ParticleSystem(values=values, log_weights=np.zeros(n), stage=0, phi=0.0,
                            cached_logliks=caches)
        ps._init_eval_counts = counts
        return ps


def _dt_n_periods(model: ModelSpec, data) -> int:
    if model.n_periods is not None:
        return model.n_periods(data)
    return len(data)


def likelihood_tempering(m1: ModelSpec, data=None) -> BridgeSpec:
    """Bridge from the prior to the m1 posterior by powering the likelihood."""
    d = m1.dim
    return BridgeSpec(
        strategy="lt", m1=m1, data=data, stage0="prior",
        param_meta=list(m1.param_meta),
        idx_m1=np.arange(d), idx_m1_only=np.array([], dtype=int),
        idx_m0_only=np.array([], dtype=int),
    )


def data_tempering(m1: ModelSpec, data, t0: int = 0) -> BridgeSpec:
    """Bridge that grows the estimation sample with the exponent."""
    if m1.per_period_log_likelihood is None:
        raise InvalidConfig("data tempering needs a per-period likelihood")
    n_per = _dt_n_periods(m1, data)
    if not 0 <= t0 < n_per:
        raise InvalidConfig("data tempering requires 0 <= t0 < T")
    d = m1.dim
    return BridgeSpec(
        strategy="dt", m1=m1, data=data, t0=t0, stage0="prior",
        param_meta=list(m1.param_meta),
        idx_m1=np.arange(d), idx_m1_only=np.array([], dtype=int),
        idx_m0_only=np.array([], dtype=int),
        n_data_periods=n_per,
    )


def model_tempering(m0: ModelSpec, m1: ModelSpec, data=None, psi_star: float = 1.0,
                    stage0: str | None = None) -> BridgeSpec:
    """Geometric bridge between a proxy model's (tempered) posterior and the
    target posterior.  psi_star = 0 degenerates to likelihood tempering of m1.
    """
    if not 0.0 <= psi_star <= 1.0:
        raise InvalidConfig("psi_star must lie in [0, 1]")
    m0_common = [m for m in m0.param_meta if m.tag == "common"]
    m1_common = [m for m in m1.param_meta if m.tag == "common"]
    if [(m.name, m.transform) for m in m0_common] != [(m.name, m.transform) for m in m1_common]:
        raise LayoutMismatch("proxy and target models disagree on the common block")
    m0_only = [m for m in m0.param_meta if m.tag == "m0_only"]
    m1_only = [m for m in m1.param_meta if m.tag == "m1_only"]
    if m0_only and (m0.specific_log_prior is None or m0.specific_sample is None):
        raise LayoutMismatch("proxy model with own parameters must provide their prior")
    if m1_only and (m1.specific_log_prior is None or m1.specific_sample is None):
        raise LayoutMismatch("target model with own parameters must provide their prior")

    union = m1_common + m0_only + m1_only
    names = [m.name for m in union]
    d_c, d_0 = len(m1_common), len(m0_only)

    def locate(sub: list[ParamMeta], offset_map: dict) -> np.ndarray:
        return np.array([offset_map[m.name] for m in sub], dtype=int)

    pos = {name: j for j, name in enumerate(names)}
    idx_m0 = locate(m0.param_meta, pos)
    idx_m1 = locate(m1.param_meta, pos)

    if stage0 is None:
        stage0 = "m0_posterior" if psi_star > 0.0 else "prior"
    return BridgeSpec(
        strategy="mt", m1=m1, m0=m0, data=data, psi_star=psi_star, stage0=stage0,
        param_meta=union,
        idx_m1=idx_m1, idx_m0=idx_m0,
        idx_m0_only=np.arange(d_c, d_c + d_0),
        idx_m1_only=np.arange(d_c + d_0, len(union)),
    )


def bridge_log_kernel(bridge: BridgeSpec, theta: np.ndarray, phi: float,
                      cached: dict | None = None) -> float:
    """Stage-phi posterior kernel log p_n(Y|theta) + log p(theta).

    Without a cache, every needed likelihood must be deterministic; particle
    filter estimates have to be evaluated once per (theta, stage) and reused.
    """
    theta = np.asarray(theta, dtype=float)
    lp = bridge.log_prior(theta)
    if lp == -np.inf:
        return -np.inf
    if cached is None:
        models = [bridge.m1] if bridge.strategy != "mt" or bridge.psi_star == 0.0 \
            else [bridge.m1, bridge.m0]
        if any(not m.deterministic for m in models):
            raise MissingCache(
                "nondeterministic likelihood requires cached values per (theta, stage)"
            )
        cached = bridge.evaluate_single(theta, seed=0, stage=0, particle=0, counter=0)
    return float(bridge.combine_cached(cached, phi)) + lp


def init_stage0(bridge: BridgeSpec, config: SmcConfig,
                m0_run: SmcRunResult | None = None) -> ParticleSystem:
    """Build the stage-0 swarm for a bridge.

    Likelihood/data tempering draw from the prior.  Model tempering takes the
    common (and proxy-specific) coordinates from the completed tempered-proxy
    run -- resampled to equal weights if degenerate or of different size --
    and fills the target-specific coordinates with prior draws.  Deterministic
    proxy likelihood values are lifted from the run's cache.
    """
    if bridge.strategy != "mt" or bridge.psi_star == 0.0 or bridge.stage0 == "direct":
        if bridge.strategy == "dt" and bridge.t0 > 0 and m0_run is not None:
            return _init_from_run(bridge, config, m0_run, lift_proxy=False)
        return bridge.sample_stage0(config)
    if m0_run is None:
        raise InvalidConfig("model tempering with psi_star > 0 needs a proxy run")
    if abs(m0_run.terminal_phi - bridge.psi_star) > 1e-9:
        raise LayoutMismatch(
            f"proxy run terminated at {m0_run.terminal_phi}, bridge expects "
            f"psi_star={bridge.psi_star}"
        )
    return _init_from_run(bridge, config, m0_run, lift_proxy=True)


def _equalized_swarm(swarm: ParticleSystem, config: SmcConfig) -> ParticleSystem:
    n = config.n_particles
    if swarm.n_particles == n and compute_ess(swarm) >= n * (1.0 - 1e-12):
        return swarm
    idx = systematic_resample(
        swarm.weights, rngmod.stream(config.seed, rngmod.INIT_RESAMPLE), n_out=n
    )
    return swarm.take(idx)


def _init_from_run(bridge: BridgeSpec, config: SmcConfig, run: SmcRunResult,
                   lift_proxy: bool) -> ParticleSystem:
    src_model = bridge.m0 if lift_proxy else bridge.m1
    swarm = run.final_particles
    if swarm.dim != src_model.dim:
        raise LayoutMismatch(
            f"proxy swarm has dimension {swarm.dim}, model expects {src_model.dim}"
        )
    swarm = _equalized_swarm(swarm, config)
    n = config.n_particles
    values = np.empty((n, bridge.dim))
    if lift_proxy:
        values[:, bridge.idx_m0] = swarm.values
        fill_idx = bridge.idx_m1_only
        sampler = bridge.m1.specific_sample
    else:
        values[:, bridge.idx_m1] = swarm.values
        fill_idx = np.array([], dtype=int)
        sampler = None
    for i in range(n):
        if fill_idx.size > 0:
            values[i, fill_idx] = sampler(rngmod.stream(config.seed, rngmod.INIT, i))

    skip = {}
    if lift_proxy and bridge.m0.deterministic and "target" in swarm.cached_logliks:
        skip["proxy"] = swarm.cached_logliks["target"].copy()
    caches, counts = bridge.evaluate_caches(values, config, stage=0, skip=skip)
    ps = ParticleSystem(values=values, log_weights=np.zeros(n), stage=0, phi=0.0,
                        cached_logliks=caches)
    ps._init_eval_counts = counts
    return ps


def _dt_warmup_run(bridge: BridgeSpec, config: SmcConfig) -> SmcRunResult:
    """Posterior run on the anchor sample Y_{1:T0} used to start anchored
    data tempering (run with a derived seed so streams stay independent)."""
    head = bridge.data[: bridge.t0 + (len(bridge.data) - bridge.n_data_periods)]
    warm_bridge = likelihood_tempering(bridge.m1, head)
    warm_config = SmcConfig(
        n_particles=config.n_particles, alpha=config.alpha,
        resample_threshold=config.resample_threshold, n_mh=config.n_mh,
        n_blocks=config.n_blocks, initial_scale=config.initial_scale,
        target_accept=config.target_accept,
        seed=rngmod.derive_seed(config.seed, 1), max_stages=config.max_stages,
        n_threads=config.n_threads,
    )
    return run_smc(warm_bridge, warm_config)


def run_tempered_m0(m0: ModelSpec, psi_star: float, config: SmcConfig,
                    data=None) -> SmcRunResult:
    """Likelihood-tempering run on the proxy model, terminated at exponent
    psi_star instead of one.  The resulting swarm approximates the tempered
    proxy posterior that seeds a model-tempering run."""
    if not 0.0 < psi_star <= 1.0:
        raise InvalidConfig("psi_star must lie in (0, 1]")
    bridge = likelihood_tempering(m0, data)
    return run_smc(bridge, config, phi_max=psi_star)

"""Command-line front end: simulate, estimate, sweep, assess, report.

Configuration precedence is defaults < profile < config file < explicit
flags.  Runs write a record directory containing the resolved config, the
per-stage schedule trace, the final particle swarm, a deterministic summary
(byte-identical across repeated runs with the same seed and any thread
count), and a separate timing file for wall-clock measurements.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, rng as rngmod
from .bridges import (
    BridgeSpec,
    init_stage0,
    likelihood_tempering,
    data_tempering,
    model_tempering,
    run_tempered_m0,
)
from .diagnostics import (
    RuntimeModel,
    build_runtime_model,
    importance_weight_variance,
    measure_tau,
    multi_run,
    predicted_runtime,
    runtime_reduction,
    runtime_reduction_limit,
    summarize_run,
)
from .engine import ParticleSystem, SmcConfig, SmcRunResult, log_mdd_ratio, run_smc
from .errors import InvalidConfig, TsmcError
from .models import (
    DGP_PRESETS,
    GaussianToySpec,
    linear_oracle_pair,
    simulate_oracle_data,
    toy_bridge,
    varsv_model_pair,
    varsv_simulate,
)
from .transforms import constrain_matrix

PROFILES = {
    "desk": {"t_obs": 50, "n_particles": 200, "m_bspf": 100, "n_run": 20},
    "paper": {"t_obs": 100, "n_particles": 500, "m_bspf": 100, "n_run": 200},
}

PSI_GRID_DEFAULT = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]


@dataclass
class RunConfig:
    """Resolved run configuration; round-trips losslessly through JSON."""

    model: str = "dgp1"
    data: str | None = None
    strategy: str = "mt"
    psi: list[float] = field(default_factory=lambda: list(PSI_GRID_DEFAULT))
    n_particles: int = 200
    alpha: float = 0.95
    resample_threshold: float = 0.5
    n_mh: int = 1
    n_blocks: int = 1
    initial_scale: float = 0.5
    target_accept: float = 0.25
    seed: int = 0
    max_stages: int = 1000
    m_bspf: int = 100
    t_obs: int = 50
    t0: int = 0
    gap: float = 0.05
    toy_mu: float = -3.0
    toy_sigma: float = 0.2
    n_run: int = 20
    out: str = "runs/out"
    profile: str = "desk"
    m0_run: str | None = None

    def validate(self):
        if self.strategy not in ("lt", "dt", "mt"):
            raise InvalidConfig(f"unknown strategy {self.strategy!r}")
        if self.model not in ("toy", "oracle", *DGP_PRESETS):
            raise InvalidConfig(f"unknown model {self.model!r}")
        if any(not 0.0 <= p <= 1.0 for p in self.psi):
            raise InvalidConfig("psi values must lie in [0, 1]")
        if self.t_obs < 1:
            raise InvalidConfig("t_obs must be positive")
        if self.n_run < 1:
            raise InvalidConfig("n_run must be at least 1")
        if self.data is not None and not Path(self.data).exists():
            raise InvalidConfig(f"data path {self.data} does not exist")
        if self.m0_run is not None and not Path(self.m0_run).exists():
            raise InvalidConfig(f"m0 run path {self.m0_run} does not exist")

    def smc_config(self, seed: int | None = None) -> SmcConfig:
        return SmcConfig(
            n_particles=self.n_particles,
            alpha=self.alpha,
            resample_threshold=self.resample_threshold,
            n_mh=self.n_mh,
            n_blocks=self.n_blocks,
            initial_scale=self.initial_scale,
            target_accept=self.target_accept,
            seed=self.seed if seed is None else seed,
            max_stages=self.max_stages,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged = asdict(RunConfig())
    profile = getattr(args, "profile", None)
    cfg_path = getattr(args, "config", None)
    file_cfg = {}
    if cfg_path:
        with open(cfg_path) as fh:
            file_cfg = json.load(fh)
        profile = profile or file_cfg.get("profile")
    if profile:
        if profile not in PROFILES:
            raise InvalidConfig(f"unknown profile {profile!r}")
        merged.update(PROFILES[profile])
        merged["profile"] = profile
    merged.update({k: v for k, v in file_cfg.items() if k != "profile"})
    for key in RunConfig.__dataclass_fields__:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    cfg = RunConfig.from_dict(merged)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# data and model wiring
# ---------------------------------------------------------------------------

def load_matrix(path: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))


def save_matrix(path: Path, data: np.ndarray, header: str):
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def resolve_data(config: RunConfig) -> np.ndarray | None:
    """Load external data, or simulate from the preset with a derived seed."""
    if config.model == "toy":
        return None
    if config.data is not None:
        return load_matrix(config.data)
    sim_rng = rngmod.stream(config.seed, rngmod.SIMULATE)
    if config.model == "oracle":
        return simulate_oracle_data(config.t_obs, sim_rng, gap=config.gap)
    data, _ = varsv_simulate(DGP_PRESETS[config.model], config.t_obs, sim_rng)
    return data


def build_bridge(config: RunConfig, data, psi: float) -> BridgeSpec:
    if config.model == "toy":
        if config.strategy != "mt":
            raise InvalidConfig("the toy model defines a direct density bridge (mt only)")
        return toy_bridge(GaussianToySpec(mu=config.toy_mu, sigma=config.toy_sigma))
    if config.model == "oracle":
        m0, m1 = linear_oracle_pair(data, gap=config.gap, m1_bspf=True,
                                    m_bspf=config.m_bspf)
    else:
        m0, m1 = varsv_model_pair(data, m_bspf=config.m_bspf)
    if config.strategy == "lt":
        return likelihood_tempering(m1, data)
    if config.strategy == "dt":
        return data_tempering(m1, data, t0=config.t0)
    return model_tempering(m0, m1, data, psi_star=psi)


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

def write_particles_csv(path: Path, bridge: BridgeSpec, swarm: ParticleSystem):
    names = [m.name for m in bridge.param_meta]
    constrained = constrain_matrix(swarm.values, bridge.param_meta)
    cache_cols = []
    header = [f"u_{n}" for n in names] + names + ["weight"]
    for key in ("target", "proxy"):
        if key in swarm.cached_logliks:
            header.append(f"loglik_{key}")
            cache_cols.append(swarm.cached_logliks[key])
    if "target_pp" in swarm.cached_logliks:
        header.append("loglik_target")
        cache_cols.append(swarm.cached_logliks["target_pp"].sum(axis=1))
    cols = [swarm.values, constrained, swarm.weights[:, None]]
    cols += [c[:, None] for c in cache_cols]
    save_matrix(path, np.hstack(cols), ",".join(header))


def write_schedule_csv(path: Path, result: SmcRunResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "phi", "ess", "resampled", "accept_rate",
                    "scale", "log_mdd_increment"])
        for i in range(result.n_stages):
            w.writerow([
                i + 1, repr(result.schedule[i]), repr(result.ess_history[i]),
                int(result.resampled_flags[i]), repr(result.accept_rates[i]),
                repr(result.scale_history[i]), repr(result.log_mdd_increments[i]),
            ])


def summary_payload(config: RunConfig, bridge: BridgeSpec, result: SmcRunResult,
                    psi: float, m0_result: SmcRunResult | None) -> dict:
    extra = log_mdd_ratio(m0_result) if m0_result is not None else 0.0
    stats = summarize_run(result, bridge.param_meta, extra_log_mdd=extra)
    params = []
    for j, meta in enumerate(bridge.param_meta):
        params.append({
            "name": meta.name,
            "transform": meta.transform,
            "tag": meta.tag,
            "mean": stats.post_mean[j],
            "var": stats.post_var[j],
            "sd": float(np.sqrt(stats.post_var[j])),
            "q05": stats.post_q05[j],
            "q95": stats.post_q95[j],
        })
    return {
        "version": __version__,
        "model": config.model,
        "strategy": config.strategy,
        "psi": psi,
        "seed": config.seed,
        "n_particles": config.n_particles,
        "log_mdd": stats.log_mdd,
        "log_mdd_run": log_mdd_ratio(result),
        "log_mdd_m0": extra,
        "n_stages": result.n_stages,
        "n_stages_total_m1": result.n_stages + 1,
        "n_stages_total_m0": 0 if m0_result is None else m0_result.n_stages + 1,
        "terminal_phi": result.terminal_phi,
        "schedule": result.schedule,
        "resampled": [int(x) for x in result.resampled_flags],
        "likelihood_eval_counts": result.likelihood_eval_counts,
        "evals_per_stage": config.n_particles * config.n_mh * config.n_blocks,
        "params": params,
    }


def write_run_record(out: Path, config: RunConfig, bridge: BridgeSpec,
                     result: SmcRunResult, psi: float,
                     m0_result: SmcRunResult | None, timing: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json() + "\n")
    write_schedule_csv(out / "schedule.csv", result)
    write_particles_csv(out / "particles.csv", bridge, result.final_particles)
    payload = summary_payload(config, bridge, result, psi, m0_result)
    (out / "summary.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    (out / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")


def load_m0_run(path: Path) -> SmcRunResult:
    """Rebuild a tempered-proxy run from its record directory; particle
    values and cached log-likelihoods round-trip at full precision."""
    summary = json.loads((path / "summary.json").read_text())
    with open(path / "particles.csv") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(x) for x in row] for row in reader])
    u_cols = [i for i, h in enumerate(header) if h.startswith("u_")]
    w_col = header.index("weight")
    lik_col = header.index("loglik_target")
    values = rows[:, u_cols]
    weights = rows[:, w_col]
    swarm = ParticleSystem(
        values=values,
        log_weights=np.log(np.maximum(weights, 1e-300)),
        stage=summary["n_stages"],
        phi=summary["terminal_phi"],
        cached_logliks={"target": rows[:, lik_col]},
    )
    return SmcRunResult(
        final_particles=swarm,
        schedule=list(summary["schedule"]),
        ess_history=[],
        resampled_flags=[bool(x) for x in summary["resampled"]],
        accept_rates=[],
        log_mdd_increments=[summary["log_mdd_run"]],
        n_stages=summary["n_stages"],
        wall_times=[],
        likelihood_eval_counts=dict(summary["likelihood_eval_counts"]),
        terminal_phi=summary["terminal_phi"],
    )


# ---------------------------------------------------------------------------
# estimation pipeline (shared by estimate / sweep / assess)
# ---------------------------------------------------------------------------

def run_estimate(config: RunConfig, data, psi: float, seed: int,
                 m0_run_path: Path | None = None, out: Path | None = None):
    """One full estimation: optional tempered-proxy run, stage-0 swarm,
    target run.  Returns (bridge, result, m0_result, timing dict)."""
    bridge = build_bridge(config, data, psi)
    smc_cfg = config.smc_config(seed)
    t_start = time.perf_counter()

    m0_result = None
    m0_wall = 0.0
    if config.strategy == "mt" and psi > 0.0 and config.model != "toy":
        if m0_run_path is not None:
            m0_result = load_m0_run(m0_run_path)
            if abs(m0_result.terminal_phi - psi) > 1e-9:
                raise InvalidConfig(
                    f"reused proxy run terminated at {m0_result.terminal_phi}, "
                    f"but psi={psi} was requested"
                )
        else:
            t0 = time.perf_counter()
            m0_cfg = config.smc_config(rngmod.derive_seed(seed, 2))
            m0_result = run_tempered_m0(bridge.m0, psi, m0_cfg, data)
            m0_wall = time.perf_counter() - t0
            if out is not None:
                m0_bridge = likelihood_tempering(bridge.m0, data)
                write_run_record(
                    out / "m0_run", config, m0_bridge, m0_result, psi, None,
                    {"wall_seconds": m0_wall},
                )

    init = init_stage0(bridge, smc_cfg, m0_result)
    result = run_smc(bridge, smc_cfg, init=init)
    total_wall = time.perf_counter() - t_start
    timing = {
        "wall_seconds_total": total_wall,
        "wall_seconds_m0": m0_wall,
        "wall_seconds_m1_stages": float(np.sum(result.wall_times)),
    }
    return bridge, result, m0_result, timing


def measure_likelihood_taus(config: RunConfig, data, n_calls: int = 100):
    """Median per-call seconds of the proxy and target likelihoods at a
    prior-mean parameter value."""
    bridge = build_bridge(config, data, psi=1.0)
    if bridge.strategy != "mt":
        raise InvalidConfig("tau measurement needs a model pair")
    draws = np.vstack([
        bridge.prior_sample(rngmod.stream(config.seed, rngmod.INIT, i))
        for i in range(64)
    ])
    theta = draws.mean(axis=0)
    rng = rngmod.stream(config.seed, rngmod.LIK_TARGET, 0, 0)
    tau1 = measure_tau(
        lambda: bridge.m1.log_likelihood(theta[bridge.idx_m1], data, rng), n_calls
    )
    tau0 = measure_tau(
        lambda: bridge.m0.log_likelihood(theta[bridge.idx_m0], data, None), n_calls
    )
    return tau0, tau1


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(config: RunConfig) -> int:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    sim_rng = rngmod.stream(config.seed, rngmod.SIMULATE)
    if config.model == "oracle":
        data = simulate_oracle_data(config.t_obs, sim_rng, gap=config.gap)
        save_matrix(out / "data.csv", data, "y1")
        truth = {"model": "oracle", "gap": config.gap, "seed": config.seed}
    elif config.model in DGP_PRESETS:
        params = DGP_PRESETS[config.model]
        data, vols = varsv_simulate(params, config.t_obs, sim_rng)
        save_matrix(out / "data.csv", data, "y1,y2")
        save_matrix(out / "volatility.csv", vols, "d1,d2")
        truth = {
            "model": config.model,
            "seed": config.seed,
            "phi1": params.phi1.tolist(),
            "phic": params.phic.tolist(),
            "sigma": params.sigma.tolist(),
            "rho": params.rho.tolist(),
            "xi": params.xi.tolist(),
        }
    else:
        raise InvalidConfig(f"model {config.model!r} has no simulator")
    (out / "true_params.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    print(f"wrote {config.t_obs} periods to {out}")
    return 0


def cmd_estimate(config: RunConfig) -> int:
    data = resolve_data(config)
    psi = config.psi[0] if config.strategy == "mt" else 0.0
    if config.strategy == "mt" and len(config.psi) != 1:
        raise InvalidConfig("estimate expects a single psi value (use sweep for a grid)")
    out = Path(config.out)
    m0_path = Path(config.m0_run) if config.m0_run else None
    bridge, result, m0_result, timing = run_estimate(
        config, data, psi, config.seed, m0_run_path=m0_path, out=out
    )
    if config.strategy == "mt" and psi > 0.0 and config.model != "toy":
        tau0, tau1 = measure_likelihood_taus(config, data, n_calls=25)
        rm = build_runtime_model(result, m0_result, tau0, tau1, config.smc_config())
        timing.update({
            "tau0": tau0,
            "tau1": tau1,
            "predicted_runtime_seconds": predicted_runtime(rm, psi),
        })
    write_run_record(out, config, bridge, result, psi, m0_result, timing)
    summary = json.loads((out / "summary.json").read_text())
    print(f"log MDD {summary['log_mdd']:+.4f}  stages {summary['n_stages']}  -> {out}")
    return 0


def cmd_sweep(config: RunConfig) -> int:
    if config.strategy != "mt":
        raise InvalidConfig("sweep varies psi and requires the mt strategy")
    data = resolve_data(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    tau0, tau1 = measure_likelihood_taus(config, data, n_calls=25)

    profiles = []
    status_rows = []
    baseline = None
    for psi in config.psi:
        cell = {"psi": psi}

        def one_run(seed, _psi=psi):
            bridge, result, m0_result, timing = run_estimate(config, data, _psi, seed)
            extra = log_mdd_ratio(m0_result) if m0_result is not None else 0.0
            stats = summarize_run(result, bridge.param_meta, extra_log_mdd=extra,
                                  wall_time=timing["wall_seconds_total"])
            stats.n_stages_m0 = 0 if m0_result is None else m0_result.n_stages + 1
            return stats

        mrs = multi_run(one_run, config.n_run, config.seed)
        for idx, msg in mrs.failures:
            status_rows.append([psi, idx, "error", msg])
        for i in range(mrs.n_completed):
            status_rows.append([psi, i, "ok", ""])
        cell["stats"] = mrs
        cell["mean_wall"] = float(np.mean(mrs.wall_times))
        cell["mean_n1"] = float(np.mean(mrs.n_stages)) + 1.0
        cell["mean_n0"] = float(np.mean([r.n_stages_m0 for r in mrs.runs]))
        profiles.append(cell)
        if psi == 0.0:
            baseline = cell
        print(f"psi={psi:.1f}  mean log MDD {mrs.mean_log_mdd():+.3f} "
              f"(sd {mrs.sd_log_mdd():.3f})  stages {cell['mean_n1']:.1f}"
              f"+{cell['mean_n0']:.1f}  wall {cell['mean_wall']:.2f}s")

    if baseline is None:
        baseline = profiles[0]

    with open(out / "logmdd_profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "mean_log_mdd", "sd_log_mdd",
                    "q05", "q95", "q025", "q975", "n_run"])
        for cell in profiles:
            vals = cell["stats"].log_mdd
            w.writerow([
                cell["psi"], np.mean(vals), np.std(vals, ddof=1) if len(vals) > 1 else "",
                np.quantile(vals, 0.05), np.quantile(vals, 0.95),
                np.quantile(vals, 0.025), np.quantile(vals, 0.975), len(vals),
            ])

    with open(out / "runtime_profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "mean_wall_seconds", "measured_ratio",
                    "predicted_ratio", "limit_ratio", "mean_stages_m1", "mean_stages_m0",
                    "tau0", "tau1"])
        cfg0 = config.smc_config()
        n_star = cfg0.n_particles * cfg0.n_mh * cfg0.n_blocks
        rm0 = RuntimeModel(0, max(baseline["mean_n1"], 1.0), tau0, tau1, n_star)
        for cell in profiles:
            rm = RuntimeModel(cell["mean_n0"], cell["mean_n1"], tau0, tau1, n_star)
            w.writerow([
                cell["psi"], cell["mean_wall"],
                cell["mean_wall"] / baseline["mean_wall"],
                runtime_reduction(rm0, rm, cell["psi"]),
                runtime_reduction_limit(rm0, rm),
                cell["mean_n1"], cell["mean_n0"], tau0, tau1,
            ])

    with open(out / "posterior_profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "param", "mean_of_means", "sd_of_means"])
        for cell in profiles:
            mrs = cell["stats"]
            mm, sm = mrs.mean_post_mean(), mrs.sd_post_mean()
            for j, name in enumerate(mrs.param_names):
                w.writerow([cell["psi"], name, mm[j], sm[j]])

    with open(out / "sweep_status.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "run_index", "status", "message"])
        w.writerows(status_rows)

    print(f"sweep written to {out}")
    return 0


def cmd_assess(config: RunConfig) -> int:
    """Ex-ante importance-weight variance of reweighting tempered-proxy draws
    to the target posterior, per psi."""
    if config.model == "toy":
        raise InvalidConfig("assess needs a model pair")
    data = resolve_data(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    n = config.n_particles
    for psi in config.psi:
        bridge = build_bridge(config, data, psi)
        smc_cfg = config.smc_config()
        if psi > 0.0:
            m0_cfg = config.smc_config(rngmod.derive_seed(config.seed, 2))
            m0_result = run_tempered_m0(bridge.m0, psi, m0_cfg, data)
            swarm = init_stage0(bridge, smc_cfg, m0_result)
        else:
            swarm = init_stage0(bridge, smc_cfg)
        caches = swarm.cached_logliks
        var = importance_weight_variance(caches["target"], caches.get("proxy"), psi)
        rows.append([psi, var, var / (n - 1), int(var < 0.5 * (n - 1))])
        print(f"psi={psi:.1f}  weight variance {var:10.2f}  /(N-1) {var/(n-1):.3f}"
              f"  promising={'yes' if var < 0.5*(n-1) else 'no'}")
    with open(out / "assess.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "weight_variance", "ratio_to_nminus1", "promising"])
        w.writerows(rows)
    return 0


def cmd_report(config: RunConfig, run_dir: str) -> int:
    path = Path(run_dir)
    summary = json.loads((path / "summary.json").read_text())
    timing = {}
    if (path / "timing.json").exists():
        timing = json.loads((path / "timing.json").read_text())
    print(f"model {summary['model']}  strategy {summary['strategy']}"
          f"  psi {summary['psi']}  seed {summary['seed']}")
    print(f"log MDD {summary['log_mdd']:+.4f}"
          f"  (run {summary['log_mdd_run']:+.4f}, proxy {summary['log_mdd_m0']:+.4f})")
    print(f"stages: target {summary['n_stages_total_m1']}, "
          f"proxy {summary['n_stages_total_m0']}")
    if timing:
        print(f"wall seconds: {timing.get('wall_seconds_total', float('nan')):.2f}")
    print(f"{'param':>12} {'mean':>10} {'sd':>10} {'q05':>10} {'q95':>10}")
    for p in summary["params"]:
        print(f"{p['name']:>12} {p['mean']:>10.4f} {p['sd']:>10.4f}"
              f" {p['q05']:>10.4f} {p['q95']:>10.4f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--model", choices=["toy", "oracle", "dgp1", "dgp2", "dgp3"])
    p.add_argument("--data")
    p.add_argument("--strategy", choices=["lt", "dt", "mt"])
    p.add_argument("--psi", type=_psi_list)
    p.add_argument("--particles", dest="n_particles", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-run", dest="n_run", type=int)
    p.add_argument("--profile", choices=list(PROFILES))
    p.add_argument("--out")
    p.add_argument("--m0-run", dest="m0_run")
    p.add_argument("--config")
    p.add_argument("--t-obs", dest="t_obs", type=int)
    p.add_argument("--t0", type=int)
    p.add_argument("--m-bspf", dest="m_bspf", type=int)
    p.add_argument("--n-mh", dest="n_mh", type=int)
    p.add_argument("--n-blocks", dest="n_blocks", type=int)
    p.add_argument("--gap", type=float)
    p.add_argument("--toy-mu", dest="toy_mu", type=float)
    p.add_argument("--toy-sigma", dest="toy_sigma", type=float)


def _psi_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse psi list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsmc",
        description="Tempered sequential Monte Carlo posterior sampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in [
        ("simulate", "simulate data from a preset"),
        ("estimate", "run one posterior estimation"),
        ("sweep", "multi-run psi sweep with profile tables"),
        ("assess", "ex-ante importance-weight variance per psi"),
        ("report", "pretty-print a run record"),
    ]:
        p = sub.add_parser(name, help=descr)
        _add_common(p)
        if name == "report":
            p.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "estimate":
            return cmd_estimate(config)
        if args.command == "sweep":
            return cmd_sweep(config)
        if args.command == "assess":
            return cmd_assess(config)
        return cmd_report(config, args.run_dir)
    except InvalidConfig as exc:
        _emit_error(exc)
        return 2
    except OSError as exc:
        _emit_error(exc)
        return 4
    except TsmcError as exc:
        _emit_error(exc)
        return 3


def _emit_error(exc: Exception):
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

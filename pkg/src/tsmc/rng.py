"""Counter-based random stream derivation.

Every stochastic component derives its generator from the run seed plus a
small integer path identifying (subsystem, stage, particle, counter).  Streams
are therefore independent of scheduling and worker count: two particles never
share a stream, and re-deriving the same path reproduces the same draws.
"""

from __future__ import annotations

import numpy as np

# Subsystem slots used as the first element of a stream path.  Keeping them
# distinct guarantees no path collisions across subsystems.
BLOCKS = 0        # per-stage block partition draw
RESAMPLE = 1      # per-stage systematic resampling uniform
MUTATE = 2        # per-(stage, particle) proposal/accept draws
LIK_TARGET = 3    # per-(stage, particle, counter) target-likelihood noise
INIT = 4          # per-particle stage-0 draws
SIMULATE = 5      # data simulation
LIK_PROXY = 6     # per-(stage, particle, counter) proxy-likelihood noise
INIT_RESAMPLE = 7 # equalizing resample of a reused swarm at stage 0
DERIVE = 8        # child-seed derivation (nested runs)


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator keyed by ``(seed, *path)``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(path)))


def derive_seed(seed: int, *path: int) -> int:
    """Derive a child 64-bit seed for a nested run (e.g. the proxy-model run)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(DERIVE, *path))
    return int(ss.generate_state(2, np.uint32).view(np.uint64)[0])

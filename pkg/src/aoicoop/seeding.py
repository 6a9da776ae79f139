"""Deterministic substream derivation from a single master seed.

Every stochastic component draws from a generator keyed by (master seed, tag,
index...) so that unrelated parts of a run never share a stream. Adding an
access point or switching modes therefore leaves all other draws untouched,
which is what makes seeded A/B comparisons exact.
"""

from __future__ import annotations

import numpy as np

# Stream tags. Values are arbitrary but frozen: changing them changes every
# seeded trace.
TAG_DECODE = 1      # per-AP decode outcomes (Bernoulli source)
TAG_JOINT = 2       # joint-decode coupling uniform
TAG_DELAY = 3       # per-AP backbone delay draws
TAG_CHANNEL = 4     # channel gains and noise
TAG_INFO = 5        # packet payload bits
TAG_TABLE = 6       # Monte Carlo probability tables
TAG_JOB = 7         # experiment job seeds
TAG_MC = 8          # in-simulation Monte Carlo decode source


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``key`` under ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, key)]))


def spawn_seed(master_seed: int, *key: int) -> int:
    """64-bit child seed for the stream identified by ``key``."""
    state = np.random.SeedSequence([int(master_seed), *map(int, key)]).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)

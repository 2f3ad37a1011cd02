"""Deterministic RNG substreams.

One episode seed fans out into independent PCG64 streams so that edits to one
consumer (say, the traffic draw for user 7) never shift the randomness seen by
any other. Draw order inside a stream is documented at its consumer.

Spawn-key domains:
  0 = world initialization (candidate positions, selection, destinations)
  1 = traffic, one stream per ground user
  2 = small-scale fading, one stream per (transmitter, receiver) link
  3 = policy randomness (baselines)
"""

from __future__ import annotations

import numpy as np

DOMAIN_INIT = 0
DOMAIN_TRAFFIC = 1
DOMAIN_FADING = 2
DOMAIN_POLICY = 3


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


def init_stream(seed: int) -> np.random.Generator:
    return substream(seed, DOMAIN_INIT)


def traffic_stream(seed: int, gue: int) -> np.random.Generator:
    return substream(seed, DOMAIN_TRAFFIC, gue)


def fading_stream(seed: int, tx: int, rx: int) -> np.random.Generator:
    return substream(seed, DOMAIN_FADING, tx, rx)


def policy_stream(seed: int, agent: int = 0) -> np.random.Generator:
    return substream(seed, DOMAIN_POLICY, agent)

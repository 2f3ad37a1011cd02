"""Baseline schedulers and trajectory controllers for benchmarks and tests.

Scheduling baselines read only the agent's own observation vector (decoded via
the env layout); trajectory baselines read the long observation. Mask-mode
baselines must always emit feasible actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import seeding

GREEDY_AGE_SCALE = float(2 ** 20)  # backlog tie-break stays below one age unit


@dataclass
class PolicyState:
    """Round-robin cursors and the policy RNG substream for one env instance."""

    kind: str
    cursors: dict[str, int] = field(default_factory=dict)
    rng: np.random.Generator | None = None

    @classmethod
    def create(cls, kind: str, seed: int = 0) -> "PolicyState":
        return cls(kind=kind, rng=seeding.policy_stream(seed))


def _decode(obs: np.ndarray, layout: dict, name: str) -> np.ndarray:
    for f in layout["fields"]:
        if f["name"] == name:
            return obs[f["offset"]: f["offset"] + f["length"]]
    raise KeyError(name)


def _gamma_from_obs(obs: np.ndarray, layout: dict) -> np.ndarray:
    backlog = _decode(obs, layout, "buffer_features")[0::3]
    return backlog > 0


def round_robin_schedule(obs: np.ndarray, layout: dict, agent: str,
                         state: PolicyState) -> dict:
    """Rotate a cursor over the static candidate list, skipping empty buffers.

    Skipped (ineligible) candidates do not consume grants; the cursor resumes
    after the last granted candidate, so every persistently eligible candidate
    is visited within ceil(n/cap) slots.
    """
    gamma = _gamma_from_obs(obs, layout)
    n, cap = len(gamma), layout["sched_cap"]
    cursor = state.cursors.get(agent, 0)
    mask = np.zeros(n, dtype=int)
    granted = 0
    last = None
    for off in range(n):
        i = (cursor + off) % n
        if granted == cap:
            break
        if gamma[i]:
            mask[i] = 1
            granted += 1
            last = i
    if last is not None:
        state.cursors[agent] = (last + 1) % n
    return {"mask": mask.tolist()}


def random_schedule(obs: np.ndarray, layout: dict, agent: str,
                    state: PolicyState) -> dict:
    gamma = _gamma_from_obs(obs, layout)
    eligible = np.flatnonzero(gamma)
    cap = layout["sched_cap"]
    mask = np.zeros(len(gamma), dtype=int)
    if len(eligible):
        pick = state.rng.choice(eligible, size=min(cap, len(eligible)), replace=False)
        mask[pick] = 1
    return {"mask": mask.tolist()}


def greedy_latency_schedule(obs: np.ndarray, layout: dict) -> dict:
    """Score candidates by head-of-line age, then backlog; env picks top-k.

    The two keys are packed into one float (age * 2^20 + backlog); exact as
    long as backlogs stay below 2^20, which episode lengths guarantee.
    """
    feats = _decode(obs, layout, "buffer_features")
    backlog = feats[0::3]
    head_age = feats[2::3]
    scores = head_age * GREEDY_AGE_SCALE + np.minimum(backlog, GREEDY_AGE_SCALE - 1)
    return {"scores": scores.tolist()}


def stationary_trajectory(obs: np.ndarray, layout: dict) -> list[float]:
    return [0.0, 0.0]


def track_centroid_trajectory(obs: np.ndarray, layout: dict, v_max: float,
                              block_units: float) -> list[float]:
    """Head for the associated users' centroid within one block, box-clamped."""
    own = _decode(obs, layout, "own_position")
    centroid = _decode(obs, layout, "user_centroid")
    v = (centroid[:2] - own[:2]) / block_units
    return np.clip(v, -v_max, v_max).tolist()


SCHEDULERS = {
    "roundrobin": round_robin_schedule,
    "random": random_schedule,
    "greedy": greedy_latency_schedule,
}

TRAJECTORIES = {
    "stationary": stationary_trajectory,
    "centroid": track_centroid_trajectory,
}


def make_short_actions(policy: str, short_obs: dict, layouts: dict,
                       state: PolicyState) -> dict:
    actions = {}
    for agent, obs in short_obs.items():
        layout = layouts["short"][agent]
        if policy == "greedy":
            actions[agent] = greedy_latency_schedule(obs, layout)
        elif policy == "random":
            actions[agent] = random_schedule(obs, layout, agent, state)
        elif policy == "roundrobin":
            actions[agent] = round_robin_schedule(obs, layout, agent, state)
        else:
            raise ValueError(f"unknown scheduling policy {policy!r}")
    return actions


def make_long_actions(policy: str, long_obs: dict, layouts: dict, v_max: float,
                      block_units: float) -> dict:
    actions = {}
    for agent, obs in long_obs.items():
        layout = layouts["long"][agent]
        if policy == "stationary":
            actions[agent] = stationary_trajectory(obs, layout)
        elif policy == "centroid":
            actions[agent] = track_centroid_trajectory(obs, layout, v_max, block_units)
        else:
            raise ValueError(f"unknown trajectory policy {policy!r}")
    return actions

"""Hyperparameters and the desk scenario definitions used by the experiments."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml


@dataclass
class Hyperparams:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    gamma: float = 0.95
    tau: float = 0.01                  # target-network tracking rate
    batch_size: int = 64
    buffer_capacity: int = 100_000
    hidden: int = 64
    episodes: int = 300
    eps_start: float = 0.4
    eps_end: float = 0.05
    eps_decay_frac: float = 0.6        # linear decay over this fraction of episodes
    explore_sigma: float = 0.1         # Gaussian noise on scheduling actions
    explore_sigma_long: float = 0.3    # wider noise for per-block velocities
    actor_reg: float = 1e-3            # pre-tanh magnitude penalty (anti-saturation)
    update_every: int = 2              # env slots between gradient rounds
    long_warmup_episodes: int = 0      # scheduling-only episodes before the
                                       # trajectory learner starts collecting
    reward_scale: float = 50.0
    grad_clip: float = 1.0
    seed: int = 0
    # on-policy settings (TTS-MAPPO)
    ppo_clip: float = 0.2
    ppo_epochs: int = 4
    ppo_rollout_episodes: int = 4
    gae_lambda: float = 0.95
    entropy_coef: float = 0.0

    def epsilon(self, episode: int) -> float:
        horizon = max(1, int(self.episodes * self.eps_decay_frac))
        frac = min(1.0, episode / horizon)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


# desk scenario: 1 donor, 2 node UAVs, 12 ground users; node-heavy traffic so
# backhaul prioritization and node placement both matter at this scale
DESK_BASE = {
    "n_uuav": 2,
    "assoc_t": 2,
    "assoc_u": 5,
    "n_gue": 12,
    "sched_t": 2,
    "sched_u": 1,
    "candidate_pool": 300,
}


def desk_scenario(mobile: bool, world_seed: int) -> dict:
    cfg = dict(DESK_BASE)
    cfg["v_w"] = 5.0 if mobile else 0.0
    cfg["world_seed"] = world_seed
    return cfg


def write_scenario(cfg: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg, sort_keys=True))
    return path

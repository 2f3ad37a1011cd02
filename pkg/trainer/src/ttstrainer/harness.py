"""Episode harness: training loops over the wire protocol, evaluation, baselines.

Policies expose begin_episode / short_actions / long_actions in env action
space; the harness owns normalization, transition assembly, metrics rows, and
learning-curve output compatible with the simulator's episode CSV schema.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import torch

from .client import EnvClient
from .configs import Hyperparams
from .maddpg import MaddpgGroup
from .nets import make_normalizers

CSV_SCHEMA = 1


def episode_mbps(scenario: dict) -> float:
    packet_bits = float(scenario.get("packet_bits", 3e5))
    episode_len = float(scenario.get("episode_len", 200))
    slot_len = float(scenario.get("slot_len", 0.030))
    return packet_bits / (episode_len * slot_len) / 1e6


class EpisodeStats:
    """Per-episode tallies accumulated from transition info blocks."""

    def __init__(self, n_uav: int):
        self.arrivals = 0
        self.delivered = 0
        self.dropped = 0
        self.per_uav_delivered = [0] * n_uav
        self.per_uav_dropped = [0] * n_uav
        self.slot_delivered: list[int] = []

    def add(self, info: dict) -> None:
        self.arrivals += info["arrivals"]
        self.delivered += info["delivered"]
        self.dropped += info["dropped"]
        for k in range(len(self.per_uav_delivered)):
            self.per_uav_delivered[k] += info["per_uav_delivered"][k]
            self.per_uav_dropped[k] += info["per_uav_dropped"][k]
        self.slot_delivered.append(info["delivered"])

    @property
    def residual(self) -> int:
        return self.arrivals - self.delivered - self.dropped


def write_episode_rows(path: Path, rows: list[dict], n_uav: int) -> None:
    header = (["schema", "episode", "seed", "config_hash", "arrivals",
               "delivered_packets", "dropped_packets", "residual_packets",
               "delivered_mbps", "dropped_mbps"]
              + [f"uav{k}_delivered_mbps" for k in range(n_uav)]
              + [f"uav{k}_dropped_mbps" for k in range(n_uav)])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([CSV_SCHEMA, r["episode"], r["seed"], r["config_hash"],
                        r["arrivals"], r["delivered"], r["dropped"], r["residual"],
                        repr(r["delivered_mbps"]), repr(r["dropped_mbps"])]
                       + [repr(v) for v in r["per_uav_delivered_mbps"]]
                       + [repr(v) for v in r["per_uav_dropped_mbps"]])


def stats_row(episode: int, seed: int, stats: EpisodeStats, client: EnvClient,
              scenario: dict) -> dict:
    to_mbps = episode_mbps(scenario)
    return {
        "episode": episode, "seed": seed,
        "config_hash": client.hello["config_hash"],
        "arrivals": stats.arrivals, "delivered": stats.delivered,
        "dropped": stats.dropped, "residual": stats.residual,
        "delivered_mbps": stats.delivered * to_mbps,
        "dropped_mbps": stats.dropped * to_mbps,
        "per_uav_delivered_mbps": [d * to_mbps for d in stats.per_uav_delivered],
        "per_uav_dropped_mbps": [d * to_mbps for d in stats.per_uav_dropped],
        "slot_delivered": stats.slot_delivered,
    }


# -- policies ----------------------------------------------------------------

class BaselinePolicy:
    """Client-side baselines decoded from the layout descriptors."""

    def __init__(self, client: EnvClient, scheduler: str = "roundrobin",
                 trajectory: str = "stationary", seed: int = 0):
        self.client = client
        self.scheduler = scheduler
        self.trajectory = trajectory
        self.rng = np.random.default_rng(seed)
        self.cursors = {a: 0 for a in client.short_agents}

    def begin_episode(self) -> None:
        pass  # cursors persist across episodes, like the in-simulator baseline

    def _field(self, lay: dict, obs: np.ndarray, name: str) -> np.ndarray:
        f = next(x for x in lay["fields"] if x["name"] == name)
        return obs[f["offset"]: f["offset"] + f["length"]]

    def short_actions(self, short_obs: dict) -> dict:
        actions = {}
        for a, obs in short_obs.items():
            lay = self.client.layouts["short"][a]
            gamma = self._field(lay, obs, "buffer_features")[0::3] > 0
            cap = lay["sched_cap"]
            n = lay["action_dim"]
            mask = np.zeros(n, dtype=int)
            if self.scheduler == "roundrobin":
                granted, last = 0, None
                for off in range(n):
                    i = (self.cursors[a] + off) % n
                    if granted == cap:
                        break
                    if gamma[i]:
                        mask[i] = 1
                        granted += 1
                        last = i
                if last is not None:
                    self.cursors[a] = (last + 1) % n
            elif self.scheduler == "random":
                eligible = np.flatnonzero(gamma)
                if len(eligible):
                    mask[self.rng.choice(eligible, size=min(cap, len(eligible)),
                                         replace=False)] = 1
            else:
                raise ValueError(self.scheduler)
            actions[a] = {"mask": mask.tolist()}
        return actions

    def long_actions(self, long_obs: dict) -> dict:
        out = {}
        for a, obs in long_obs.items():
            lay = self.client.layouts["long"][a]
            if self.trajectory == "stationary":
                out[a] = [0.0, 0.0]
            elif self.trajectory == "centroid":
                own = self._field(lay, obs, "own_position")
                cen = self._field(lay, obs, "user_centroid")
                v = (cen[:2] - own[:2]) / self.client.long_block
                out[a] = np.clip(v, -lay["v_max"], lay["v_max"]).tolist()
            else:
                raise ValueError(self.trajectory)
        return out


class ActorPolicy:
    """Deterministic wrapper over trained groups for evaluation."""

    def __init__(self, client: EnvClient, short_group, long_group=None,
                 normalizers=None):
        self.client = client
        self.short_group = short_group
        self.long_group = long_group
        self.norm = normalizers or make_normalizers(client.layouts)
        self.v_max = {a: client.layouts["long"][a]["v_max"]
                      for a in client.long_agents}

    def begin_episode(self) -> None:
        self.h_short = self.short_group.initial_hidden()
        self.h_long = self.long_group.initial_hidden() if self.long_group else None

    def short_actions(self, short_obs: dict) -> dict:
        obs = {a: self.norm["short"][a](short_obs[a]) for a in short_obs}
        acts, self.h_short = self.short_group.act(obs, self.h_short,
                                                  epsilon=0.0, noise_sigma=0.0)
        return {a: v.tolist() for a, v in acts.items()}

    def long_actions(self, long_obs: dict) -> dict:
        if self.long_group is None:
            return {a: [0.0, 0.0] for a in long_obs}
        obs = {a: self.norm["long"][a](long_obs[a]) for a in long_obs}
        acts, self.h_long = self.long_group.act(obs, self.h_long,
                                                epsilon=0.0, noise_sigma=0.0)
        return {a: (self.v_max[a] * v).tolist() for a, v in acts.items()}


def run_policy_episode(client: EnvClient, policy, seed: int) -> EpisodeStats:
    """One full episode under a fixed policy; returns the tally."""
    n_uav = len(client.short_agents)
    stats = EpisodeStats(n_uav)
    short_obs, long_obs = client.reset(seed)
    policy.begin_episode()
    done = False
    slot = 0
    while not done:
        la = policy.long_actions(long_obs) if slot % client.long_block == 0 else None
        t = client.step(policy.short_actions(short_obs), la)
        stats.add(t["info"])
        short_obs = t["short_obs"]
        if t.get("long_obs") is not None:
            long_obs = t["long_obs"]
        done = t["done"]
        slot += 1
    return stats


def evaluate(client: EnvClient, policy, scenario: dict, seeds: list[int],
             out_csv: Path | None = None) -> list[dict]:
    rows = []
    for i, seed in enumerate(seeds):
        stats = run_policy_episode(client, policy, seed)
        rows.append(stats_row(i, seed, stats, client, scenario))
    if out_csv is not None:
        write_episode_rows(Path(out_csv), rows, len(client.short_agents))
    return rows


# -- TTS-MADDPG training -------------------------------------------------------

class TTSMaddpg:
    """Algorithm driver: short agents act per slot, long agents per block."""

    def __init__(self, client: EnvClient, hp: Hyperparams, scenario: dict,
                 train_trajectory: bool = True):
        self.client = client
        self.hp = hp
        self.scenario = scenario
        self.train_trajectory = train_trajectory
        lays = client.layouts
        self.norm = make_normalizers(
            lays, drop_latency=scenario.get("drop_latency", 10.0),
            area_radius=scenario.get("area_radius", 500.0))
        self.short = MaddpgGroup(
            client.short_agents,
            {a: lays["short"][a]["obs_dim"] for a in client.short_agents},
            {a: lays["short"][a]["action_dim"] for a in client.short_agents},
            hp, seed=hp.seed)
        self.long = MaddpgGroup(
            client.long_agents,
            {a: lays["long"][a]["obs_dim"] for a in client.long_agents},
            {a: 2 for a in client.long_agents},
            hp, seed=hp.seed + 1) if train_trajectory else None
        self.v_max = {a: lays["long"][a]["v_max"] for a in client.long_agents}
        self.total_slots = 0

    def _norm_short(self, obs: dict) -> dict:
        return {a: self.norm["short"][a](obs[a]) for a in obs}

    def _norm_long(self, obs: dict) -> dict:
        return {a: self.norm["long"][a](obs[a]) for a in obs}

    def train(self, out_dir: Path, episodes: int | None = None,
              train_seed_base: int = 0) -> list[dict]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        episodes = episodes or self.hp.episodes
        client, hp = self.client, self.hp
        curve = []
        for ep in range(episodes):
            eps = hp.epsilon(ep)
            # trajectory learning starts against a matured scheduling regime
            long_active = self.long is not None and ep >= hp.long_warmup_episodes
            eps_long = hp.epsilon(max(0, ep - hp.long_warmup_episodes))
            seed = train_seed_base + ep
            stats = EpisodeStats(len(client.short_agents))
            short_obs, long_obs = client.reset(seed)
            s_norm = self._norm_short(short_obs)
            h_s = self.short.initial_hidden()
            h_l = self.long.initial_hidden() if self.long else None
            pending_long = None
            done = False
            slot = 0
            while not done:
                long_env_actions = None
                if slot % client.long_block == 0:
                    if long_active:
                        l_norm = self._norm_long(long_obs)
                        l_act, h_l_next = self.long.act(l_norm, h_l, eps_long,
                                                        hp.explore_sigma_long)
                        long_env_actions = {
                            a: (self.v_max[a] * l_act[a]).tolist()
                            for a in client.long_agents}
                        pending_long = {"obs": l_norm, "act": l_act,
                                        "h": h_l, "h_next": h_l_next}
                        h_l = h_l_next
                    else:
                        long_env_actions = {a: [0.0, 0.0]
                                            for a in client.long_agents}
                s_act, h_s_next = self.short.act(s_norm, h_s, eps, hp.explore_sigma)
                t = client.step({a: v.tolist() for a, v in s_act.items()},
                                long_env_actions)
                stats.add(t["info"])
                s_norm_next = self._norm_short(t["short_obs"])
                self.short.store(s_norm, s_act, t["short_rewards"], s_norm_next,
                                 t["done"], h_s, h_s_next)
                block_completed = t.get("long_rewards") is not None
                if block_completed:
                    if long_active and pending_long is not None:
                        l_next = self._norm_long(t["long_obs"])
                        self.long.store(pending_long["obs"], pending_long["act"],
                                        t["long_rewards"], l_next, t["done"],
                                        pending_long["h"], pending_long["h_next"])
                        pending_long = None
                    long_obs = t["long_obs"]
                s_norm, h_s = s_norm_next, h_s_next
                done = t["done"]
                slot += 1
                self.total_slots += 1
                if self.total_slots % hp.update_every == 0:
                    self.short.update()
                if long_active and block_completed:
                    self.long.update()
            curve.append(stats_row(ep, seed, stats, client, self.scenario))
        write_episode_rows(out_dir / "train_curve.csv", curve,
                           len(client.short_agents))
        self.save(out_dir / "checkpoint.pt")
        return curve

    def policy(self) -> ActorPolicy:
        return ActorPolicy(self.client, self.short, self.long, self.norm)

    def save(self, path: Path) -> None:
        state = {"short": self.short.state_dict(),
                 "scenario": self.scenario, "hp": vars(self.hp)}
        if self.long:
            state["long"] = self.long.state_dict()
        torch.save(state, path)

    def load(self, path: Path) -> None:
        state = torch.load(path, weights_only=False)
        self.short.load_state_dict(state["short"])
        if self.long and "long" in state:
            self.long.load_state_dict(state["long"])

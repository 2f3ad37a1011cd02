"""Two-timescale MAPPO benchmark: clipped-surrogate on-policy updates with the
same agent grouping, recurrent nets, and protocol wiring as the off-policy
learner. Critics are centralized value functions V(S) per agent.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from .configs import Hyperparams
from .nets import GruMlp, ValueNet


def normalize_advantages(adv: torch.Tensor) -> torch.Tensor:
    """Zero-mean unit-variance; a constant stream maps to exact zeros."""
    std = adv.std(unbiased=False)
    # scale-relative guard: float32 std of a constant stream is tiny, not zero
    if std <= 1e-6 * max(1.0, float(adv.abs().max())):
        return torch.zeros_like(adv)
    return (adv - adv.mean()) / std


def gae(rewards: np.ndarray, values: np.ndarray, last_value: float,
        gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimates over one episode (terminal bootstrap 0)."""
    n = len(rewards)
    adv = np.zeros(n)
    next_value = last_value
    running = 0.0
    for t in reversed(range(n)):
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
        next_value = values[t]
    return adv


class GaussianActor(nn.Module):
    """tanh-mean Gaussian policy over the same GRU+FC trunk."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: int):
        super().__init__()
        self.trunk = GruMlp(obs_dim, act_dim, hidden, out_tanh=True)
        self.log_std = nn.Parameter(torch.full((act_dim,), math.log(0.3)))

    def forward(self, obs: torch.Tensor, h: torch.Tensor | None = None):
        mean, h_next = self.trunk(obs, h)
        return mean, self.log_std.expand_as(mean), h_next

    def log_prob(self, mean: torch.Tensor, log_std: torch.Tensor,
                 action: torch.Tensor) -> torch.Tensor:
        var = torch.exp(2.0 * log_std)
        lp = -0.5 * ((action - mean) ** 2 / var + 2.0 * log_std
                     + math.log(2.0 * math.pi))
        return lp.sum(dim=-1)

    def initial_state(self, batch: int = 1) -> torch.Tensor:
        return self.trunk.initial_state(batch)


class MappoGroup:
    """On-policy actor/critic set for one agent group."""

    def __init__(self, agents: list[str], obs_dims: dict[str, int],
                 act_dims: dict[str, int], hp: Hyperparams, seed: int):
        torch.manual_seed(seed)
        self.agents = list(agents)
        self.obs_dims, self.act_dims = obs_dims, act_dims
        self.hp = hp
        self.rng = np.random.default_rng(seed)
        self.state_dim = sum(obs_dims[a] for a in agents)
        self.actors = {a: GaussianActor(obs_dims[a], act_dims[a], hp.hidden)
                       for a in agents}
        self.values = {a: ValueNet(self.state_dim, hp.hidden) for a in agents}
        self.actor_opt = {a: torch.optim.Adam(self.actors[a].parameters(),
                                              lr=hp.actor_lr) for a in agents}
        self.value_opt = {a: torch.optim.Adam(self.values[a].parameters(),
                                              lr=hp.critic_lr) for a in agents}
        self.episodes: list[list[dict]] = []
        self._current: list[dict] | None = None
        self.updates_done = 0

    # -- acting ---------------------------------------------------------------
    def initial_hidden(self) -> dict[str, np.ndarray]:
        return {a: self.actors[a].initial_state(1).detach().numpy()
                for a in self.agents}

    @torch.no_grad()
    def act(self, obs, hidden, epsilon: float = 0.0, noise_sigma: float = 0.0):
        """Deterministic mean actions (evaluation interface)."""
        actions, next_hidden = {}, {}
        for a in self.agents:
            x = torch.as_tensor(obs[a], dtype=torch.float32).unsqueeze(0)
            h = torch.as_tensor(hidden[a], dtype=torch.float32)
            mean, _, h_next = self.actors[a](x, h)
            actions[a] = mean.squeeze(0).numpy()
            next_hidden[a] = h_next.numpy()
        return actions, next_hidden

    @torch.no_grad()
    def act_sample(self, obs, hidden):
        actions, logps, next_hidden = {}, {}, {}
        for a in self.agents:
            x = torch.as_tensor(obs[a], dtype=torch.float32).unsqueeze(0)
            h = torch.as_tensor(hidden[a], dtype=torch.float32)
            mean, log_std, h_next = self.actors[a](x, h)
            action = mean + torch.exp(log_std) * torch.randn_like(mean)
            logps[a] = float(self.actors[a].log_prob(mean, log_std, action))
            actions[a] = action.squeeze(0).numpy()
            next_hidden[a] = h_next.numpy()
        return actions, logps, next_hidden

    # -- rollout collection -----------------------------------------------------
    def begin_episode(self) -> None:
        self._current = []
        self.episodes.append(self._current)

    def record(self, obs, actions, logps, rewards, hidden) -> None:
        self._current.append({
            "obs": {a: np.asarray(obs[a], np.float32) for a in self.agents},
            "act": {a: np.asarray(actions[a], np.float32) for a in self.agents},
            "logp": dict(logps),
            "rew": {a: float(rewards[a]) for a in self.agents},
            "h": {a: np.asarray(hidden[a], np.float32) for a in self.agents},
        })

    # -- updates ------------------------------------------------------------------
    def update(self) -> None:
        """PPO-clip over all stored episodes, then clear the rollout store."""
        hp = self.hp
        steps = [s for ep in self.episodes for s in ep]
        if not steps:
            return
        state = torch.as_tensor(
            np.stack([np.concatenate([s["obs"][a] for a in self.agents])
                      for s in steps]), dtype=torch.float32)
        data = {}
        for a in self.agents:
            obs = torch.as_tensor(np.stack([s["obs"][a] for s in steps]),
                                  dtype=torch.float32)
            act = torch.as_tensor(np.stack([s["act"][a] for s in steps]),
                                  dtype=torch.float32)
            h = torch.as_tensor(np.stack([s["h"][a] for s in steps]),
                                dtype=torch.float32).squeeze(2).transpose(0, 1).contiguous()
            logp_old = torch.as_tensor([s["logp"][a] for s in steps],
                                       dtype=torch.float32)
            # per-episode GAE on the centralized value function
            adv_parts, ret_parts = [], []
            with torch.no_grad():
                values_all = self.values[a](state).numpy()
            i = 0
            for ep in self.episodes:
                n = len(ep)
                rews = np.array([s["rew"][a] for s in ep]) / hp.reward_scale
                vals = values_all[i:i + n]
                adv = gae(rews, vals, 0.0, hp.gamma, hp.gae_lambda)
                adv_parts.append(adv)
                ret_parts.append(adv + vals)
                i += n
            adv = normalize_advantages(
                torch.as_tensor(np.concatenate(adv_parts), dtype=torch.float32))
            ret = torch.as_tensor(np.concatenate(ret_parts), dtype=torch.float32)
            data[a] = (obs, act, h, logp_old, adv, ret)

        n = len(steps)
        for _ in range(hp.ppo_epochs):
            perm = self.rng.permutation(n)
            for lo in range(0, n, hp.batch_size):
                idx = torch.as_tensor(perm[lo:lo + hp.batch_size], dtype=torch.long)
                for a in self.agents:
                    obs, act, h, logp_old, adv, ret = data[a]
                    mean, log_std, _ = self.actors[a](obs[idx], h[:, idx])
                    logp = self.actors[a].log_prob(mean, log_std, act[idx])
                    ratio = torch.exp(logp - logp_old[idx])
                    if hp.ppo_clip > 0.0:
                        unclipped = ratio * adv[idx]
                        clipped = torch.clamp(ratio, 1.0 - hp.ppo_clip,
                                              1.0 + hp.ppo_clip) * adv[idx]
                        actor_loss = -torch.min(unclipped, clipped).mean()
                        if hp.entropy_coef:
                            actor_loss = actor_loss - hp.entropy_coef * (
                                log_std + 0.5 * math.log(2.0 * math.pi * math.e)
                            ).sum()
                        self.actor_opt[a].zero_grad()
                        actor_loss.backward()
                        nn.utils.clip_grad_norm_(self.actors[a].parameters(),
                                                 hp.grad_clip)
                        self.actor_opt[a].step()
                    # a zero-width trust region admits no policy improvement:
                    # the surrogate is maximized at the collecting policy, so
                    # the correct update is none at all
                    v = self.values[a](state[idx])
                    value_loss = nn.functional.mse_loss(v, ret[idx])
                    self.value_opt[a].zero_grad()
                    value_loss.backward()
                    nn.utils.clip_grad_norm_(self.values[a].parameters(),
                                             hp.grad_clip)
                    self.value_opt[a].step()
        self.episodes = []
        self._current = None
        self.updates_done += 1

    # -- persistence ------------------------------------------------------------
    def state_dict(self) -> dict:
        return {"actors": {a: self.actors[a].state_dict() for a in self.agents},
                "values": {a: self.values[a].state_dict() for a in self.agents}}

    def load_state_dict(self, state: dict) -> None:
        for a in self.agents:
            self.actors[a].load_state_dict(state["actors"][a])
            if "values" in state:
                self.values[a].load_state_dict(state["values"][a])


class TTSMappo:
    """On-policy counterpart of the TTS-MADDPG driver; shares evaluation."""

    def __init__(self, client, hp: Hyperparams, scenario: dict,
                 train_trajectory: bool = True):
        from .harness import ActorPolicy
        from .nets import make_normalizers

        self.client = client
        self.hp = hp
        self.scenario = scenario
        lays = client.layouts
        self.norm = make_normalizers(
            lays, drop_latency=scenario.get("drop_latency", 10.0),
            area_radius=scenario.get("area_radius", 500.0))
        self.short = MappoGroup(
            client.short_agents,
            {a: lays["short"][a]["obs_dim"] for a in client.short_agents},
            {a: lays["short"][a]["action_dim"] for a in client.short_agents},
            hp, seed=hp.seed)
        self.long = MappoGroup(
            client.long_agents,
            {a: lays["long"][a]["obs_dim"] for a in client.long_agents},
            {a: 2 for a in client.long_agents},
            hp, seed=hp.seed + 1) if train_trajectory else None
        self.v_max = {a: lays["long"][a]["v_max"] for a in client.long_agents}
        self._policy_cls = ActorPolicy

    def train(self, out_dir, episodes: int | None = None,
              train_seed_base: int = 0) -> list[dict]:
        from pathlib import Path

        import torch

        from .harness import EpisodeStats, stats_row, write_episode_rows

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        episodes = episodes or self.hp.episodes
        client, hp = self.client, self.hp
        curve = []
        for ep in range(episodes):
            stats = EpisodeStats(len(client.short_agents))
            short_obs, long_obs = client.reset(train_seed_base + ep)
            s_norm = {a: self.norm["short"][a](short_obs[a]) for a in short_obs}
            h_s = self.short.initial_hidden()
            self.short.begin_episode()
            if self.long:
                h_l = self.long.initial_hidden()
                self.long.begin_episode()
            pending_long = None
            done = False
            slot = 0
            while not done:
                long_env = None
                if slot % client.long_block == 0:
                    if self.long:
                        l_norm = {a: self.norm["long"][a](long_obs[a])
                                  for a in long_obs}
                        l_act, l_logp, h_l_next = self.long.act_sample(l_norm, h_l)
                        long_env = {a: np.clip(self.v_max[a] * l_act[a],
                                               -self.v_max[a], self.v_max[a]).tolist()
                                    for a in client.long_agents}
                        pending_long = (l_norm, l_act, l_logp, h_l)
                        h_l = h_l_next
                    else:
                        long_env = {a: [0.0, 0.0] for a in client.long_agents}
                s_act, s_logp, h_s_next = self.short.act_sample(s_norm, h_s)
                t = client.step({a: v.tolist() for a, v in s_act.items()}, long_env)
                stats.add(t["info"])
                self.short.record(s_norm, s_act, s_logp, t["short_rewards"], h_s)
                if t.get("long_rewards") is not None:
                    if self.long and pending_long is not None:
                        obs0, act0, logp0, h0 = pending_long
                        self.long.record(obs0, act0, logp0, t["long_rewards"], h0)
                        pending_long = None
                    long_obs = t["long_obs"]
                s_norm = {a: self.norm["short"][a](t["short_obs"][a])
                          for a in t["short_obs"]}
                h_s = h_s_next
                done = t["done"]
                slot += 1
            curve.append(stats_row(ep, train_seed_base + ep, stats, client,
                                   self.scenario))
            if (ep + 1) % hp.ppo_rollout_episodes == 0:
                self.short.update()
                if self.long:
                    self.long.update()
        write_episode_rows(out_dir / "train_curve.csv", curve,
                           len(client.short_agents))
        torch.save({"short": self.short.state_dict(),
                    **({"long": self.long.state_dict()} if self.long else {}),
                    "scenario": self.scenario, "hp": vars(hp)},
                   out_dir / "checkpoint.pt")
        return curve

    def policy(self):
        return self._policy_cls(self.client, self.short, self.long, self.norm)

"""Two-timescale MADDPG: per-agent actors, per-agent centralized critics.

One MaddpgGroup per timescale. Scheduling agents emit score vectors every
slot (the environment's top-k sanitizer guarantees feasibility); trajectory
agents emit velocity pairs once per block. Critics see the group's joint
observation and joint action during training only.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .buffers import ReplayBuffer
from .configs import Hyperparams
from .nets import Critic, GruMlp, hard_update, soft_update


class MaddpgGroup:
    """Actor-critic machinery for one agent group (env-agnostic)."""

    def __init__(self, agents: list[str], obs_dims: dict[str, int],
                 act_dims: dict[str, int], hp: Hyperparams, seed: int):
        torch.manual_seed(seed)
        self.agents = list(agents)
        self.obs_dims = obs_dims
        self.act_dims = act_dims
        self.hp = hp
        self.rng = np.random.default_rng(seed)
        self.state_dim = sum(obs_dims[a] for a in agents)
        self.joint_act_dim = sum(act_dims[a] for a in agents)

        self.actors, self.target_actors = {}, {}
        self.critics, self.target_critics = {}, {}
        self.actor_opt, self.critic_opt = {}, {}
        for a in agents:
            self.actors[a] = GruMlp(obs_dims[a], act_dims[a], hp.hidden, out_tanh=True)
            self.target_actors[a] = GruMlp(obs_dims[a], act_dims[a], hp.hidden,
                                           out_tanh=True)
            hard_update(self.target_actors[a], self.actors[a])
            self.critics[a] = Critic(self.state_dim, self.joint_act_dim, hp.hidden)
            self.target_critics[a] = Critic(self.state_dim, self.joint_act_dim, hp.hidden)
            hard_update(self.target_critics[a], self.critics[a])
            self.actor_opt[a] = torch.optim.Adam(self.actors[a].parameters(),
                                                 lr=hp.actor_lr)
            self.critic_opt[a] = torch.optim.Adam(self.critics[a].parameters(),
                                                  lr=hp.critic_lr)
        self.buffer = ReplayBuffer(hp.buffer_capacity, hp.batch_size, seed)
        self.updates_done = 0

    # -- acting -------------------------------------------------------------
    def initial_hidden(self) -> dict[str, np.ndarray]:
        return {a: self.actors[a].initial_state(1).numpy() for a in self.agents}

    @torch.no_grad()
    def act(self, obs: dict[str, np.ndarray], hidden: dict[str, np.ndarray],
            epsilon: float, noise_sigma: float):
        """Policy actions in [-1, 1] with epsilon-greedy exploration.

        Returns (actions, next_hidden); hidden always advances on the policy
        output so recurrent state stays on-policy even for random actions.
        """
        actions, next_hidden = {}, {}
        for a in self.agents:
            x = torch.as_tensor(obs[a], dtype=torch.float32).unsqueeze(0)
            h = torch.as_tensor(hidden[a], dtype=torch.float32)
            mu, h_next = self.actors[a](x, h)
            next_hidden[a] = h_next.numpy()
            if epsilon > 0.0 and self.rng.random() < epsilon:
                act = self.rng.uniform(-1.0, 1.0, self.act_dims[a])
            else:
                act = mu.squeeze(0).numpy()
                if noise_sigma > 0.0:
                    act = act + self.rng.normal(0.0, noise_sigma, act.shape)
            actions[a] = np.clip(act, -1.0, 1.0)
        return actions, next_hidden

    # -- learning -----------------------------------------------------------
    def store(self, obs, actions, rewards, next_obs, done: bool, hidden, next_hidden):
        self.buffer.push({
            "obs": {a: np.asarray(obs[a], np.float32) for a in self.agents},
            "act": {a: np.asarray(actions[a], np.float32) for a in self.agents},
            "rew": {a: float(rewards[a]) for a in self.agents},
            "next_obs": {a: np.asarray(next_obs[a], np.float32) for a in self.agents},
            "done": bool(done),
            "h": {a: np.asarray(hidden[a], np.float32) for a in self.agents},
            "h_next": {a: np.asarray(next_hidden[a], np.float32) for a in self.agents},
        })

    def _stack(self, batch, key, agent) -> torch.Tensor:
        return torch.as_tensor(np.stack([b[key][agent] for b in batch]),
                               dtype=torch.float32)

    def update(self) -> dict[str, float] | None:
        """One gradient round for every agent; no-op until the buffer fills."""
        if not self.buffer.ready:
            return None
        hp = self.hp
        batch = self.buffer.sample()
        n = len(batch)
        obs = {a: self._stack(batch, "obs", a) for a in self.agents}
        act = {a: self._stack(batch, "act", a) for a in self.agents}
        nxt = {a: self._stack(batch, "next_obs", a) for a in self.agents}
        # snapshots: (B, layers, 1, hidden) -> (layers, B, hidden)
        h = {a: self._stack(batch, "h", a).squeeze(2).transpose(0, 1).contiguous()
             for a in self.agents}
        h_next = {a: self._stack(batch, "h_next", a).squeeze(2).transpose(0, 1).contiguous()
                  for a in self.agents}
        rew = {a: torch.as_tensor([b["rew"][a] for b in batch], dtype=torch.float32)
               / hp.reward_scale for a in self.agents}
        done = torch.as_tensor([b["done"] for b in batch], dtype=torch.float32)

        state = torch.cat([obs[a] for a in self.agents], dim=-1)
        next_state = torch.cat([nxt[a] for a in self.agents], dim=-1)
        joint_act = torch.cat([act[a] for a in self.agents], dim=-1)
        with torch.no_grad():
            next_joint = torch.cat(
                [self.target_actors[a](nxt[a], h_next[a])[0] for a in self.agents],
                dim=-1)

        losses = {}
        for a in self.agents:
            with torch.no_grad():
                y = rew[a] + hp.gamma * (1.0 - done) * self.target_critics[a](
                    next_state, next_joint)
            q = self.critics[a](state, joint_act)
            critic_loss = nn.functional.mse_loss(q, y)
            self.critic_opt[a].zero_grad()
            critic_loss.backward()
            nn.utils.clip_grad_norm_(self.critics[a].parameters(), hp.grad_clip)
            self.critic_opt[a].step()

            # deterministic policy gradient through the centralized critic;
            # the pre-tanh penalty keeps outputs off the saturation plateaus
            mu, pre, _ = self.actors[a].forward_with_pre(obs[a], h[a])
            parts = [mu if b == a else act[b] for b in self.agents]
            actor_loss = (-self.critics[a](state, torch.cat(parts, dim=-1)).mean()
                          + hp.actor_reg * (pre ** 2).mean())
            self.actor_opt[a].zero_grad()
            actor_loss.backward()
            nn.utils.clip_grad_norm_(self.actors[a].parameters(), hp.grad_clip)
            self.actor_opt[a].step()

            soft_update(self.target_actors[a], self.actors[a], hp.tau)
            soft_update(self.target_critics[a], self.critics[a], hp.tau)
            losses[a] = (critic_loss.item(), actor_loss.item())
        self.updates_done += 1
        return losses

    # -- persistence ----------------------------------------------------------
    def state_dict(self) -> dict:
        return {
            "actors": {a: self.actors[a].state_dict() for a in self.agents},
            "critics": {a: self.critics[a].state_dict() for a in self.agents},
        }

    def load_state_dict(self, state: dict) -> None:
        for a in self.agents:
            self.actors[a].load_state_dict(state["actors"][a])
            hard_update(self.target_actors[a], self.actors[a])
            if "critics" in state:
                self.critics[a].load_state_dict(state["critics"][a])
                hard_update(self.target_critics[a], self.critics[a])

"""Actor/critic networks (two GRU layers feeding four fully connected layers)
and fixed observation normalizers derived from the advertised layouts.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

GRU_LAYERS = 2


class GruMlp(nn.Module):
    """Shared trunk: 2-layer GRU on a length-1 sequence, then 4 FC layers.

    The recurrent state is owned by the caller (reset at episode boundaries,
    snapshotted into replay for burn-in-free updates).
    """

    def __init__(self, in_dim: int, out_dim: int, hidden: int = 64,
                 out_tanh: bool = False):
        super().__init__()
        self.hidden = hidden
        self.gru = nn.GRU(in_dim, hidden, num_layers=GRU_LAYERS, batch_first=True)
        self.fc = nn.Sequential(
            nn.Linear(hidden, hidden), nn.ReLU(),
            nn.Linear(hidden, hidden), nn.ReLU(),
            nn.Linear(hidden, hidden), nn.ReLU(),
            nn.Linear(hidden, out_dim),
        )
        self.out_tanh = out_tanh

    def forward(self, x: torch.Tensor, h: torch.Tensor | None = None):
        # x: (batch, in_dim); h: (GRU_LAYERS, batch, hidden)
        out, _, h_next = self.forward_with_pre(x, h)
        return out, h_next

    def forward_with_pre(self, x: torch.Tensor, h: torch.Tensor | None = None):
        """Also expose the pre-tanh output, for saturation regularization."""
        if h is None:
            h = self.initial_state(x.shape[0])
        y, h_next = self.gru(x.unsqueeze(1), h)
        pre = self.fc(y.squeeze(1))
        out = torch.tanh(pre) if self.out_tanh else pre
        return out, pre, h_next

    def initial_state(self, batch: int = 1) -> torch.Tensor:
        p = next(self.parameters())
        return torch.zeros(GRU_LAYERS, batch, self.hidden, dtype=p.dtype,
                           device=p.device)


class Critic(nn.Module):
    """Centralized Q(S, A): global state plus joint action in, scalar out."""

    def __init__(self, state_dim: int, action_dim: int, hidden: int = 64):
        super().__init__()
        self.net = GruMlp(state_dim + action_dim, 1, hidden)

    def forward(self, state: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        q, _ = self.net(torch.cat([state, action], dim=-1))
        return q.squeeze(-1)


class ValueNet(nn.Module):
    """Centralized V(S) for the on-policy learner."""

    def __init__(self, state_dim: int, hidden: int = 64):
        super().__init__()
        self.net = GruMlp(state_dim, 1, hidden)

    def forward(self, state: torch.Tensor) -> torch.Tensor:
        v, _ = self.net(state)
        return v.squeeze(-1)


def soft_update(target: nn.Module, online: nn.Module, tau: float) -> None:
    """theta' <- tau * theta + (1 - tau) * theta' on every parameter/buffer."""
    with torch.no_grad():
        for tp, op in zip(target.parameters(), online.parameters()):
            tp.mul_(1.0 - tau).add_(op, alpha=tau)
        for tb, ob in zip(target.buffers(), online.buffers()):
            tb.copy_(ob)


def hard_update(target: nn.Module, online: nn.Module) -> None:
    target.load_state_dict(online.state_dict())


class Normalizer:
    """Fixed per-field affine/log transforms keyed by layout field names.

    Scales every observation component to roughly unit range; no running
    statistics so evaluation and replay see the same mapping.
    """

    def __init__(self, fields: list[dict], scales: dict[str, float]):
        self.fields = fields
        self.scales = scales

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        out = np.empty_like(obs, dtype=np.float64)
        for f in self.fields:
            lo, hi = f["offset"], f["offset"] + f["length"]
            name = f["name"]
            x = obs[lo:hi]
            if name == "buffer_features":
                # per-candidate triples: backlog, mean age, head age
                y = x.reshape(-1, 3).copy()
                y[:, 0] = np.log1p(y[:, 0]) / 5.0
                y[:, 1:] = y[:, 1:] / self.scales["age"]
                out[lo:hi] = y.reshape(-1)
            elif name == "prev_sinr":
                out[lo:hi] = np.log1p(np.maximum(x, 0.0)) / 10.0
            elif name == "prev_reward":
                out[lo:hi] = x / self.scales["reward"]
            elif name == "rssi":
                out[lo:hi] = (x + 90.0) / 30.0
            elif name in ("own_position", "user_centroid"):
                out[lo:hi] = x / self.scales["position"]
            elif name == "prev_action" and f["length"] == 2:
                out[lo:hi] = x / self.scales["velocity"]
            else:
                out[lo:hi] = x
        return out


def make_normalizers(layouts: dict, drop_latency: float = 10.0,
                     area_radius: float = 500.0) -> dict[str, dict[str, Normalizer]]:
    scales = {"age": drop_latency, "reward": 50.0, "position": area_radius}
    out = {"short": {}, "long": {}}
    for agent, lay in layouts["short"].items():
        out["short"][agent] = Normalizer(lay["fields"], scales)
    for agent, lay in layouts["long"].items():
        out["long"][agent] = Normalizer(lay["fields"],
                                        {**scales, "velocity": lay["v_max"]})
    return out

"""Two-timescale multi-agent learners driving the simulator wire protocol."""

import torch as _torch

# tiny per-agent nets: intra-op threading costs more than it buys
_torch.set_num_threads(1)

from .client import EnvClient, ProtocolError
from .configs import Hyperparams, desk_scenario
from .harness import BaselinePolicy, TTSMaddpg, evaluate
from .mappo import TTSMappo

__all__ = [
    "BaselinePolicy",
    "EnvClient",
    "Hyperparams",
    "ProtocolError",
    "TTSMaddpg",
    "TTSMappo",
    "desk_scenario",
    "evaluate",
]

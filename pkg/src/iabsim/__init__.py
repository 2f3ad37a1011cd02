"""Slot-level simulator of a heterogeneous UAV network with wireless backhaul.

One tethered donor UAV backhauls K untethered node UAVs while both serve
mobile ground users; scheduling is decided every slot and node trajectories
every block, exposed as a two-timescale multi-agent environment both
in-process and over a line-oriented wire protocol.
"""

from .config import ChannelParams, ScenarioConfig, config_from_dict, load_config
from .env import TwoTimescaleEnv

__all__ = [
    "ChannelParams",
    "ScenarioConfig",
    "TwoTimescaleEnv",
    "config_from_dict",
    "load_config",
]

__version__ = "0.1.0"

"""Scenario and channel configuration.

All defaults mirror the reference simulation settings. Velocities are in
distance units per slot-unit; ``time_unit`` rescales one slot to an arbitrary
number of kinematic slot-units (1.0 keeps the slot-indexed mobility law
literal).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml


@dataclass(frozen=True)
class ChannelParams:
    """Propagation constants shared by the air-to-ground and air-to-air links."""

    los_a: float = 11.95          # sigmoid offset, degrees
    los_b: float = 0.136          # sigmoid slope, 1/degree
    alpha: float = 2.0            # path-loss exponent
    mu_los_db: float = 1.0        # excess attenuation on LoS paths, dB
    mu_nlos_db: float = 20.0      # excess attenuation on NLoS paths, dB
    rician_a1: float = 1.0        # Rician factor at zero elevation
    rician_a2: float = math.log(30.0) / (math.pi / 2.0)   # 1/radian
    noise_density_dbm: float = -174.0
    noise_figure_db: float = 7.0

    def validate(self) -> None:
        if self.los_a <= 0 or self.los_b <= 0:
            raise ValueError("LoS probability constants must be positive")
        if self.alpha < 2.0:
            raise ValueError("path-loss exponent below free space is not supported")
        if self.mu_los_db < 0 or self.mu_nlos_db < self.mu_los_db:
            raise ValueError("need mu_nlos_db >= mu_los_db >= 0")
        if self.rician_a1 < 1.0:
            raise ValueError("rician_a1 must be >= 1")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full per-episode parameter set: geometry, radio, traffic, and episode shape."""

    area_radius: float = 500.0    # disaster-disk radius, m
    n_uuav: int = 4               # untethered node UAVs
    n_gue: int = 60               # selected ground users (must equal assoc_t + n_uuav*assoc_u)
    tuav_height: float = 200.0    # m
    uuav_height: float = 100.0    # m
    carrier_t: float = 2.6e9      # donor carrier, Hz
    carrier_u: float = 700e6      # node carrier, Hz
    power_t_dbm: float = 24.0
    power_u_dbm: float = 14.0
    antennas_t: int = 32
    antennas_u: int = 16
    bandwidth_t: float = 100e6    # Hz
    bandwidth_u: float = 20e6     # Hz
    slot_len: float = 0.030       # s
    poisson_rate: float = 4.0     # packets per user per slot
    drop_latency: int = 10        # slots a packet may age before it is dropped
    packet_bits: float = 3e5
    assoc_t: int = 20             # users sampled for the donor
    assoc_u: int = 10             # users sampled per node UAV
    sched_t: int = 8              # donor scheduling cap per slot
    sched_u: int = 4              # node scheduling cap per slot
    v_d_max: float = 10.0         # per-axis node-UAV speed cap, units/slot-unit
    v_w: float = 5.0              # ground-user walking speed, units/slot-unit
    episode_len: int = 200        # slots
    long_block: int = 10          # slots per trajectory-control block
    time_unit: float = 1.0        # kinematic slot-units per slot
    candidate_pool: int = 1000    # ground users drawn before down-selection
    safe_zone_t_radius: float = 100.0
    safe_zone_u_radius: float = 50.0
    safe_zone_u_dist: float = 200.0 * math.sqrt(2.0)  # center offset from origin
    long_reward_mode: str = "mean"  # "mean" or "sum" over a block's short rewards
    seed: int = 0
    world_seed: int | None = None   # pin geometry across episodes (None: follow seed)
    channel: ChannelParams = field(default_factory=ChannelParams)

    def validate(self) -> None:
        positive = [
            ("area_radius", self.area_radius), ("n_uuav", self.n_uuav),
            ("n_gue", self.n_gue), ("tuav_height", self.tuav_height),
            ("uuav_height", self.uuav_height), ("carrier_t", self.carrier_t),
            ("carrier_u", self.carrier_u), ("antennas_t", self.antennas_t),
            ("antennas_u", self.antennas_u), ("bandwidth_t", self.bandwidth_t),
            ("bandwidth_u", self.bandwidth_u), ("slot_len", self.slot_len),
            ("packet_bits", self.packet_bits), ("assoc_t", self.assoc_t),
            ("assoc_u", self.assoc_u), ("sched_t", self.sched_t),
            ("sched_u", self.sched_u), ("episode_len", self.episode_len),
            ("long_block", self.long_block), ("time_unit", self.time_unit),
            ("candidate_pool", self.candidate_pool),
        ]
        for name, value in positive:
            if value <= 0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.poisson_rate < 0 or self.v_w < 0 or self.v_d_max < 0:
            raise ValueError("rates and speeds must be non-negative")
        if self.sched_t > self.assoc_t + self.n_uuav:
            raise ValueError("sched_t exceeds the donor candidate set")
        if self.sched_u > self.assoc_u:
            raise ValueError("sched_u exceeds the node candidate set")
        if self.drop_latency < 1:
            raise ValueError("drop_latency must be >= 1")
        if self.episode_len < self.long_block:
            raise ValueError("episode_len must be >= long_block")
        if self.n_gue != self.assoc_t + self.n_uuav * self.assoc_u:
            raise ValueError(
                "n_gue must equal assoc_t + n_uuav*assoc_u "
                f"({self.assoc_t} + {self.n_uuav}*{self.assoc_u})"
            )
        if self.long_reward_mode not in ("mean", "sum"):
            raise ValueError("long_reward_mode must be 'mean' or 'sum'")
        self.channel.validate()

    @property
    def power_t_watt(self) -> float:
        return dbm_to_watt(self.power_t_dbm)

    @property
    def power_u_watt(self) -> float:
        return dbm_to_watt(self.power_u_dbm)

    @property
    def wavelength_t(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_t

    @property
    def wavelength_u(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_u

    def replace(self, **kwargs) -> "ScenarioConfig":
        chan_keys = {f.name for f in dataclasses.fields(ChannelParams)}
        chan_over = {k: kwargs.pop(k) for k in list(kwargs) if k in chan_keys}
        if chan_over:
            kwargs["channel"] = dataclasses.replace(self.channel, **chan_over)
        cfg = dataclasses.replace(self, **kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watt_to_dbm(watt: float) -> float:
    if watt <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(watt * 1e3)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError("ratio must be positive to express in dB")
    return 10.0 * math.log10(x)


def load_config(path: str | Path, overrides: dict | None = None) -> ScenarioConfig:
    """Load a YAML (or JSON) config file.

    Top-level keys map to ScenarioConfig fields; the ``channel:`` section maps
    to ChannelParams fields. Missing keys keep their defaults.
    """
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"config root must be a mapping, got {type(raw).__name__}")
    return config_from_dict(raw, overrides)


def config_from_dict(raw: dict, overrides: dict | None = None) -> ScenarioConfig:
    raw = dict(raw)
    if overrides:
        chan = dict(raw.get("channel") or {})
        for key, value in overrides.items():
            if key.startswith("channel."):
                chan[key.split(".", 1)[1]] = value
            else:
                raw[key] = value
        if chan:
            raw["channel"] = chan

    chan_raw = raw.pop("channel", None) or {}
    known_chan = {f.name for f in dataclasses.fields(ChannelParams)}
    unknown = set(chan_raw) - known_chan
    if unknown:
        raise ValueError(f"unknown channel config keys: {sorted(unknown)}")
    known = {f.name for f in dataclasses.fields(ScenarioConfig)} - {"channel"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    cfg = ScenarioConfig(channel=ChannelParams(**chan_raw), **raw)
    cfg.validate()
    return cfg


def dump_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))

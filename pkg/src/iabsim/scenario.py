"""World initialization and mobility.

Node UAVs start on the disk edge at the quadrant midpoints (generalized to
evenly spaced bearings starting at 45 degrees for other counts), each paired
with a safe zone on the same bearing. Ground users walk in a straight line
from their initial position toward a destination sampled inside their group's
safe zone, then stop.

Init draw order (single init stream): candidate positions, then per-UAV user
selection in UAV-id order, then destinations in selected-user order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, link, seeding
from .config import ScenarioConfig


class ScenarioInfeasibleError(RuntimeError):
    """Candidate pool gave some UAV fewer associated users than it must sample."""


@dataclass
class SafeZone:
    center: np.ndarray  # (2,)
    radius: float


@dataclass
class WorldState:
    """Positions, velocities and walking targets for one episode."""

    slot: int
    tuav_pos: np.ndarray          # (3,), constant
    uuav_pos: np.ndarray          # (K, 3), z constant
    uuav_vel: np.ndarray          # (K, 2), units/slot-unit, held for a block
    gue_pos: np.ndarray           # (M, 3), z = 0
    gue_origin: np.ndarray        # (M, 3)
    gue_dest: np.ndarray          # (M, 3)
    gue_bearing: np.ndarray       # (M,), radians
    gue_dmax: np.ndarray          # (M,), straight-line trip length
    gue_serving: np.ndarray       # (M,), serving UAV index (0 = donor)
    safe_zones: list[SafeZone] = field(default_factory=list)

    def to_canonical_json(self) -> bytes:
        d = {
            "slot": self.slot,
            "tuav_pos": self.tuav_pos.tolist(),
            "uuav_pos": self.uuav_pos.tolist(),
            "uuav_vel": self.uuav_vel.tolist(),
            "gue_pos": self.gue_pos.tolist(),
            "gue_origin": self.gue_origin.tolist(),
            "gue_dest": self.gue_dest.tolist(),
            "gue_bearing": self.gue_bearing.tolist(),
            "gue_dmax": self.gue_dmax.tolist(),
            "gue_serving": self.gue_serving.tolist(),
            "safe_zones": [[z.center.tolist(), z.radius] for z in self.safe_zones],
        }
        return json.dumps(d, sort_keys=True).encode()


def uuav_initial_positions(cfg: ScenarioConfig) -> np.ndarray:
    """Edge midpoints of the K quadrant-like sectors: bearing 45deg + k*360/K."""
    k = np.arange(cfg.n_uuav)
    ang = math.pi / 4.0 + 2.0 * math.pi * k / cfg.n_uuav
    return np.stack([
        cfg.area_radius * np.cos(ang),
        cfg.area_radius * np.sin(ang),
        np.full(cfg.n_uuav, cfg.uuav_height),
    ], axis=1)


def safe_zones(cfg: ScenarioConfig) -> list[SafeZone]:
    """Zone 0 belongs to the donor group; zone k to node UAV k's group."""
    zones = [SafeZone(np.zeros(2), cfg.safe_zone_t_radius)]
    k = np.arange(cfg.n_uuav)
    ang = math.pi / 4.0 + 2.0 * math.pi * k / cfg.n_uuav
    for a in ang:
        center = cfg.safe_zone_u_dist * np.array([math.cos(a), math.sin(a)])
        zones.append(SafeZone(center, cfg.safe_zone_u_radius))
    return zones


def _uniform_disk(rng: np.random.Generator, n: int, radius: float,
                  center: np.ndarray | None = None) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    if center is not None:
        pts = pts + center
    return pts


def init_world(cfg: ScenarioConfig, seed: int) -> WorldState:
    """Place UAVs, draw and down-select ground users, assign walking targets."""
    rng = seeding.init_stream(seed)

    tuav_pos = np.array([0.0, 0.0, cfg.tuav_height])
    uuav_pos = uuav_initial_positions(cfg)
    zones = safe_zones(cfg)

    cand_xy = _uniform_disk(rng, cfg.candidate_pool, cfg.area_radius)
    cand_pos = np.concatenate([cand_xy, np.zeros((cfg.candidate_pool, 1))], axis=1)

    rssi = _rssi_table(cfg, tuav_pos, uuav_pos, cand_pos)
    assoc = link.associate(rssi)

    selected: list[int] = []
    serving: list[int] = []
    quotas = [cfg.assoc_t] + [cfg.assoc_u] * cfg.n_uuav
    for uav, quota in enumerate(quotas):
        pool = np.flatnonzero(assoc == uav)
        if len(pool) < quota:
            raise ScenarioInfeasibleError(
                f"UAV {uav} has {len(pool)} associated candidates, needs {quota}"
            )
        pick = rng.choice(pool, size=quota, replace=False)
        pick.sort()
        selected.extend(int(i) for i in pick)
        serving.extend([uav] * quota)

    origin = cand_pos[selected].copy()
    serving_arr = np.array(serving, dtype=int)

    dest_xy = np.empty((len(selected), 2))
    for i, uav in enumerate(serving_arr):
        zone = zones[uav]
        dest_xy[i] = _uniform_disk(rng, 1, zone.radius, zone.center)[0]
    dest = np.concatenate([dest_xy, np.zeros((len(selected), 1))], axis=1)

    delta = dest[:, :2] - origin[:, :2]
    bearing = np.arctan2(delta[:, 1], delta[:, 0])
    dmax = np.linalg.norm(delta, axis=1)

    return WorldState(
        slot=0,
        tuav_pos=tuav_pos,
        uuav_pos=uuav_pos,
        uuav_vel=np.zeros((cfg.n_uuav, 2)),
        gue_pos=origin.copy(),
        gue_origin=origin,
        gue_dest=dest,
        gue_bearing=bearing,
        gue_dmax=dmax,
        gue_serving=serving_arr,
        safe_zones=zones,
    )


def _rssi_table(cfg: ScenarioConfig, tuav_pos: np.ndarray, uuav_pos: np.ndarray,
                gue_pos: np.ndarray) -> np.ndarray:
    """Large-scale RSSI (dBm) of every UAV at every listed ground position."""
    n = len(gue_pos)
    table = np.empty((1 + len(uuav_pos), n))
    d, theta = channel.distances_elevations(tuav_pos, gue_pos)
    table[0] = channel.rssi_dbm(
        cfg.power_t_dbm, channel.large_scale_a2g_arrays(d, theta, cfg.wavelength_t, cfg.channel))
    for k in range(len(uuav_pos)):
        d, theta = channel.distances_elevations(uuav_pos[k], gue_pos)
        table[1 + k] = channel.rssi_dbm(
            cfg.power_u_dbm, channel.large_scale_a2g_arrays(d, theta, cfg.wavelength_u, cfg.channel))
    return table


def rssi_table(cfg: ScenarioConfig, world: WorldState) -> np.ndarray:
    return _rssi_table(cfg, world.tuav_pos, world.uuav_pos, world.gue_pos)


def gue_positions_at(world: WorldState, cfg: ScenarioConfig, slot: int) -> np.ndarray:
    """Closed-form walker positions: origin + min(v_w*n*tu, trip length) along the bearing."""
    walked = np.minimum(cfg.v_w * slot * cfg.time_unit, world.gue_dmax)
    xy = world.gue_origin[:, :2] + walked[:, None] * np.stack(
        [np.cos(world.gue_bearing), np.sin(world.gue_bearing)], axis=1)
    return np.concatenate([xy, np.zeros((len(xy), 1))], axis=1)


def step_gue_mobility(world: WorldState, cfg: ScenarioConfig) -> WorldState:
    """Advance ground users to their slot-`world.slot` positions (in place)."""
    world.gue_pos = gue_positions_at(world, cfg, world.slot)
    return world


def step_uuav_motion(world: WorldState, velocities: np.ndarray, cfg: ScenarioConfig) -> WorldState:
    """Apply one block's displacement v*(N_l*time_unit) and clamp to the disk.

    Caller is responsible for per-axis clamping of `velocities`; this only
    projects the resulting position back onto the disaster disk.
    """
    v = np.asarray(velocities, dtype=float).reshape(world.uuav_pos.shape[0], 2)
    new_xy = world.uuav_pos[:, :2] + v * (cfg.long_block * cfg.time_unit)
    norms = np.linalg.norm(new_xy, axis=1)
    over = norms > cfg.area_radius
    if np.any(over):
        new_xy[over] *= (cfg.area_radius / norms[over])[:, None]
    world.uuav_pos = np.concatenate(
        [new_xy, np.full((len(new_xy), 1), cfg.uuav_height)], axis=1)
    world.uuav_vel = v.copy()
    return world

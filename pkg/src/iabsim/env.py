"""Two-timescale environment: per-slot scheduling, per-block trajectory control.

Step pipeline for slot n (arrivals and the deadline sweep for slot n already
ran at the end of the previous step, so observations match what agents saw):

  1. apply the block's trajectory action when n is a block boundary
     (per-axis speed clamp, then displacement, then disk clamp)
  2. sanitize the donor's scheduling action against its buffer state
  3. realize channels, precode, compute SINR and packet capacities for the
     donor band; deliver to donor users and hand relay packets to the nodes
  4. sanitize node scheduling (relayed packets already count as backlog),
     realize the node band, deliver
  5. per-agent rewards = packets delivered to ground users (relays excluded)
  6. advance the slot: walker mobility, next arrivals, deadline sweep,
     fresh observations

One environment instance is one logical stepping sequence; run several
instances (distinct seeds) for parallelism.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, link, scenario, seeding, traffic
from .config import ScenarioConfig
from .traffic import Target


class InvalidActionError(ValueError):
    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class ProtocolPhaseError(RuntimeError):
    """Long action supplied off-boundary, missing on-boundary, or step after done."""


@dataclass
class ScheduleDecision:
    """Sanitized per-UAV schedule: candidate indices plus the binary mask."""

    selected: tuple[int, ...]
    mask: np.ndarray


@dataclass
class TransitionRecord:
    slot: int
    short_rewards: dict[str, float]
    global_short_reward: float
    short_obs: dict[str, np.ndarray]
    done: bool
    info: dict
    long_rewards: dict[str, float] | None = None
    global_long_reward: float | None = None
    long_obs: dict[str, np.ndarray] | None = None


@dataclass
class _LinkRealization:
    target: Target
    sinr: float
    capacity: int
    n_tx: int = 0


def sanitize_short_action(raw, gamma: np.ndarray, cap: int) -> ScheduleDecision:
    """Map a score vector or validate an explicit mask against the constraints.

    Score mode selects the top-``cap`` eligible candidates (score desc, index
    asc on ties). Mask mode rejects, never repairs.
    """
    n = len(gamma)
    if isinstance(raw, dict):
        if "mask" in raw:
            mask = np.asarray(raw["mask"], dtype=float)
            if mask.shape != (n,):
                raise InvalidActionError("SHAPE", f"mask length {mask.shape} != {n} candidates")
            if not np.all(np.isin(mask, (0.0, 1.0))):
                raise InvalidActionError("SHAPE", "mask entries must be 0 or 1")
            if mask.sum() > cap:
                raise InvalidActionError(
                    "CARDINALITY", f"mask schedules {int(mask.sum())} > cap {cap}")
            bad = np.flatnonzero((mask == 1.0) & ~gamma)
            if len(bad):
                raise InvalidActionError(
                    "GAMMA_GATING", f"mask schedules empty-buffer candidates {bad.tolist()}")
            sel = tuple(int(i) for i in np.flatnonzero(mask == 1.0))
            return ScheduleDecision(sel, mask.astype(np.int8))
        scores = np.asarray(raw.get("scores"), dtype=float)
    else:
        scores = np.asarray(raw, dtype=float)
    if scores.shape != (n,):
        raise InvalidActionError("SHAPE", f"score length {scores.shape} != {n} candidates")
    if not np.all(np.isfinite(scores)):
        raise InvalidActionError("SHAPE", "scores must be finite")
    eligible = np.flatnonzero(gamma)
    order = sorted(eligible, key=lambda i: (-scores[i], i))
    sel = tuple(int(i) for i in sorted(order[:cap]))
    mask = np.zeros(n, dtype=np.int8)
    mask[list(sel)] = 1
    return ScheduleDecision(sel, mask)


def long_reward(block_short_rewards: list[float], mode: str = "mean") -> float:
    """Block-level trajectory reward from the block's short rewards."""
    if mode == "sum":
        return float(sum(block_short_rewards))
    return float(sum(block_short_rewards) / len(block_short_rewards))


class TwoTimescaleEnv:
    """In-process environment API: reset / step / layout descriptors."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.world: scenario.WorldState | None = None
        self._done = True
        # user ids are assigned in UAV order at init: donor block, then node blocks
        ids = iter(range(cfg.n_gue))
        self._users_of = [[next(ids) for _ in range(cfg.assoc_t)]] + [
            [next(ids) for _ in range(cfg.assoc_u)] for _ in range(cfg.n_uuav)]
        self._candidates = {k: self.candidates_of(k) for k in range(self.n_uav)}

    # -- identifiers -------------------------------------------------------
    @property
    def n_uav(self) -> int:
        return self.cfg.n_uuav + 1

    @property
    def short_agents(self) -> list[str]:
        return [f"uav{k}" for k in range(self.n_uav)]

    @property
    def long_agents(self) -> list[str]:
        return [f"uav{k}" for k in range(1, self.n_uav)]

    def candidates_of(self, uav: int) -> list[Target]:
        if uav == 0:
            return ([("uuav", k) for k in range(1, self.n_uav)]
                    + [("gue", m) for m in self._users_of[0]])
        return [("gue", m) for m in self._users_of[uav]]

    def sched_cap(self, uav: int) -> int:
        return self.cfg.sched_t if uav == 0 else self.cfg.sched_u

    # -- lifecycle ---------------------------------------------------------
    def reset(self, seed: int | None = None):
        cfg = self.cfg
        self.seed = cfg.seed if seed is None else int(seed)
        world_seed = cfg.world_seed if cfg.world_seed is not None else self.seed
        self.world = scenario.init_world(cfg, world_seed)

        expected = np.concatenate([[uav] * len(us) for uav, us in enumerate(self._users_of)])
        assert np.array_equal(self.world.gue_serving, expected), \
            "init_world user ordering drifted from the id convention"
        self.queues = traffic.QueueNetwork(cfg.n_uuav, self._users_of)
        self._node_users = [u for us in self._users_of[1:] for u in us]
        self._node_user_index = {m: i for i, m in enumerate(self._node_users)}
        self._own_user_index = {m: i for i, m in enumerate(self._users_of[0])}
        self._traffic_streams = {
            m: seeding.traffic_stream(self.seed, m) for m in range(cfg.n_gue)}
        # one fading substream per (tx, rx) link; rx ids: UAVs 0..K, users K+1+m
        self._donor_gue_rngs = [
            seeding.fading_stream(self.seed, 0, self.n_uav + m) for m in self._users_of[0]]
        self._donor_node_rngs = {
            k: seeding.fading_stream(self.seed, 0, k) for k in range(1, self.n_uav)}
        self._node_gue_rngs = {
            k: [seeding.fading_stream(self.seed, k, self.n_uav + m)
                for m in [u for us in self._users_of[1:] for u in us]]
            for k in range(1, self.n_uav)}

        self.slot = 0
        self._done = False
        self._block_rewards = {a: [] for a in self.long_agents}
        self._prev_sinr = {k: np.zeros(len(self._candidates[k])) for k in range(self.n_uav)}
        self._prev_mask = {k: np.zeros(len(self._candidates[k]), dtype=np.int8)
                           for k in range(self.n_uav)}
        self._prev_short_reward = {k: 0.0 for k in range(self.n_uav)}
        self._prev_long_action = {k: np.zeros(2) for k in range(1, self.n_uav)}
        self._prev_long_reward = {k: 0.0 for k in range(1, self.n_uav)}

        arrivals = self.queues.poisson_arrivals(0, cfg.poisson_rate, self._traffic_streams)
        self.queues.drop_expired(0, cfg.drop_latency)  # no-op, keeps the order uniform
        self._ledger = {
            "seed": self.seed,
            "config_hash": cfg.config_hash(),
            "per_slot": [],
            "arrivals": sum(arrivals.values()),
            "delivered": 0,
            "dropped": 0,
            "per_uav_delivered": [0] * self.n_uav,
            "per_uav_dropped": [0] * self.n_uav,
        }
        return self._short_obs(), self._long_obs()

    # -- observations ------------------------------------------------------
    def _short_obs(self) -> dict[str, np.ndarray]:
        obs = {}
        for k in range(self.n_uav):
            feats = []
            for tgt in self._candidates[k]:
                tx = 0 if k == 0 else k
                feats.extend(self.queues.features(tx, tgt, self.slot))
            obs[f"uav{k}"] = np.concatenate([
                np.asarray(feats, dtype=float),
                self._prev_sinr[k],
                [self._prev_short_reward[k]],
                self._prev_mask[k].astype(float),
            ])
        return obs

    def _long_obs(self) -> dict[str, np.ndarray]:
        cfg, world = self.cfg, self.world
        obs = {}
        for k in range(1, self.n_uav):
            users = self._users_of[k]
            d, theta = channel.distances_elevations(
                world.uuav_pos[k - 1], world.gue_pos[users])
            rssi = channel.rssi_dbm(
                cfg.power_u_dbm,
                channel.large_scale_a2g_arrays(d, theta, cfg.wavelength_u, cfg.channel))
            centroid = world.gue_pos[users].mean(axis=0)
            obs[f"uav{k}"] = np.concatenate([
                np.asarray(rssi, dtype=float),
                self._prev_long_action[k],
                [self._prev_long_reward[k]],
                world.uuav_pos[k - 1],
                centroid,
            ])
        return obs

    def layouts(self) -> dict:
        """Field offsets/lengths so external learners can decode flat vectors."""
        cfg = self.cfg
        short = {}
        for k in range(self.n_uav):
            cands = self._candidates[k]
            c = len(cands)
            fields = [
                {"name": "buffer_features", "offset": 0, "length": 3 * c},
                {"name": "prev_sinr", "offset": 3 * c, "length": c},
                {"name": "prev_reward", "offset": 4 * c, "length": 1},
                {"name": "prev_action", "offset": 4 * c + 1, "length": c},
            ]
            short[f"uav{k}"] = {
                "obs_dim": 5 * c + 1,
                "fields": fields,
                "action_dim": c,
                "sched_cap": self.sched_cap(k),
                "candidates": [[kind, idx] for kind, idx in cands],
            }
        long = {}
        for k in range(1, self.n_uav):
            u = len(self._users_of[k])
            fields = [
                {"name": "rssi", "offset": 0, "length": u},
                {"name": "prev_action", "offset": u, "length": 2},
                {"name": "prev_reward", "offset": u + 2, "length": 1},
                {"name": "own_position", "offset": u + 3, "length": 3},
                {"name": "user_centroid", "offset": u + 6, "length": 3},
            ]
            long[f"uav{k}"] = {
                "obs_dim": u + 9,
                "fields": fields,
                "action_dim": 2,
                "v_max": cfg.v_d_max,
            }
        return {
            "short": short,
            "long": long,
            "long_block": cfg.long_block,
            "episode_len": cfg.episode_len,
        }

    # -- stepping ----------------------------------------------------------
    def step(self, short_actions: dict, long_actions: dict | None = None) -> TransitionRecord:
        cfg = self.cfg
        if self._done:
            raise ProtocolPhaseError("episode is done; call reset")
        boundary = self.slot % cfg.long_block == 0
        if boundary and long_actions is None:
            raise ProtocolPhaseError(f"slot {self.slot} starts a block; long actions required")
        if not boundary and long_actions is not None:
            raise ProtocolPhaseError(f"slot {self.slot} is mid-block; long actions not accepted")
        missing = [a for a in self.short_agents if a not in short_actions]
        if missing:
            raise InvalidActionError("SHAPE", f"missing short actions for {missing}")

        if boundary:
            vel = np.zeros((cfg.n_uuav, 2))
            for k in range(1, self.n_uav):
                if f"uav{k}" not in long_actions:
                    raise InvalidActionError("SHAPE", f"missing long action for uav{k}")
                a = np.asarray(long_actions[f"uav{k}"], dtype=float).reshape(2)
                if not np.all(np.isfinite(a)):
                    raise InvalidActionError("SHAPE", "velocities must be finite")
                vel[k - 1] = np.clip(a, -cfg.v_d_max, cfg.v_d_max)
                self._prev_long_action[k] = vel[k - 1].copy()
            scenario.step_uuav_motion(self.world, vel, cfg)

        # donor phase ------------------------------------------------------
        donor_gamma = np.array(
            [self.queues.gamma(0, t) for t in self._candidates[0]], dtype=bool)
        donor_dec = sanitize_short_action(short_actions["uav0"], donor_gamma, cfg.sched_t)
        bank = self._realize_channels()
        donor_links, relayed = self._donor_phase(donor_dec, bank)

        # node phase (relayed packets already count as backlog) -------------
        node_decs: dict[int, ScheduleDecision] = {}
        for k in range(1, self.n_uav):
            g = np.array([self.queues.gamma(k, t) for t in self._candidates[k]], dtype=bool)
            node_decs[k] = sanitize_short_action(short_actions[f"uav{k}"], g, cfg.sched_u)
        node_links = self._node_phase(node_decs, bank)

        # rewards ------------------------------------------------------------
        short_rewards: dict[str, float] = {}
        delivered_per_uav = [0] * self.n_uav
        for k in range(self.n_uav):
            links_k = donor_links if k == 0 else node_links[k]
            delivered = sum(
                lr.n_tx for lr in links_k.values() if lr.target[0] == "gue")
            delivered_per_uav[k] = delivered
            short_rewards[f"uav{k}"] = float(delivered)
        global_short = float(sum(short_rewards.values()))

        for k in range(1, self.n_uav):
            self._block_rewards[f"uav{k}"].append(short_rewards[f"uav{k}"])

        # bookkeeping before the slot advances
        self._prev_short_reward = {k: short_rewards[f"uav{k}"] for k in range(self.n_uav)}
        for k in range(self.n_uav):
            sinr_vec = np.zeros(len(self._candidates[k]))
            links_k = donor_links if k == 0 else node_links[k]
            for idx, lr in links_k.items():
                sinr_vec[idx] = lr.sinr
            self._prev_sinr[k] = sinr_vec
            self._prev_mask[k] = (donor_dec if k == 0 else node_decs[k]).mask

        consumed_slot = self.slot
        info = {
            "slot": consumed_slot,
            "delivered": int(sum(delivered_per_uav)),
            "per_uav_delivered": delivered_per_uav,
            "relayed": relayed,
            "links": self._link_rows(donor_links, node_links),
            "schedules": {f"uav{k}": (donor_dec if k == 0 else node_decs[k]).mask.tolist()
                          for k in range(self.n_uav)},
        }

        # advance ------------------------------------------------------------
        self.slot += 1
        self.world.slot = self.slot
        scenario.step_gue_mobility(self.world, cfg)
        self._done = self.slot >= cfg.episode_len
        arrivals_n = 0
        dropped_per_uav = [0] * self.n_uav
        if not self._done:
            new = self.queues.poisson_arrivals(self.slot, cfg.poisson_rate,
                                               self._traffic_streams)
            arrivals_n = sum(new.values())
            for (holder, _gue), cnt in self.queues.drop_expired(
                    self.slot, cfg.drop_latency).items():
                dropped_per_uav[holder] += cnt
        info["arrivals"] = arrivals_n
        info["dropped"] = int(sum(dropped_per_uav))
        info["per_uav_dropped"] = dropped_per_uav

        self._ledger["arrivals"] += arrivals_n
        self._ledger["delivered"] += info["delivered"]
        self._ledger["dropped"] += info["dropped"]
        for k in range(self.n_uav):
            self._ledger["per_uav_delivered"][k] += delivered_per_uav[k]
            self._ledger["per_uav_dropped"][k] += dropped_per_uav[k]
        self._ledger["per_slot"].append({
            "slot": consumed_slot,
            "delivered": info["delivered"],
            "dropped": info["dropped"],
            "arrivals": arrivals_n,
            "relayed": relayed,
            "per_uav_delivered": delivered_per_uav,
            "per_uav_dropped": dropped_per_uav,
        })

        record = TransitionRecord(
            slot=consumed_slot,
            short_rewards=short_rewards,
            global_short_reward=global_short,
            short_obs=self._short_obs(),
            done=self._done,
            info=info,
        )
        block_done = self._done or (self.slot % cfg.long_block == 0)
        if block_done:
            record.long_rewards = {}
            for a in self.long_agents:
                r = long_reward(self._block_rewards[a], cfg.long_reward_mode)
                record.long_rewards[a] = r
                self._prev_long_reward[int(a[3:])] = r
                self._block_rewards[a] = []
            record.global_long_reward = float(sum(record.long_rewards.values()))
            record.long_obs = self._long_obs()
        return record

    # -- channel realization ----------------------------------------------
    def _realize_channels(self) -> dict:
        """Per-slot fading for every potential link (schedule independent)."""
        cfg, world = self.cfg, self.world
        bank: dict = {}
        d, theta = channel.distances_elevations(
            world.tuav_pos, world.gue_pos[self._users_of[0]])
        bank["donor_gue"] = channel.sample_a2g_batch(
            d, theta, cfg.wavelength_t, cfg.antennas_t, cfg.channel, self._donor_gue_rngs)
        bank["donor_node"] = {}
        for k in range(1, self.n_uav):
            geom = channel.geometry_between(
                world.tuav_pos, world.uuav_pos[k - 1], cfg.wavelength_t,
                cfg.antennas_t, cfg.antennas_u)
            bank["donor_node"][k] = channel.sample_a2a_channel(
                geom, cfg.channel, self._donor_node_rngs[k])
        bank["node_gue"] = {}
        for k in range(1, self.n_uav):
            d, theta = channel.distances_elevations(
                world.uuav_pos[k - 1], world.gue_pos[self._node_users])
            bank["node_gue"][k] = channel.sample_a2g_batch(
                d, theta, cfg.wavelength_u, cfg.antennas_u, cfg.channel,
                self._node_gue_rngs[k])
        return bank

    def _donor_phase(self, dec: ScheduleDecision, bank: dict):
        cfg = self.cfg
        cands = self._candidates[0]
        links: dict[int, _LinkRealization] = {}
        relayed = 0
        if not dec.selected:
            return links, relayed
        power = link.equal_power_split(cfg.power_t_watt, len(dec.selected))
        noise = channel.noise_power_watt(cfg.bandwidth_t, cfg.channel)

        def chan_of(tgt: Target):
            if tgt[0] == "gue":
                return bank["donor_gue"][self._own_user_index[tgt[1]]]
            return bank["donor_node"][tgt[1]]

        precoders = {i: link.mrt_precoder(chan_of(cands[i])) for i in dec.selected}
        for i in dec.selected:
            tgt = cands[i]
            others = [precoders[j] for j in dec.selected if j != i]
            g = chan_of(tgt)
            if tgt[0] == "gue":
                sinr = link.sinr_tuav_to_gue(g, precoders[i], others, power, noise)
            else:
                sinr = link.sinr_tuav_to_uuav(g, precoders[i], others, power, noise)
            cap = link.quantized_capacity(cfg.bandwidth_t, sinr, cfg.slot_len, cfg.packet_bits)
            links[i] = _LinkRealization(tgt, sinr, cap)
        for i in dec.selected:
            lr = links[i]
            backlog = self.queues.backlog(0, lr.target)
            if backlog == 0:
                raise traffic.ScheduledEmptyQueueError(
                    f"donor scheduled empty target {lr.target}")
            budget = min(lr.capacity, backlog)
            if lr.target[0] == "gue":
                lr.n_tx = self.queues.deliver(0, lr.target[1], budget, self.slot)
            else:
                _, moved = self.queues.relay(lr.target[1], budget, self.slot)
                lr.n_tx = moved
                relayed += moved
        return links, relayed

    def _node_phase(self, decs: dict[int, ScheduleDecision], bank: dict):
        cfg = self.cfg
        noise = channel.noise_power_watt(cfg.bandwidth_u, cfg.channel)
        power_of = {k: link.equal_power_split(cfg.power_u_watt, len(d.selected))
                    for k, d in decs.items() if d.selected}
        def chan(k: int, m: int) -> np.ndarray:
            return bank["node_gue"][k][self._node_user_index[m]]

        precoders: dict[int, dict[int, np.ndarray]] = {}
        for k, d in decs.items():
            precoders[k] = {
                i: link.mrt_precoder(chan(k, self._candidates[k][i][1]))
                for i in d.selected}
        out: dict[int, dict[int, _LinkRealization]] = {}
        for k, d in decs.items():
            links_k: dict[int, _LinkRealization] = {}
            for i in d.selected:
                m = self._candidates[k][i][1]
                g = chan(k, m)
                intra = [precoders[k][j] for j in d.selected if j != i]
                cross = []
                for kk, dd in decs.items():
                    if kk == k:
                        continue
                    for j in dd.selected:
                        cross.append((chan(kk, m), precoders[kk][j], power_of[kk]))
                sinr = link.sinr_uuav_to_gue(g, precoders[k][i], intra, cross,
                                             power_of[k], noise)
                cap = link.quantized_capacity(cfg.bandwidth_u, sinr, cfg.slot_len,
                                              cfg.packet_bits)
                links_k[i] = _LinkRealization(("gue", m), sinr, cap)
            for i in d.selected:
                lr = links_k[i]
                backlog = self.queues.backlog(k, lr.target)
                if backlog == 0:
                    raise traffic.ScheduledEmptyQueueError(
                        f"node {k} scheduled empty target {lr.target}")
                lr.n_tx = self.queues.deliver(k, lr.target[1],
                                              min(lr.capacity, backlog), self.slot)
            out[k] = links_k
        return out

    @staticmethod
    def _link_rows(donor_links, node_links) -> list[list]:
        rows = []
        for i in sorted(donor_links):
            lr = donor_links[i]
            rows.append([0, lr.target[0], lr.target[1], lr.sinr, lr.capacity, lr.n_tx])
        for k in sorted(node_links):
            for i in sorted(node_links[k]):
                lr = node_links[k][i]
                rows.append([k, lr.target[0], lr.target[1], lr.sinr, lr.capacity, lr.n_tx])
        return rows

    # -- ledgers ------------------------------------------------------------
    def episode_ledger(self) -> dict:
        led = dict(self._ledger)
        led["residual"] = self.queues.residual()
        led["max_delivered_age"] = self.queues.max_delivered_age
        led["conservation_total"] = (led["delivered"] + led["dropped"] + led["residual"])
        return led

    def ledger_bytes(self) -> bytes:
        return json.dumps(self.episode_ledger(), sort_keys=True).encode()

"""Batch episode execution, metrics files, and summaries.

File formats (versioned; bump SCHEMA_VERSION on change):
  episodes.csv  one row per episode, comma separated
  slots.jsonl   one JSON record per slot
  rssi_*.csv    one RSSI sample (dBm) per row, for distribution comparisons
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import policies, scenario
from .config import ScenarioConfig
from .env import TwoTimescaleEnv

SCHEMA_VERSION = 1


@dataclass
class MetricsRecord:
    episode: int
    seed: int
    config_hash: str
    arrivals: int
    delivered_packets: int
    dropped_packets: int
    residual_packets: int
    delivered_mbps: float
    dropped_mbps: float
    per_uav_delivered_mbps: list[float]
    per_uav_dropped_mbps: list[float]

    @staticmethod
    def from_ledger(episode: int, ledger: dict, cfg: ScenarioConfig) -> "MetricsRecord":
        to_mbps = cfg.packet_bits / (cfg.episode_len * cfg.slot_len) / 1e6
        return MetricsRecord(
            episode=episode,
            seed=ledger["seed"],
            config_hash=ledger["config_hash"],
            arrivals=ledger["arrivals"],
            delivered_packets=ledger["delivered"],
            dropped_packets=ledger["dropped"],
            residual_packets=ledger["residual"],
            delivered_mbps=ledger["delivered"] * to_mbps,
            dropped_mbps=ledger["dropped"] * to_mbps,
            per_uav_delivered_mbps=[d * to_mbps for d in ledger["per_uav_delivered"]],
            per_uav_dropped_mbps=[d * to_mbps for d in ledger["per_uav_dropped"]],
        )


def run_episode(env: TwoTimescaleEnv, scheduler: str, trajectory: str,
                seed: int, policy_seed: int | None = None):
    """One full episode under baseline policies; returns the episode ledger."""
    cfg = env.cfg
    state = policies.PolicyState.create(scheduler, seed if policy_seed is None else policy_seed)
    layouts = env.layouts()
    short_obs, long_obs = env.reset(seed)
    block_units = cfg.long_block * cfg.time_unit
    done = False
    while not done:
        short_actions = policies.make_short_actions(scheduler, short_obs, layouts, state)
        long_actions = None
        if env.slot % cfg.long_block == 0:
            long_actions = policies.make_long_actions(
                trajectory, long_obs, layouts, cfg.v_d_max, block_units)
        rec = env.step(short_actions, long_actions)
        short_obs = rec.short_obs
        if rec.long_obs is not None:
            long_obs = rec.long_obs
        done = rec.done
    return env.episode_ledger()


def run_batch(cfg: ScenarioConfig, scheduler: str, trajectory: str, episodes: int,
              seed: int, out_dir: Path, trace_slots: bool = False,
              dump_rssi: bool = False, rssi_seeds: int = 20) -> list[MetricsRecord]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = TwoTimescaleEnv(cfg)
    records: list[MetricsRecord] = []
    slot_rows: list[dict] = []
    for ep in range(episodes):
        ledger = run_episode(env, scheduler, trajectory, seed + ep)
        records.append(MetricsRecord.from_ledger(ep, ledger, cfg))
        if trace_slots:
            for row in ledger["per_slot"]:
                slot_rows.append({"episode": ep, **row})
    write_episode_csv(out_dir / "episodes.csv", records)
    if trace_slots:
        write_slot_trace(out_dir / "slots.jsonl", slot_rows)
    if dump_rssi:
        dump_rssi_samples(cfg, seed, rssi_seeds, out_dir)
    return records


def write_episode_csv(path: Path, records: list[MetricsRecord]) -> None:
    if not records:
        return
    n_uav = len(records[0].per_uav_delivered_mbps)
    header = (["schema", "episode", "seed", "config_hash", "arrivals",
               "delivered_packets", "dropped_packets", "residual_packets",
               "delivered_mbps", "dropped_mbps"]
              + [f"uav{k}_delivered_mbps" for k in range(n_uav)]
              + [f"uav{k}_dropped_mbps" for k in range(n_uav)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in records:
            w.writerow([SCHEMA_VERSION, r.episode, r.seed, r.config_hash, r.arrivals,
                        r.delivered_packets, r.dropped_packets, r.residual_packets,
                        repr(r.delivered_mbps), repr(r.dropped_mbps)]
                       + [repr(v) for v in r.per_uav_delivered_mbps]
                       + [repr(v) for v in r.per_uav_dropped_mbps])


def write_slot_trace(path: Path, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps({"schema": SCHEMA_VERSION, **row}, sort_keys=True) + "\n")


def dump_rssi_samples(cfg: ScenarioConfig, seed: int, n_seeds: int, out_dir: Path) -> None:
    """Serving-UAV RSSI vs donor-only RSSI for the same selected users.

    The two sample sets answer "what did deploying the node UAVs buy these
    users": file one holds each user's serving-link RSSI under the full
    deployment, file two the donor link alone for the same users.
    """
    deployed, donor_only = [], []
    for s in range(n_seeds):
        world = scenario.init_world(cfg, seed + s)
        table = scenario.rssi_table(cfg, world)
        for m in range(cfg.n_gue):
            deployed.append((seed + s, m, float(table[world.gue_serving[m], m])))
            donor_only.append((seed + s, m, float(table[0, m])))
    for name, rows in (("rssi_deployed.csv", deployed), ("rssi_tuav_only.csv", donor_only)):
        with open(Path(out_dir) / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["schema", "seed", "gue", "rssi_dbm"])
            for s, m, v in rows:
                w.writerow([SCHEMA_VERSION, s, m, repr(v)])


# -- summaries --------------------------------------------------------------

def mean_ci95(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and 95% confidence half-width (t interval; 0 for n == 1)."""
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if len(v) < 2:
        return mean, 0.0
    sem = v.std(ddof=1) / math.sqrt(len(v))
    half = float(stats.t.ppf(0.975, len(v) - 1) * sem)
    return mean, half


def convergence_episode(series: np.ndarray, tail_frac: float = 0.2) -> int:
    """First episode (1-based) reaching 95% of the terminal mean.

    Terminal mean is taken over the trailing ``tail_frac`` of episodes.
    """
    s = np.asarray(series, dtype=float)
    tail = s[-max(1, int(len(s) * tail_frac)):]
    target = 0.95 * tail.mean()
    hits = np.flatnonzero(s >= target)
    return int(hits[0]) + 1 if len(hits) else len(s)


def read_episode_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


def summarize(paths: list[Path], with_convergence: bool = False) -> dict:
    rows = []
    for p in paths:
        rows.extend(read_episode_csv(p))
    if not rows:
        raise ValueError("no episode rows to summarize")
    delivered = np.array([float(r["delivered_mbps"]) for r in rows])
    dropped = np.array([float(r["dropped_mbps"]) for r in rows])
    uav_cols = sorted(
        (c for c in rows[0] if c.endswith("_delivered_mbps") and c.startswith("uav")),
        key=lambda c: int(c[3:].split("_")[0]))
    summary = {
        "episodes": len(rows),
        "delivered_mbps": mean_ci95(delivered),
        "dropped_mbps": mean_ci95(dropped),
        "per_uav_delivered_mbps": {
            c[: c.index("_")]: mean_ci95(np.array([float(r[c]) for r in rows]))
            for c in uav_cols},
    }
    if with_convergence:
        summary["convergence_episode"] = convergence_episode(delivered)
    return summary


def format_summary(summary: dict) -> str:
    lines = [f"episodes: {summary['episodes']}"]
    m, h = summary["delivered_mbps"]
    lines.append(f"delivered: {m:.3f} +/- {h:.3f} Mbps (95% CI)")
    m, h = summary["dropped_mbps"]
    lines.append(f"dropped:   {m:.3f} +/- {h:.3f} Mbps (95% CI)")
    for uav, (m, h) in summary["per_uav_delivered_mbps"].items():
        lines.append(f"  {uav} delivered: {m:.3f} +/- {h:.3f} Mbps")
    if "convergence_episode" in summary:
        lines.append(f"convergence episode: {summary['convergence_episode']}")
    return "\n".join(lines)

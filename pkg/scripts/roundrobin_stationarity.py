#!/usr/bin/env python3
"""Round-robin throughput across episodes on one deployed scenario.

Prints the per-episode series summary and the least-squares drift, the
flat-baseline behavior the scheduler comparisons are judged against.
"""

import argparse
from pathlib import Path

import numpy as np

from iabsim import metrics
from iabsim.config import ScenarioConfig, load_config
from iabsim.env import TwoTimescaleEnv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config")
    ap.add_argument("--episodes", type=int, default=200)
    ap.add_argument("--seed", type=int, default=10_000)
    ap.add_argument("--world-seed", type=int, default=42)
    ap.add_argument("--out", default="out/roundrobin")
    args = ap.parse_args()

    cfg = load_config(args.config) if args.config else ScenarioConfig()
    cfg = cfg.replace(world_seed=args.world_seed)
    out = Path(args.out)
    records = metrics.run_batch(cfg, "roundrobin", "stationary",
                                args.episodes, args.seed, out)
    series = np.array([r.delivered_mbps for r in records])
    dropped = np.array([r.dropped_mbps for r in records])
    slope = np.polyfit(np.arange(len(series)), series, 1)[0]
    print(f"episodes: {len(series)}")
    print(f"delivered: {series.mean():.2f} Mbps (sd {series.std(ddof=1):.2f})")
    print(f"dropped:   {dropped.mean():.2f} Mbps (sd {dropped.std(ddof=1):.2f})")
    print(f"drift: {slope * 100:.3f} Mbps per 100 episodes "
          f"({abs(slope * 100) / series.mean() * 100:.3f}% of mean)")
    print(f"rows in {out}/episodes.csv")


if __name__ == "__main__":
    main()

"""Command-line entry points: batch runs, summaries, and the protocol server."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import metrics, protocol
from .config import ScenarioConfig, config_from_dict, load_config


def _load(config_path: str | None, overrides: dict | None = None) -> ScenarioConfig:
    if config_path:
        return load_config(config_path, overrides)
    return config_from_dict({}, overrides)


def cmd_run(args) -> int:
    cfg = _load(args.config, {"seed": args.seed} if args.seed is not None else None)
    if args.serve:
        return cmd_serve(args)
    if args.policy not in ("roundrobin", "random", "greedy"):
        print(f"error: unknown policy {args.policy!r}", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"error: cannot create output directory {out}: {e}", file=sys.stderr)
        return 2
    records = metrics.run_batch(
        cfg, args.policy, args.trajectory, args.episodes,
        args.seed if args.seed is not None else cfg.seed, out,
        trace_slots=args.trace_slots, dump_rssi=args.dump_rssi)
    summary = metrics.summarize([out / "episodes.csv"])
    print(metrics.format_summary(summary))
    print(f"wrote {len(records)} episode rows to {out / 'episodes.csv'}")
    return 0


def cmd_summarize(args) -> int:
    summary = metrics.summarize([Path(p) for p in args.files],
                                with_convergence=args.convergence)
    print(metrics.format_summary(summary))
    return 0


def cmd_serve(args) -> int:
    cfg = _load(args.config)
    endpoint = args.endpoint
    if endpoint == "stdio":
        protocol.serve_stdio(cfg)
        return 0
    if endpoint.startswith("tcp:"):
        protocol.serve_tcp(cfg, int(endpoint.split(":", 1)[1]))
        return 0
    print(f"error: endpoint must be 'stdio' or 'tcp:<port>', got {endpoint!r}",
          file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="iabsim")
    sub = top.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run episodes under a baseline policy")
    run.add_argument("--config", help="YAML scenario config (defaults otherwise)")
    run.add_argument("--policy", default="roundrobin",
                     help="scheduling baseline: roundrobin | random | greedy")
    run.add_argument("--trajectory", default="stationary",
                     help="trajectory baseline: stationary | centroid")
    run.add_argument("--episodes", type=int, default=10)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default="out")
    run.add_argument("--trace-slots", action="store_true",
                     help="also write per-slot records to slots.jsonl")
    run.add_argument("--dump-rssi", action="store_true",
                     help="write RSSI CDF sample files (deployed vs donor-only)")
    run.add_argument("--serve", action="store_true",
                     help="serve the protocol instead of running episodes")
    run.add_argument("--endpoint", default="stdio")
    run.set_defaults(func=cmd_run)

    summ = sub.add_parser("summarize", help="aggregate episode CSVs")
    summ.add_argument("files", nargs="+")
    summ.add_argument("--convergence", action="store_true")
    summ.set_defaults(func=cmd_summarize)

    srv = sub.add_parser("serve", help="serve environments over the wire protocol")
    srv.add_argument("--config")
    srv.add_argument("--endpoint", default="stdio",
                     help="'stdio' or 'tcp:<port>'")
    srv.set_defaults(func=cmd_serve)
    return top


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("IABSIM_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command line: train / evaluate / baseline runs against a simulator server."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .client import EnvClient
from .configs import Hyperparams, desk_scenario, write_scenario
from .harness import BaselinePolicy, TTSMaddpg, evaluate
from .mappo import TTSMappo


def _client(args, scenario_path: Path) -> EnvClient:
    return EnvClient(config_path=str(scenario_path), endpoint=args.endpoint,
                     server_cmd=args.server_cmd)


def _scenario(args, out: Path) -> tuple[dict, Path]:
    if args.scenario_file:
        import yaml
        scenario = yaml.safe_load(Path(args.scenario_file).read_text()) or {}
        return scenario, Path(args.scenario_file)
    scenario = desk_scenario(mobile=args.scenario == "mobile",
                             world_seed=args.world_seed)
    return scenario, write_scenario(scenario, out / "scenario.yaml")


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario, scen_path = _scenario(args, out)
    hp = Hyperparams(seed=args.seed, episodes=args.episodes,
                     update_every=args.update_every)
    with _client(args, scen_path) as client:
        cls = TTSMaddpg if args.method == "maddpg" else TTSMappo
        trainer = cls(client, hp, scenario,
                      train_trajectory=(args.mode == "joint"))
        curve = trainer.train(out, train_seed_base=args.seed * 100_000)
        tail = curve[-max(1, len(curve) // 5):]
        mean_tail = sum(r["delivered_mbps"] for r in tail) / len(tail)
        print(f"trained {len(curve)} episodes; "
              f"tail delivered {mean_tail:.2f} Mbps; checkpoint in {out}")
        eval_seeds = [args.eval_seed_base + i for i in range(args.eval_episodes)]
        rows = evaluate(client, trainer.policy(), scenario, eval_seeds,
                        out / "eval_episodes.csv")
        mean_eval = sum(r["delivered_mbps"] for r in rows) / len(rows)
        print(f"evaluation over {len(rows)} episodes: {mean_eval:.2f} Mbps")
    return 0


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = torch.load(args.checkpoint, weights_only=False)
    scenario = state["scenario"]
    scen_path = write_scenario(scenario, out / "scenario.yaml")
    hp = Hyperparams(**{k: v for k, v in state["hp"].items()
                        if k in Hyperparams.__dataclass_fields__})
    with _client(args, scen_path) as client:
        cls = TTSMaddpg if args.method == "maddpg" else TTSMappo
        trainer = cls(client, hp, scenario, train_trajectory="long" in state)
        trainer.short.load_state_dict(state["short"])
        if trainer.long and "long" in state:
            trainer.long.load_state_dict(state["long"])
        eval_seeds = [args.eval_seed_base + i for i in range(args.eval_episodes)]
        rows = evaluate(client, trainer.policy(), scenario, eval_seeds,
                        out / "eval_episodes.csv")
        mean_eval = sum(r["delivered_mbps"] for r in rows) / len(rows)
        print(f"evaluation over {len(rows)} episodes: {mean_eval:.2f} Mbps")
    return 0


def cmd_baseline(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario, scen_path = _scenario(args, out)
    with _client(args, scen_path) as client:
        policy = BaselinePolicy(client, args.policy, args.trajectory, seed=args.seed)
        eval_seeds = [args.eval_seed_base + i for i in range(args.eval_episodes)]
        rows = evaluate(client, policy, scenario, eval_seeds,
                        out / "eval_episodes.csv")
        mean_eval = sum(r["delivered_mbps"] for r in rows) / len(rows)
        print(f"{args.policy}+{args.trajectory} over {len(rows)} episodes: "
              f"{mean_eval:.2f} Mbps")
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", choices=["static", "mobile"], default="static")
    p.add_argument("--scenario-file", help="explicit simulator YAML (overrides --scenario)")
    p.add_argument("--world-seed", type=int, default=7)
    p.add_argument("--endpoint", default="subprocess",
                   help="'subprocess' (spawn the server) or 'tcp:<port>'")
    p.add_argument("--server-cmd", default="iabsim")
    p.add_argument("--eval-episodes", type=int, default=10)
    p.add_argument("--eval-seed-base", type=int, default=900_000)
    p.add_argument("--out", default="runs/run")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="ttstrain")
    sub = top.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train TTS-MADDPG or TTS-MAPPO")
    tr.add_argument("--method", choices=["maddpg", "mappo"], default="maddpg")
    tr.add_argument("--mode", choices=["joint", "sched"], default="joint",
                    help="joint scheduling+trajectory or scheduling-only")
    tr.add_argument("--episodes", type=int, default=300)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--update-every", type=int, default=2)
    _common(tr)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--method", choices=["maddpg", "mappo"], default="maddpg")
    _common(ev)
    ev.set_defaults(func=cmd_evaluate)

    bl = sub.add_parser("baseline", help="evaluate a client-side baseline")
    bl.add_argument("--policy", choices=["roundrobin", "random"],
                    default="roundrobin")
    bl.add_argument("--trajectory", choices=["stationary", "centroid"],
                    default="stationary")
    bl.add_argument("--seed", type=int, default=0)
    _common(bl)
    bl.set_defaults(func=cmd_baseline)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

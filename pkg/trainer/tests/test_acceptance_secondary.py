"""Training-based acceptance: directional gains on the desk scenario.

Run with `pytest -m slow` (deselected by default). Each criterion prints its
measured numbers; budget is tens of minutes on CPU. The desk scenario is one
donor, two node UAVs, twelve users; training uses the pinned hyperparameters
(actor 1e-4, critic 1e-3, discount 0.95, batch 64, epsilon 0.4 decaying).
"""

import time
from pathlib import Path

import numpy as np
import pytest

from ttstrainer import (BaselinePolicy, EnvClient, Hyperparams, TTSMaddpg,
                        desk_scenario, evaluate)
from ttstrainer.configs import write_scenario

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
EVAL_SEEDS = [900_000 + i for i in range(10)]
WORLD_SEED = 7
RUNS = Path(__file__).resolve().parent.parent / "runs" / "acceptance"


def mean_delivered(rows: list[dict]) -> float:
    return float(np.mean([r["delivered"] for r in rows]))


def seed_averaged_drop(slot_traces: list[list[int]]) -> float:
    """Fractional fall from the first to last quarter of the averaged trace."""
    avg = np.mean(np.asarray(slot_traces, dtype=float), axis=0)
    q = len(avg) // 4
    first, last = avg[:q].mean(), avg[-q:].mean()
    return (first - last) / first


def train_and_eval(scenario: dict, scen_path: Path, seed: int, out: Path,
                   train_trajectory: bool) -> list[dict]:
    with EnvClient(config_path=str(scen_path)) as client:
        hp = Hyperparams(seed=seed, episodes=300, update_every=2)
        trainer = TTSMaddpg(client, hp, scenario, train_trajectory=train_trajectory)
        trainer.train(out, train_seed_base=seed * 100_000)
        return evaluate(client, trainer.policy(), scenario, EVAL_SEEDS,
                        out / "eval_episodes.csv")


def test_maddpg_scheduling_beats_roundrobin_static():
    """Learned scheduling clears round-robin by >= 10% on the static desk."""
    t0 = time.perf_counter()
    scenario = desk_scenario(mobile=False, world_seed=WORLD_SEED)
    scen_path = write_scenario(scenario, RUNS / "static" / "scenario.yaml")
    maddpg_means = []
    for seed in SEEDS:
        rows = train_and_eval(scenario, scen_path, seed,
                              RUNS / "static" / f"maddpg_s{seed}",
                              train_trajectory=False)
        maddpg_means.append(mean_delivered(rows))
    with EnvClient(config_path=str(scen_path)) as client:
        rr_rows = evaluate(client, BaselinePolicy(client, "roundrobin", "stationary"),
                           scenario, EVAL_SEEDS,
                           RUNS / "static" / "roundrobin" / "eval_episodes.csv")
    rr = mean_delivered(rr_rows)
    learned = float(np.mean(maddpg_means))
    elapsed = time.perf_counter() - t0
    print(f"\nMADDPG per-seed delivered {maddpg_means}, mean {learned:.0f}; "
          f"round-robin {rr:.0f}; ratio {learned / rr:.2f}; "
          f"runtime {elapsed / 60:.1f} min")
    assert learned >= 1.10 * rr, (learned, rr)
    assert elapsed < 45 * 60, f"runtime {elapsed / 60:.1f} min exceeds 45 min target"


@pytest.fixture(scope="module")
def mobile_runs():
    """Train joint and scheduling-only policies on the mobile desk, 3 seeds each."""
    scenario = desk_scenario(mobile=True, world_seed=WORLD_SEED)
    scen_path = write_scenario(scenario, RUNS / "mobile" / "scenario.yaml")
    out = {"joint": [], "sched_only": [], "scenario": scenario}
    for mode, train_traj in (("joint", True), ("sched_only", False)):
        for seed in SEEDS:
            rows = train_and_eval(scenario, scen_path, seed,
                                  RUNS / "mobile" / f"{mode}_s{seed}",
                                  train_trajectory=train_traj)
            out[mode].append(rows)
    return out


def test_joint_beats_scheduling_only_mobile(mobile_runs):
    """Adding trajectory control clears scheduling-only by >= 5% under mobility."""
    joint = float(np.mean([mean_delivered(rows) for rows in mobile_runs["joint"]]))
    sched = float(np.mean([mean_delivered(rows) for rows in mobile_runs["sched_only"]]))
    print(f"\njoint {joint:.0f} vs scheduling-only {sched:.0f}; "
          f"ratio {joint / sched:.3f}")
    assert joint >= 1.05 * sched, (joint, sched)


def test_mobility_stability_direction(mobile_runs):
    """Scheduling-only degrades more from first to last quarter than joint."""
    def traces(runs):
        return [r["slot_delivered"] for rows in runs for r in rows]

    drop_sched = seed_averaged_drop(traces(mobile_runs["sched_only"]))
    drop_joint = seed_averaged_drop(traces(mobile_runs["joint"]))
    print(f"\ndrop fraction scheduling-only {drop_sched:+.3f} "
          f"vs joint {drop_joint:+.3f}")
    assert drop_sched > drop_joint, (drop_sched, drop_joint)

"""Reproduce the reward-model ablation grid on synthetic preferences.

Four variants per seed: generalised vs raw labels, full attack set vs a
100-label budget. Policy training is off by default (MPPA is the headline
number); pass --train-policy for the full six-stage runs.

Usage:
    python scripts/run_ablations.py --seeds 5 --out runs/ablations
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from arglearn.pipeline import RunConfig, report_table, run_pipeline
from arglearn.policy import DqnConfig
from arglearn.reward_model import TrainConfig


def variant_config(seed: int, generalise: bool, label_budget, train_policy: bool) -> RunConfig:
    return RunConfig(
        env_seed=seed,
        generalise=generalise,
        label_budget=label_budget,
        n_policy_seeds=3 if train_policy else 0,
        reward=TrainConfig(),
        dqn=DqnConfig() if train_policy else DqnConfig(step_budget=0),
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--out", default="runs/ablations")
    parser.add_argument("--train-policy", action="store_true", help="also run DQN at 50k/100k/150k steps")
    args = parser.parse_args()

    out = Path(args.out)
    variants = {
        "gen_full": (True, None),
        "raw_full": (False, None),
        "gen_100": (True, 100),
        "raw_100": (False, 100),
    }
    collected = {name: [] for name in variants}
    run_dirs = []
    for seed in range(args.seeds):
        for name, (generalise, budget) in variants.items():
            cfg = variant_config(seed, generalise, budget, args.train_policy)
            rd = run_pipeline(cfg, out / f"{name}_seed{seed}")
            metrics = rd.read_metrics()
            collected[name].append(metrics["mppa_test"])
            run_dirs.append(rd)
            print(f"seed {seed} {name:>8}: MPPA test {metrics['mppa_test']:.4f}", flush=True)

    print()
    for name, values in collected.items():
        print(f"{name:>8}: median MPPA {float(np.median(values)):.4f} over {args.seeds} seeds")
    report_table(run_dirs, out / "report.md")
    print(f"\nwrote {out / 'report.md'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Iterative loop demo with the synthetic oracle standing in for the human.

Runs the loop twice (raw ten-queries-per-iteration vs generalised live-style
ordering) and prints the per-iteration metrics side by side.

Usage:
    python scripts/run_iterative_demo.py --iterations 4 --out runs/iterative
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from arglearn.pipeline import IterationConfig, RunConfig, run_iterative
from arglearn.reward_model import TrainConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=4)
    parser.add_argument("--dqn-steps", type=int, default=10_000)
    parser.add_argument("--out", default="runs/iterative")
    args = parser.parse_args()

    out = Path(args.out)
    for name, generalise in (("raw", False), ("generalised", True)):
        cfg = RunConfig(
            generalise=generalise,
            iterative=True,
            reward=TrainConfig(epochs=80),
            iteration=IterationConfig(iterations=args.iterations, dqn_steps=args.dqn_steps),
        )
        rd = run_iterative(cfg, out / name)
        metrics = rd.read_metrics()
        print(f"\n{name}: {metrics['n_source_labels']} queries, {metrics['n_preferences']} training pairs")
        for m in metrics["iterations"]:
            mppa = "n/a" if m["mppa_train"] is None else f"{m['mppa_train']:.3f}"
            dist = "n/a" if m["distance_mean"] is None else f"{m['distance_mean']:.3f}"
            print(
                f"  iter {m['iteration']}: length {m['trajectory_length']:>3}, "
                f"{m['queries']:>3} queries, train MPPA {mppa}, distance {dist}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())

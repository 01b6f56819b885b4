"""Small deterministic elicitation service for the UI round-trip test."""

import argparse

import numpy as np

from arglearn.argumentation import build_aaf
from arglearn.env import generate_maze
from arglearn.preference import sample_queries
from arglearn.service import ElicitationSession, serve
from arglearn.trajectories import generate_random_trajectories


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--log", required=True)
    parser.add_argument("--length", type=int, default=8)
    args = parser.parse_args()

    env = generate_maze(seed=3, wall_count=2)
    store = generate_random_trajectories(env, 8, args.length, np.random.default_rng(0))
    aaf = build_aaf(store, 0.2)
    session = ElicitationSession(env, store, aaf.attack_pairs, args.log)
    session.enqueue(sample_queries(aaf, 3, np.random.default_rng(1)))
    serve(session, port=args.port)


if __name__ == "__main__":
    main()

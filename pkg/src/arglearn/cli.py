"""Command-line entry points for the pipeline stages and full runs."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import argumentation as arg
from . import preference as pref
from .env import farthest_free_point, generate_maze, load_maze, save_maze
from .pipeline import (
    RunConfig,
    RunDirectory,
    TrueRewardAdapter,
    export_heatmaps,
    load_dataset,
    report_table,
    run_iterative,
    run_pipeline,
    save_dataset,
    save_extensions,
)
from .policy import QNetwork, evaluate_policy, model_reward_fn, train_dqn, true_reward_fn
from .reward_model import PairDataset, RewardModel, mppa, train
from .trajectories import TrajectoryStore, generate_random_trajectories


def load_config(args) -> RunConfig:
    if not args.config:
        cfg = RunConfig()
    elif args.config.lstrip().startswith("{"):  # inline JSON, handy for one-off flags
        cfg = RunConfig.from_dict(json.loads(args.config))
    else:
        cfg = RunConfig.from_json(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, env_seed=args.seed)
    return cfg


def _rd(args) -> RunDirectory:
    return RunDirectory(args.out)


def _load_store(rd: RunDirectory) -> TrajectoryStore:
    return TrajectoryStore.load_jsonl(rd.trajectories_path)


def _load_aaf(rd: RunDirectory) -> arg.Aaf:
    return arg.Aaf.from_json(json.loads(rd.aaf_path.read_text()))


def cmd_gen_trajectories(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    env = generate_maze(cfg.env_seed, cfg.wall_count)
    save_maze(env, rd.maze_path)
    store = generate_random_trajectories(
        env, cfg.n_trajectories, cfg.trajectory_length, np.random.default_rng(cfg.rollout_seed)
    )
    store.save_jsonl(rd.trajectories_path)
    print(f"wrote {len(store)} trajectories of length {cfg.trajectory_length} to {rd.trajectories_path}")
    return 0


def cmd_build_aaf(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    store = _load_store(rd)
    aaf = arg.build_aaf(store, cfg.delta)
    rd.aaf_path.write_text(json.dumps(aaf.to_json()) + "\n")
    print(
        f"AAF over {len(aaf.arguments)} arguments: {len(aaf.attack_pairs)} undirected "
        f"/ {aaf.directed_attack_count} directed attacks (delta={cfg.delta})"
    )
    return 0


def cmd_extensions(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    extensions = arg.preferred_extensions(_load_aaf(rd), cap=cfg.extension_cap)
    save_extensions(extensions, rd.extensions_path)
    print(f"{len(extensions)} preferred extensions -> {rd.extensions_path}")
    return 0


def cmd_label_synthetic(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    env = load_maze(rd.maze_path)
    store = _load_store(rd)
    aaf = _load_aaf(rd)
    rng = np.random.default_rng(cfg.query_seed)
    pairs = (
        sorted(aaf.attack_pairs)
        if cfg.label_budget is None
        else pref.sample_queries(aaf, cfg.label_budget, rng)
    )
    records = pref.label_pairs_synthetic(env, store, pairs, log_path=rd.labels_path)
    print(f"labeled {len(records)} attacking pairs -> {rd.labels_path}")
    return 0


def cmd_elicit_serve(args) -> int:
    from .service import ElicitationSession, serve

    cfg = load_config(args)
    rd = _rd(args)
    env = load_maze(rd.maze_path)
    store = _load_store(rd)
    aaf = _load_aaf(rd)
    session = ElicitationSession(env, store, aaf.attack_pairs, rd.labels_path)
    rng = np.random.default_rng(cfg.query_seed)
    n = cfg.label_budget if cfg.label_budget is not None else len(aaf.attack_pairs)
    session.enqueue(pref.sample_queries(aaf, n, rng))
    replayed = session.replay_log()
    if replayed:
        print(f"replayed {replayed} labels from {rd.labels_path}")
    ui = Path(args.ui) if args.ui else None
    print(f"serving {session.counts()['pending']} pending queries on http://127.0.0.1:{args.port}")
    serve(session, port=args.port, frontend_dir=ui)
    return 0


def cmd_generalise(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    env = load_maze(rd.maze_path)
    store = _load_store(rd)
    aaf = _load_aaf(rd)
    extensions = arg.preferred_extensions(aaf, cap=cfg.extension_cap)
    save_extensions(extensions, rd.extensions_path)
    if cfg.preference_mode == "synthetic" and cfg.label_budget is None:
        comparator = pref.make_synthetic_comparator(env, store)
    else:
        records = pref.records_from_log(pref.read_log(rd.labels_path))
        comparator = pref.make_count_comparator(records)
    order = pref.order_extensions(extensions, comparator)
    lifted = arg.lift_preferences(extensions, order)
    records = pref.build_generalised_dataset(aaf, lifted)
    save_dataset(records, rd.dataset_path)
    print(
        f"{len(extensions)} extensions ordered with {order.comparisons} comparisons; "
        f"{len(records)} generalised preferences -> {rd.dataset_path}"
    )
    return 0


def cmd_train_reward(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    store = _load_store(rd)
    records = load_dataset(rd.dataset_path)
    dataset = PairDataset.from_records(records, store)
    reward_cfg = cfg.reward_cfg()
    train_split, test_split = dataset.train_test_split(
        reward_cfg.test_fraction, np.random.default_rng(cfg.split_seed)
    )
    model = train(RewardModel(seed=reward_cfg.seed), train_split, reward_cfg)
    model.save(rd.reward_model_path)
    print(
        f"trained on {len(train_split)} pairs: MPPA train {mppa(model, train_split):.4f} "
        f"test {mppa(model, test_split):.4f} -> {rd.reward_model_path}"
    )
    return 0


def cmd_train_policy(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    env = load_maze(rd.maze_path)
    if args.true_reward:
        reward_fn = true_reward_fn(env)
    else:
        reward_fn = model_reward_fn(RewardModel.load(rd.reward_model_path))
    dqn_cfg = cfg.dqn_cfg()
    q = train_dqn(env, reward_fn, dqn_cfg)
    q.save(rd.qnet_path(0))
    start = farthest_free_point(env)
    mean, _ = evaluate_policy(env, q, cfg.eval_episode_length, n_seeds=1, start=start)
    print(f"trained {dqn_cfg.step_budget} steps; final distance {mean:.4f} -> {rd.qnet_path(0)}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    env = load_maze(rd.maze_path)
    q = QNetwork.load(rd.qnet_path(0))
    start = farthest_free_point(env)
    mean, std = evaluate_policy(env, q, cfg.eval_episode_length, n_seeds=args.n_seeds, start=start)
    print(f"greedy policy from {start}: distance {mean:.4f} ± {std:.4f} over {args.n_seeds} rollouts")
    return 0


def cmd_heatmap(args) -> int:
    cfg = load_config(args)
    rd = _rd(args)
    env = load_maze(rd.maze_path)
    model = TrueRewardAdapter(env) if args.true_reward else RewardModel.load(rd.reward_model_path)
    files = export_heatmaps(env, model, args.resolution, rd.heatmaps_dir)
    print(f"wrote heatmaps: {', '.join(str(p) for p in files.values())}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = load_config(args)
    rd = run_pipeline(cfg, args.out)
    print(json.dumps(rd.read_metrics(), indent=2, sort_keys=True))
    return 0


def cmd_iterate(args) -> int:
    cfg = load_config(args)
    cfg = dataclasses.replace(cfg, iterative=True)
    rd = run_iterative(cfg, args.out)
    print(json.dumps(rd.read_metrics(), indent=2, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    out = Path(args.out) / "report.md"
    text = report_table(args.runs, out)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arglearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run config (unknown keys rejected)")
        p.add_argument("--seed", type=int, help="override the master env seed")
        p.add_argument("--out", default="runs/run0", help="run directory")
        p.set_defaults(fn=fn)
        return p

    add("gen-trajectories", cmd_gen_trajectories, "generate the maze and random rollouts")
    add("build-aaf", cmd_build_aaf, "build the attack graph from stored trajectories")
    add("extensions", cmd_extensions, "enumerate preferred extensions of the AAF")
    p = add("elicit-serve", cmd_elicit_serve, "serve preference queries to the browser UI")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--ui", default="frontend", help="static UI directory to mount")
    add("label-synthetic", cmd_label_synthetic, "label sampled attacking pairs with the true-return oracle")
    add("generalise", cmd_generalise, "order extensions, lift preferences, build the dataset")
    add("train-reward", cmd_train_reward, "train the pairwise reward model on the dataset")
    p = add("train-policy", cmd_train_policy, "train a DQN policy on the learned reward")
    p.add_argument("--true-reward", action="store_true", help="train on the true reward instead")
    p = add("evaluate", cmd_evaluate, "evaluate the greedy policy from the fixed start")
    p.add_argument("--n-seeds", type=int, default=3)
    p = add("heatmap", cmd_heatmap, "export value and best-action heatmaps")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--true-reward", action="store_true", help="use the true reward instead of the model")
    add("pipeline", cmd_pipeline, "run all six stages once")
    add("iterate", cmd_iterate, "run the iterative loop")
    p = add("report", cmd_report, "tabulate metrics from finished runs")
    p.add_argument("runs", nargs="+", help="run directories")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

import dataclasses
import json
import threading

import numpy as np
import pytest

from arglearn.env import MazeEnv, load_maze
from arglearn.pipeline import (
    IterationConfig,
    RunConfig,
    RunDirectory,
    StageError,
    TrueRewardAdapter,
    export_heatmaps,
    load_dataset,
    report_table,
    run_iterative,
    run_pipeline,
)
from arglearn.policy import DqnConfig
from arglearn.reward_model import RewardModel, TrainConfig

OPEN = MazeEnv(walls=(), goal=(0.9, 0.9))


def tiny_config(**overrides) -> RunConfig:
    base = dict(
        env_seed=0,
        wall_count=2,
        n_trajectories=12,
        trajectory_length=10,
        heatmap_resolution=8,
        n_policy_seeds=1,
        reward=TrainConfig(epochs=15, early_stop_patience=3),
        dqn=DqnConfig(step_budget=800, warmup=64, target_sync=100, checkpoint_steps=(400, 800)),
        iteration=IterationConfig(iterations=2, dqn_steps=300, length_start=8, length_increment=4),
    )
    base.update(overrides)
    return RunConfig(**base)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_dict({"env_seed": 1, "bogus": 2})
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_dict({"reward": {"learning_rate": 0.1, "bogus": 1}})


def test_config_round_trip_and_hash():
    cfg = tiny_config()
    clone = RunConfig.from_dict(cfg.to_dict())
    assert clone == cfg
    assert clone.config_hash() == cfg.config_hash()
    assert clone.config_hash() != dataclasses.replace(cfg, env_seed=99).config_hash()


def test_config_requires_labels_path_for_human_mode():
    with pytest.raises(ValueError):
        RunConfig(preference_mode="human")
    with pytest.raises(ValueError):
        RunConfig(preference_mode="nonsense")


def test_pipeline_synthetic_generalised(tmp_path):
    rd = run_pipeline(tiny_config(), tmp_path / "run")
    for path in (
        rd.config_path,
        rd.maze_path,
        rd.trajectories_path,
        rd.aaf_path,
        rd.extensions_path,
        rd.dataset_path,
        rd.reward_model_path,
        rd.metrics_path,
        rd.qnet_path(0),
        rd.heatmaps_dir / "value.csv",
        rd.heatmaps_dir / "value.png",
    ):
        assert path.exists(), path
    metrics = rd.read_metrics()
    assert set(metrics) >= {
        "mppa_train",
        "mppa_test",
        "n_preferences",
        "n_source_labels",
        "distance_mean",
        "distance_std",
        "checkpoints",
    }
    assert metrics["n_source_labels"] == 0  # pure synthetic ordering needs no labels
    assert metrics["n_preferences"] == len(load_dataset(rd.dataset_path))
    assert len(metrics["checkpoints"]) == 2
    assert 0.0 <= metrics["mppa_test"] <= 1.0


def test_pipeline_synthetic_passthrough_dataset_size(tmp_path):
    cfg = tiny_config(generalise=False, label_budget=9)
    rd = run_pipeline(cfg, tmp_path / "run")
    metrics = rd.read_metrics()
    assert metrics["n_preferences"] == 9
    assert metrics["n_source_labels"] == 9
    assert rd.labels_path.exists()


def test_pipeline_determinism_byte_identical_metrics(tmp_path):
    cfg = tiny_config()
    rd1 = run_pipeline(cfg, tmp_path / "a")
    rd2 = run_pipeline(cfg, tmp_path / "b")
    assert rd1.metrics_path.read_bytes() == rd2.metrics_path.read_bytes()


def test_pipeline_human_mode_consumes_label_log(tmp_path):
    # produce a label log with the synthetic oracle standing in for the human
    seed_run = run_pipeline(tiny_config(generalise=False, label_budget=8), tmp_path / "seed_run")
    cfg = tiny_config(
        preference_mode="human",
        generalise=True,
        labels_path=str(seed_run.labels_path),
        label_budget=8,
    )
    rd = run_pipeline(cfg, tmp_path / "human_run")
    metrics = rd.read_metrics()
    assert metrics["n_source_labels"] == 8
    assert metrics["n_preferences"] > 0


def test_pipeline_human_live_with_auto_labeler(tmp_path):
    from fastapi.testclient import TestClient

    from arglearn.argumentation import build_aaf
    from arglearn.env import generate_maze
    from arglearn.service import ElicitationSession, auto_label_http, create_app
    from arglearn.trajectories import generate_random_trajectories

    cfg = tiny_config(preference_mode="human-live", generalise=True, label_budget=6)
    # mirror the pipeline's own maze/rollout stages to build the session
    env = generate_maze(cfg.env_seed, cfg.wall_count)
    store = generate_random_trajectories(
        env, cfg.n_trajectories, cfg.trajectory_length, np.random.default_rng(cfg.rollout_seed)
    )
    aaf = build_aaf(store, cfg.delta)
    session = ElicitationSession(env, store, aaf.attack_pairs, tmp_path / "live_labels.jsonl")
    client = TestClient(create_app(session))
    stop = threading.Event()
    worker = threading.Thread(target=auto_label_http, args=(client, env, store, stop))
    worker.start()
    try:
        rd = run_pipeline(cfg, tmp_path / "live_run", session=session)
    finally:
        stop.set()
        worker.join(timeout=60)
    metrics = rd.read_metrics()
    assert metrics["n_preferences"] > 0
    assert metrics["n_source_labels"] == 6
    # the fixed pool is collected up front; ordering consults it without new queries
    assert session.counts()["answered"] == 6


def test_pipeline_records_stage_errors(tmp_path):
    cfg = tiny_config(n_trajectories=1)  # build_aaf needs >= 2
    with pytest.raises(StageError, match="aaf"):
        run_pipeline(cfg, tmp_path / "run")
    err = json.loads((tmp_path / "run" / "error.json").read_text())
    assert err["stage"] == "aaf"
    assert (tmp_path / "run" / "trajectories.jsonl").exists()  # partial artifacts kept


def test_iterative_schedule_and_query_cap(tmp_path):
    cfg = tiny_config(
        iterative=True,
        generalise=False,
        iteration=IterationConfig(
            iterations=3, length_start=8, length_increment=4, queries_per_iteration=10, dqn_steps=200
        ),
    )
    rd = run_iterative(cfg, tmp_path / "iter")
    metrics = rd.read_metrics()
    lengths = [m["trajectory_length"] for m in metrics["iterations"]]
    assert lengths == [8, 12, 16]
    assert metrics["n_source_labels"] <= 10 * 3
    assert metrics["mppa_test"] is None
    assert rd.trajectories_path.exists()


def test_iterative_single_iteration_matches_pipeline_shape(tmp_path):
    cfg = tiny_config(iterative=True, generalise=True, iteration=IterationConfig(iterations=1, dqn_steps=200, length_start=8))
    rd = run_iterative(cfg, tmp_path / "iter1")
    metrics = rd.read_metrics()
    assert len(metrics["iterations"]) == 1
    assert metrics["n_preferences"] > 0


def test_heatmap_zero_model_normalises_to_half(tmp_path):
    m = RewardModel(seed=0)
    for w in m.net.weights:
        w[:] = 0.0
    for b in m.net.biases:
        b[:] = 0.0
    export_heatmaps(OPEN, m, 5, tmp_path)
    rows = (tmp_path / "value.csv").read_text().strip().splitlines()[1:]
    assert len(rows) == 25
    assert all(float(r.split(",")[2]) == 0.5 for r in rows)


def test_heatmap_true_reward_adapter_peaks_in_goal_region(tmp_path):
    env = MazeEnv(walls=(), goal=(0.5, 0.5))
    export_heatmaps(env, TrueRewardAdapter(env), 20, tmp_path)
    rows = (tmp_path / "value.csv").read_text().strip().splitlines()[1:]
    from arglearn.env import normalised_goal_distance

    for row in rows:
        x, y, v, _ = row.split(",")
        if normalised_goal_distance(env, (float(x), float(y))) <= 0.3 - 0.02:
            assert float(v) == 1.0  # goal-region cells hold the grid max


def test_heatmap_action_codes_in_range(tmp_path):
    m = RewardModel(seed=1)
    export_heatmaps(OPEN, m, 6, tmp_path)
    rows = (tmp_path / "action.csv").read_text().strip().splitlines()[1:]
    assert len(rows) == 36
    assert set(int(r.split(",")[2]) for r in rows) <= {0, 1, 2, 3}


def test_heatmap_rejects_tiny_resolution(tmp_path):
    with pytest.raises(ValueError):
        export_heatmaps(OPEN, RewardModel(seed=0), 1, tmp_path)


def test_report_table(tmp_path):
    rd = run_pipeline(tiny_config(), tmp_path / "gen")
    rd2 = run_pipeline(tiny_config(generalise=False, label_budget=9), tmp_path / "raw")
    text = report_table([rd, rd2], tmp_path / "report.md")
    assert "MPPA" in text
    assert "(from" not in text.splitlines()[3]  # raw run has no source-label annotation
    gen_metrics = rd.read_metrics()
    if gen_metrics["n_source_labels"]:
        assert "(from" in text
    assert (tmp_path / "report.md").exists()


def test_report_table_missing_metrics_is_stage_error(tmp_path):
    empty = RunDirectory(tmp_path / "empty")
    with pytest.raises(StageError):
        report_table([empty], tmp_path / "report.md")


def test_maze_artifact_loadable(tmp_path):
    rd = run_pipeline(tiny_config(), tmp_path / "run")
    env = load_maze(rd.maze_path)
    assert len(env.walls) == 2

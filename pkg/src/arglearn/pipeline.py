"""Pipeline engine wiring the six stages end to end, plus the iterative loop,
run persistence, heatmap export, and the results table."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import argumentation as arg
from . import preference as pref
from .env import (
    Action,
    MazeEnv,
    farthest_free_point,
    generate_maze,
    in_wall,
    save_maze,
    transition,
    true_reward,
)
from .policy import DqnConfig, QNetwork, evaluate_policy, greedy_action, model_reward_fn, train_dqn
from .reward_model import PairDataset, RewardModel, TrainConfig, mppa, train
from .trajectories import TrajectoryStore, generate_random_trajectories, policy_rollout, random_rollout

PREFERENCE_MODES = ("synthetic", "human", "human-live")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class IterationConfig:
    iterations: int = 3
    length_start: int = 20
    length_increment: int = 10
    queries_per_iteration: int = 10
    dqn_steps: int = 10_000
    rollout_epsilon: float = 0.2
    query_budget: int | None = None  # per-iteration live-sort budget (generalised mode)
    budget_seconds: float | None = None  # optional wall-clock mode

    def length_at(self, iteration: int) -> int:
        return self.length_start + iteration * self.length_increment


@dataclass
class RunConfig:
    env_seed: int = 0
    wall_count: int = 6
    n_trajectories: int = 100
    trajectory_length: int = 20
    delta: float = 0.2
    preference_mode: str = "synthetic"
    label_budget: int | None = None
    generalise: bool = True
    include_raw_labels: bool = False
    labels_path: str | None = None
    extension_cap: int = arg.DEFAULT_EXTENSION_CAP
    n_policy_seeds: int = 3
    eval_episode_length: int = 200
    heatmap_resolution: int = 100
    reward: TrainConfig = field(default_factory=TrainConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)
    iterative: bool = False
    iteration: IterationConfig = field(default_factory=IterationConfig)

    def __post_init__(self):
        if self.preference_mode not in PREFERENCE_MODES:
            raise ValueError(f"preference_mode must be one of {PREFERENCE_MODES}")
        if self.preference_mode == "human" and self.labels_path is None:
            raise ValueError("preference_mode 'human' needs labels_path")

    # stage seeds derive from env_seed with fixed offsets so one master seed
    # varies the whole run; explicit nested seeds still win when configured
    @property
    def rollout_seed(self) -> int:
        return self.env_seed + 100

    @property
    def query_seed(self) -> int:
        return self.env_seed + 200

    @property
    def split_seed(self) -> int:
        return self.env_seed + 300

    def reward_cfg(self) -> TrainConfig:
        cfg = dataclasses.replace(self.reward)
        if cfg.seed is None:
            cfg.seed = self.env_seed + 400
        return cfg

    def dqn_cfg(self, policy_seed: int = 0) -> DqnConfig:
        cfg = dataclasses.replace(self.dqn)
        if cfg.seed is None:
            cfg.seed = self.env_seed + 500
        cfg.seed = cfg.seed + policy_seed
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        return _strict_dataclass(
            cls, obj, nested={"reward": TrainConfig, "dqn": DqnConfig, "iteration": IterationConfig}
        )

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _strict_dataclass(cls, obj: dict, nested: dict | None = None):
    """Build a dataclass from a dict, rejecting unknown keys (recursively)."""
    nested = nested or {}
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(obj) - names
    if unknown:
        raise ValueError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for key, value in obj.items():
        if key in nested and isinstance(value, dict):
            kwargs[key] = _strict_dataclass(nested[key], value)
        elif key in nested:
            raise ValueError(f"config key {key!r} must be an object")
        else:
            if key == "checkpoint_steps" and isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
    return cls(**kwargs)


class RunDirectory:
    """On-disk layout of one pipeline run."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    @property
    def config_path(self):
        return self.path / "config.json"

    @property
    def maze_path(self):
        return self.path / "maze.json"

    @property
    def trajectories_path(self):
        return self.path / "trajectories.jsonl"

    @property
    def aaf_path(self):
        return self.path / "aaf.json"

    @property
    def extensions_path(self):
        return self.path / "extensions.json"

    @property
    def labels_path(self):
        return self.path / "labels.jsonl"

    @property
    def dataset_path(self):
        return self.path / "dataset.jsonl"

    @property
    def reward_model_path(self):
        return self.path / "reward_model.json"

    @property
    def metrics_path(self):
        return self.path / "metrics.json"

    @property
    def heatmaps_dir(self):
        return self.path / "heatmaps"

    def qnet_path(self, policy_seed: int = 0):
        return self.path / f"qnet_{policy_seed}.json"

    def write_config(self, cfg: RunConfig) -> None:
        payload = {"config": cfg.to_dict(), "config_hash": cfg.config_hash()}
        self.config_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def read_config(self) -> RunConfig:
        payload = json.loads(self.config_path.read_text())
        return RunConfig.from_dict(payload["config"])

    def write_metrics(self, metrics: dict) -> None:
        self.metrics_path.write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n")

    def write_manifest(self, cfg: RunConfig) -> None:
        """Record every artifact in the directory against the producing config hash."""
        artifacts = sorted(
            str(p.relative_to(self.path)) for p in self.path.rglob("*") if p.is_file() and p.name != "manifest.json"
        )
        payload = {"config_hash": cfg.config_hash(), "artifacts": artifacts}
        (self.path / "manifest.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def read_metrics(self) -> dict:
        return json.loads(self.metrics_path.read_text())

    def record_stage_error(self, stage: str, exc: BaseException) -> None:
        (self.path / "error.json").write_text(
            json.dumps({"stage": stage, "error": repr(exc)}, indent=2) + "\n"
        )


def _stage(rd: RunDirectory, name: str, fn):
    try:
        return fn()
    except Exception as exc:  # record the failing stage, keep partial artifacts
        rd.record_stage_error(name, exc)
        raise StageError(name, exc) from exc


def save_extensions(extensions, path) -> None:
    Path(path).write_text(json.dumps([sorted(e.members) for e in extensions]) + "\n")


def save_dataset(records, path) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps({"winner": r.winner, "loser": r.loser, "source": r.source}) + "\n")


def load_dataset(path) -> list[pref.PreferenceRecord]:
    records = []
    with open(path) as f:
        for line in f:
            if line.strip():
                obj = json.loads(line)
                records.append(pref.PreferenceRecord(obj["winner"], obj["loser"], obj["source"]))
    return records


def collect_source_labels(cfg: RunConfig, env, store, aaf, log_path, session=None):
    """Step-3 label pool per preference mode; empty for the pure synthetic
    protocol (its extension order needs no labels)."""
    rng = np.random.default_rng(cfg.query_seed)
    if cfg.preference_mode == "synthetic":
        if cfg.label_budget is None:
            if cfg.generalise:
                return []
            pairs = sorted(aaf.attack_pairs)
        else:
            pairs = pref.sample_queries(aaf, cfg.label_budget, rng)
        return pref.label_pairs_synthetic(env, store, pairs, log_path=log_path)
    if cfg.preference_mode == "human":
        entries = pref.read_log(cfg.labels_path)
        records = pref.records_from_log(entries)
        if cfg.label_budget is not None:
            records = records[: cfg.label_budget]
        return records
    # human-live: block on the service until the sampled queries are answered
    if session is None:
        raise ValueError("preference_mode 'human-live' needs an elicitation session")
    n = cfg.label_budget if cfg.label_budget is not None else len(aaf.attack_pairs)
    pairs = pref.sample_queries(aaf, n, rng)
    queries = session.enqueue(pairs)
    records = []
    for q in queries:
        done = session.wait_for(q.query_id)
        if done.status == "answered":
            records.append(session.record_for(q.query_id))
    return records


def _ordering_comparator(cfg: RunConfig, env, store, source_records):
    """Non-iterative ordering: pure synthetic runs compare true return sums;
    every labeled protocol counts its fixed Step-3 pool. Live per-comparison
    queries are reserved for the iterative loop."""
    if cfg.preference_mode == "synthetic" and cfg.label_budget is None:
        return pref.make_synthetic_comparator(env, store)
    return pref.make_count_comparator(source_records)


def generalise_records(cfg: RunConfig, env, store, aaf, source_records, rd: RunDirectory | None = None):
    """Step 4: enumerate extensions, order them, lift, and build the dataset."""
    extensions = arg.preferred_extensions(aaf, cap=cfg.extension_cap)
    if rd is not None:
        save_extensions(extensions, rd.extensions_path)
    comparator = _ordering_comparator(cfg, env, store, source_records)
    order = pref.order_extensions(extensions, comparator)
    lifted = arg.lift_preferences(extensions, order)
    records = pref.build_generalised_dataset(aaf, lifted)
    if cfg.include_raw_labels:
        seen = {(r.winner, r.loser) for r in records}
        records += [r for r in source_records if (r.winner, r.loser) not in seen]
    return extensions, order, records


def train_reward_stage(cfg: RunConfig, store, records, warm_model: RewardModel | None = None):
    """Step 5: split, train, and score the reward model.

    Records are put in canonical unordered-pair order first, so the held-out
    pairs depend only on the pair set and the split seed, not on the order
    labels happened to be collected in.
    """
    records = sorted(records, key=lambda r: (min(r.winner, r.loser), max(r.winner, r.loser), r.winner))
    dataset = PairDataset.from_records(records, store)
    reward_cfg = cfg.reward_cfg()
    train_split, test_split = dataset.train_test_split(reward_cfg.test_fraction, np.random.default_rng(cfg.split_seed))
    model = warm_model if warm_model is not None else RewardModel(seed=reward_cfg.seed)
    model = train(model, train_split, reward_cfg)
    return model, mppa(model, train_split), mppa(model, test_split)


def train_policy_stage(cfg: RunConfig, env, model: RewardModel, rd: RunDirectory | None = None):
    """Step 6: train n_policy_seeds Q-networks on the learned reward and
    evaluate the greedy policy at every checkpoint step."""
    start = farthest_free_point(env)
    by_step: dict[int, list[float]] = {}
    qnets = []
    for k in range(cfg.n_policy_seeds):
        dqn_cfg = cfg.dqn_cfg(policy_seed=k)

        def on_checkpoint(step, q):
            mean, _ = evaluate_policy(env, q, cfg.eval_episode_length, n_seeds=1, start=start)
            by_step.setdefault(step, []).append(mean)

        q = train_dqn(env, model_reward_fn(model), dqn_cfg, checkpoint_cb=on_checkpoint)
        if dqn_cfg.step_budget not in dqn_cfg.checkpoint_steps:
            mean, _ = evaluate_policy(env, q, cfg.eval_episode_length, n_seeds=1, start=start)
            by_step.setdefault(dqn_cfg.step_budget, []).append(mean)
        qnets.append(q)
        if rd is not None:
            q.save(rd.qnet_path(k))
    checkpoints = []
    for step, vals in sorted(by_step.items()):
        arr = np.array(vals)
        if bool(np.all(arr == arr[0])):  # identical seeds report exactly ± 0
            mean, std = float(arr[0]), 0.0
        else:
            mean, std = float(arr.mean()), float(arr.std())
        checkpoints.append({"step": step, "distance_mean": mean, "distance_std": std})
    return qnets, checkpoints


def run_pipeline(cfg: RunConfig, out_dir, session=None) -> RunDirectory:
    """Execute the six stages once, persisting every artifact under out_dir."""
    rd = RunDirectory(out_dir)
    rd.write_config(cfg)

    env = _stage(rd, "maze", lambda: generate_maze(cfg.env_seed, cfg.wall_count))
    save_maze(env, rd.maze_path)

    def make_store():
        rng = np.random.default_rng(cfg.rollout_seed)
        store = generate_random_trajectories(env, cfg.n_trajectories, cfg.trajectory_length, rng)
        store.save_jsonl(rd.trajectories_path)
        return store

    store = _stage(rd, "trajectories", make_store)
    aaf = _stage(rd, "aaf", lambda: arg.build_aaf(store, cfg.delta))
    rd.aaf_path.write_text(json.dumps(aaf.to_json()) + "\n")

    source_records = _stage(
        rd, "labels", lambda: collect_source_labels(cfg, env, store, aaf, rd.labels_path, session=session)
    )

    if cfg.generalise:
        _, _, records = _stage(
            rd, "generalise", lambda: generalise_records(cfg, env, store, aaf, source_records, rd=rd)
        )
    else:
        records = source_records
    save_dataset(records, rd.dataset_path)

    model, mppa_train, mppa_test = _stage(rd, "reward", lambda: train_reward_stage(cfg, store, records))
    model.save(rd.reward_model_path)

    _, checkpoints = _stage(rd, "policy", lambda: train_policy_stage(cfg, env, model, rd=rd))

    _stage(rd, "heatmaps", lambda: export_heatmaps(env, model, cfg.heatmap_resolution, rd.heatmaps_dir))

    final = checkpoints[-1] if checkpoints else {"distance_mean": None, "distance_std": None}
    rd.write_metrics(
        {
            "mppa_train": mppa_train,
            "mppa_test": mppa_test,
            "n_preferences": len(records),
            "n_source_labels": len(source_records),
            "distance_mean": final["distance_mean"],
            "distance_std": final["distance_std"],
            "checkpoints": checkpoints,
            "generalised": cfg.generalise,
        }
    )
    rd.write_manifest(cfg)
    return rd


def run_iterative(cfg: RunConfig, out_dir, session=None) -> RunDirectory:
    """Cycle through the six stages, growing trajectory length per iteration.

    Iteration 0 rolls out randomly; later iterations roll out epsilon-greedy
    from the maze's fixed start state with the current policy. Labels and
    generalised records accumulate; the reward model and Q-network are
    warm-started between iterations.
    """
    rd = RunDirectory(out_dir)
    rd.write_config(cfg)
    it = cfg.iteration

    env = _stage(rd, "maze", lambda: generate_maze(cfg.env_seed, cfg.wall_count))
    save_maze(env, rd.maze_path)
    start = farthest_free_point(env)

    store = TrajectoryStore(metadata={"env_seed": cfg.env_seed})
    rng = np.random.default_rng(cfg.rollout_seed)
    qrng = np.random.default_rng(cfg.query_seed)

    model: RewardModel | None = None
    qnet: QNetwork | None = None
    all_records: list[pref.PreferenceRecord] = []
    iteration_metrics = []
    total_queries = 0
    t_begin = time.monotonic()

    for k in range(it.iterations):
        if it.budget_seconds is not None and time.monotonic() - t_begin > it.budget_seconds:
            break
        store.metadata["iteration"] = k
        length = it.length_at(k)
        new_ids = []
        for _ in range(cfg.n_trajectories):
            if k == 0:
                t = random_rollout(env, length, rng)
            elif qnet is None:
                t = policy_rollout(env, lambda s: Action(int(rng.integers(0, 4))), length, start, 1.0, rng)
            else:
                t = policy_rollout(env, lambda s: greedy_action(qnet, s), length, start, it.rollout_epsilon, rng)
            new_ids.append(store.add(t.states, t.actions).id)

        aaf = _stage(rd, f"aaf[{k}]", lambda: arg.build_aaf(store, cfg.delta, ids=new_ids))

        if cfg.generalise:
            budget = pref.QueryBudget(it.query_budget) if it.query_budget is not None else None

            def generalise_iter():
                extensions = arg.preferred_extensions(aaf, cap=cfg.extension_cap)
                if cfg.preference_mode == "synthetic":
                    comparator = pref.make_synthetic_comparator(env, store)
                elif cfg.preference_mode == "human-live":
                    from .service import make_live_comparator

                    comparator = make_live_comparator(session, budget=budget)
                else:
                    raise ValueError("iterative generalised runs need synthetic or human-live labels")
                order = pref.order_extensions(extensions, comparator)
                lifted = arg.lift_preferences(extensions, order)
                return pref.build_generalised_dataset(aaf, lifted), comparator.comparison_count

            new_records, n_queries = _stage(rd, f"generalise[{k}]", generalise_iter)
        else:
            pairs = pref.sample_queries(aaf, it.queries_per_iteration, qrng)

            def label_iter():
                if cfg.preference_mode == "synthetic":
                    return pref.label_pairs_synthetic(env, store, pairs, log_path=rd.labels_path)
                if session is None:
                    raise ValueError("live labeling needs an elicitation session")
                queries = session.enqueue(pairs)
                out = []
                for q in queries:
                    done = session.wait_for(q.query_id)
                    if done.status == "answered":
                        out.append(session.record_for(q.query_id))
                return out

            new_records = _stage(rd, f"labels[{k}]", label_iter)
            n_queries = len(pairs)
        total_queries += n_queries
        all_records.extend(new_records)
        if not all_records:
            # nothing labeled yet (e.g. an attack-free iteration); keep rolling
            iteration_metrics.append(
                {
                    "iteration": k,
                    "trajectory_length": length,
                    "queries": n_queries,
                    "n_records": 0,
                    "mppa_train": None,
                    "distance_mean": None,
                    "step": (k + 1) * it.dqn_steps,
                }
            )
            continue

        def reward_iter():
            nonlocal model
            dataset = PairDataset.from_records(all_records, store)
            reward_cfg = cfg.reward_cfg()
            if model is None:
                model = RewardModel(seed=reward_cfg.seed)
            model = train(model, dataset, reward_cfg)
            return mppa(model, dataset)

        mppa_train = _stage(rd, f"reward[{k}]", reward_iter)

        def policy_iter():
            nonlocal qnet
            dqn_cfg = cfg.dqn_cfg()
            dqn_cfg.step_budget = it.dqn_steps
            dqn_cfg.checkpoint_steps = ()
            dqn_cfg.seed = dqn_cfg.seed + k
            qnet = train_dqn(env, model_reward_fn(model), dqn_cfg, q=qnet)
            return evaluate_policy(env, qnet, cfg.eval_episode_length, n_seeds=1, start=start)

        mean, std = _stage(rd, f"policy[{k}]", policy_iter)
        iteration_metrics.append(
            {
                "iteration": k,
                "trajectory_length": length,
                "queries": n_queries,
                "n_records": len(new_records),
                "mppa_train": mppa_train,
                "distance_mean": mean,
                "step": (k + 1) * it.dqn_steps,
            }
        )

    store.save_jsonl(rd.trajectories_path)
    save_dataset(all_records, rd.dataset_path)
    if model is not None:
        model.save(rd.reward_model_path)
        _stage(rd, "heatmaps", lambda: export_heatmaps(env, model, cfg.heatmap_resolution, rd.heatmaps_dir))
    if qnet is not None:
        qnet.save(rd.qnet_path(0))

    final = iteration_metrics[-1] if iteration_metrics else {"distance_mean": None}
    rd.write_metrics(
        {
            # per-iteration train MPPA is not comparable to the fixed-split runs
            "mppa_train": final.get("mppa_train"),
            "mppa_test": None,
            "n_preferences": len(all_records),
            "n_source_labels": total_queries,
            "distance_mean": final.get("distance_mean"),
            "distance_std": 0.0 if iteration_metrics else None,
            "checkpoints": [
                {"step": m["step"], "distance_mean": m["distance_mean"], "distance_std": 0.0}
                for m in iteration_metrics
            ],
            "iterations": iteration_metrics,
            "generalised": cfg.generalise,
        }
    )
    rd.write_manifest(cfg)
    return rd


class TrueRewardAdapter:
    """Makes the environment's true reward quack like a reward model."""

    def __init__(self, env: MazeEnv):
        self.env = env

    def predict_reward(self, s, a) -> float:
        s_next = transition(self.env, s, Action(a))
        return true_reward(self.env, s, Action(a), s_next)


def _grid_predictions(env: MazeEnv, model, resolution: int) -> np.ndarray:
    """(resolution, resolution, 4) rewards at cell centers; [ix, iy, action]."""
    centers = (np.arange(resolution) + 0.5) / resolution
    if hasattr(model, "predict_batch"):
        xs, ys = np.meshgrid(centers, centers, indexing="ij")
        base = np.stack([xs.ravel(), ys.ravel()], axis=1)
        feats = np.zeros((len(base) * 4, 6))
        for a in range(4):
            feats[a * len(base) : (a + 1) * len(base), 0:2] = base
            feats[a * len(base) : (a + 1) * len(base), 2 + a] = 1.0
        preds = model.predict_batch(feats)
        return preds.reshape(4, resolution, resolution).transpose(1, 2, 0)
    grid = np.zeros((resolution, resolution, 4))
    for ix, x in enumerate(centers):
        for iy, y in enumerate(centers):
            for a in range(4):
                grid[ix, iy, a] = model.predict_reward((x, y), Action(a))
    return grid


def export_heatmaps(env: MazeEnv, model, resolution: int, out_dir) -> dict:
    """Value heatmap (max-action reward, min-max normalised over the grid) and
    best-action heatmap (codes 0-3), each as CSV plus a rendered PNG."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    centers = (np.arange(resolution) + 0.5) / resolution
    grid = _grid_predictions(env, model, resolution)
    value = grid.max(axis=2)
    action = grid.argmax(axis=2)
    lo, hi = float(value.min()), float(value.max())
    norm = np.full_like(value, 0.5) if hi == lo else (value - lo) / (hi - lo)
    wall_mask = np.zeros((resolution, resolution), dtype=bool)
    for ix, x in enumerate(centers):
        for iy, y in enumerate(centers):
            wall_mask[ix, iy] = in_wall(env.walls, x, y)

    value_csv = out / "value.csv"
    action_csv = out / "action.csv"
    with open(value_csv, "w") as f:
        f.write("x,y,value,wall\n")
        for iy in range(resolution):
            for ix in range(resolution):
                f.write(f"{centers[ix]},{centers[iy]},{norm[ix, iy]},{int(wall_mask[ix, iy])}\n")
    with open(action_csv, "w") as f:
        f.write("x,y,action,wall\n")
        for iy in range(resolution):
            for ix in range(resolution):
                f.write(f"{centers[ix]},{centers[iy]},{int(action[ix, iy])},{int(wall_mask[ix, iy])}\n")

    _render_heatmaps(env, norm, action, wall_mask, out)
    return {"value_csv": value_csv, "action_csv": action_csv, "value_png": out / "value.png", "action_png": out / "action.png"}


def _render_heatmaps(env, norm, action, wall_mask, out: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    for name, data, cmap, vmax in (("value", norm, "viridis", 1.0), ("action", action, "tab10", 3)):
        fig, ax = plt.subplots(figsize=(5, 5))
        shown = np.ma.masked_where(wall_mask.T, data.T.astype(float))
        ax.imshow(shown, origin="lower", extent=(0, 1, 0, 1), cmap=cmap, vmin=0.0, vmax=vmax)
        ax.plot(*env.goal, marker="*", color="lime", markersize=14)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.savefig(out / f"{name}.png", dpi=120, bbox_inches="tight")
        plt.close(fig)


def report_table(run_dirs: list, out_path) -> str:
    """Markdown table mirroring the results layout: preference counts, MPPA,
    and per-checkpoint distances for each run."""
    if not run_dirs:
        raise ValueError("need at least one run")
    rows = []
    steps: list[int] = []
    for rd in run_dirs:
        rd = rd if isinstance(rd, RunDirectory) else RunDirectory(rd)
        if not rd.metrics_path.exists():
            raise StageError("report", FileNotFoundError(f"{rd.metrics_path} missing"))
        metrics = rd.read_metrics()
        cfg = rd.read_config()
        for c in metrics.get("checkpoints", []):
            if c["step"] not in steps:
                steps.append(c["step"])
        rows.append((rd.path.name, cfg, metrics))
    steps.sort()

    def fmt_pref(cfg, metrics):
        n = metrics["n_preferences"]
        if metrics.get("generalised") and metrics.get("n_source_labels"):
            return f"{n} (from {metrics['n_source_labels']})"
        return str(n)

    def fmt_mppa(value):
        return "n/a" if value is None else f"{value:.3f}"

    header = ["run", "mode", "# preferences", "MPPA (test)"] + [f"d @ {s}" for s in steps]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for name, cfg, metrics in rows:
        by_step = {c["step"]: c for c in metrics.get("checkpoints", [])}
        cells = [
            name,
            cfg.preference_mode + ("+gen" if metrics.get("generalised") else ""),
            fmt_pref(cfg, metrics),
            fmt_mppa(metrics.get("mppa_test")),
        ]
        for s in steps:
            c = by_step.get(s)
            cells.append("-" if c is None else f"{c['distance_mean']:.3f} ± {c['distance_std']:.3f}")
        lines.append("| " + " | ".join(cells) + " |")
    text = "\n".join(lines) + "\n"
    Path(out_path).write_text(text)
    return text

"""Rollout generation, returns, and JSONL-backed trajectory storage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .env import (
    ACTION_FROM_NAME,
    ACTION_NAMES,
    Action,
    MazeEnv,
    State,
    sample_initial_state,
    transition,
    true_reward,
)


@dataclass(frozen=True)
class Trajectory:
    """Fixed-length sequence of (state, action) pairs; doubles as an argument node."""

    id: int
    states: np.ndarray  # (L, 2) float64
    actions: np.ndarray  # (L,) int

    def __post_init__(self):
        if len(self.states) < 1 or len(self.states) != len(self.actions):
            raise ValueError("trajectory needs >= 1 aligned (state, action) pairs")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def start_state(self) -> State:
        return (float(self.states[0, 0]), float(self.states[0, 1]))

    def steps(self):
        """Iterate (state, Action) pairs."""
        for i in range(len(self)):
            yield (float(self.states[i, 0]), float(self.states[i, 1])), Action(self.actions[i])


def random_rollout(env: MazeEnv, length: int, rng: np.random.Generator, traj_id: int = 0) -> Trajectory:
    """Uniform-random actions from a uniform wall-free start."""
    start = sample_initial_state(env, rng)
    actions = rng.integers(0, 4, size=length)
    return _chain(env, start, [Action(int(a)) for a in actions], traj_id)


def policy_rollout(
    env: MazeEnv,
    policy,
    length: int,
    start: State,
    epsilon: float,
    rng: np.random.Generator,
    traj_id: int = 0,
) -> Trajectory:
    """Epsilon-greedy rollout of `policy` (a callable State -> Action)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0,1]")
    states = np.empty((length, 2))
    actions = np.empty(length, dtype=np.int64)
    s = start
    for i in range(length):
        if rng.uniform() < epsilon:
            a = Action(int(rng.integers(0, 4)))
        else:
            a = Action(policy(s))
        states[i] = s
        actions[i] = int(a)
        s = transition(env, s, a)
    return Trajectory(id=traj_id, states=states, actions=actions)


def _chain(env: MazeEnv, start: State, action_seq, traj_id: int) -> Trajectory:
    states = np.empty((len(action_seq), 2))
    actions = np.empty(len(action_seq), dtype=np.int64)
    s = start
    for i, a in enumerate(action_seq):
        states[i] = s
        actions[i] = int(a)
        s = transition(env, s, a)
    return Trajectory(id=traj_id, states=states, actions=actions)


def trajectory_return(env_or_model, t: Trajectory, gamma: float = 1.0) -> float:
    """Discounted return over the trajectory's L reward terms.

    The reward source is either a MazeEnv (true reward; the final successor
    state is computed on the fly) or a reward model exposing
    predict_reward(s, a).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0,1]")
    total = 0.0
    if isinstance(env_or_model, MazeEnv):
        env = env_or_model
        for i in range(len(t)):
            s = (float(t.states[i, 0]), float(t.states[i, 1]))
            a = Action(t.actions[i])
            if i + 1 < len(t):
                s_next = (float(t.states[i + 1, 0]), float(t.states[i + 1, 1]))
            else:
                s_next = transition(env, s, a)
            total += gamma**i * true_reward(env, s, a, s_next)
    else:
        model = env_or_model
        for i in range(len(t)):
            s = (float(t.states[i, 0]), float(t.states[i, 1]))
            total += gamma**i * model.predict_reward(s, Action(t.actions[i]))
    return total


def check_consistency(env: MazeEnv, t: Trajectory) -> bool:
    """Re-simulating the actions from the start must reproduce the states exactly."""
    s = t.start_state
    for i in range(len(t)):
        if (float(t.states[i, 0]), float(t.states[i, 1])) != s:
            return False
        s = transition(env, s, Action(t.actions[i]))
    return True


@dataclass
class TrajectoryStore:
    """Ordered id -> Trajectory map with dense ids; single writer."""

    metadata: dict = field(default_factory=dict)
    _items: dict[int, Trajectory] = field(default_factory=dict)

    def add(self, states: np.ndarray, actions: np.ndarray) -> Trajectory:
        t = Trajectory(id=len(self._items), states=np.asarray(states, dtype=float), actions=np.asarray(actions, dtype=np.int64))
        self._items[t.id] = t
        return t

    def add_trajectory(self, t: Trajectory) -> Trajectory:
        if t.id != len(self._items):
            t = Trajectory(id=len(self._items), states=t.states, actions=t.actions)
        self._items[t.id] = t
        return t

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, traj_id: int) -> Trajectory:
        return self._items[traj_id]

    def __iter__(self):
        return iter(self._items.values())

    @property
    def ids(self) -> list[int]:
        return list(self._items.keys())

    def states_array(self, ids=None) -> np.ndarray:
        """(n, L, 2) stack; requires equal lengths."""
        items = [self._items[i] for i in (ids if ids is not None else self.ids)]
        lengths = {len(t) for t in items}
        if len(lengths) > 1:
            raise ValueError(f"mixed trajectory lengths {sorted(lengths)}")
        return np.stack([t.states for t in items])

    def save_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for t in self:
                steps = [[[float(x), float(y)], ACTION_NAMES[Action(a)]] for (x, y), a in t.steps()]
                f.write(json.dumps({"id": t.id, "steps": steps}) + "\n")

    @classmethod
    def load_jsonl(cls, path, metadata: dict | None = None) -> "TrajectoryStore":
        store = cls(metadata=dict(metadata or {}))
        with open(path) as f:
            for line in f:
                if not line.strip():
                    continue
                obj = json.loads(line)
                states = np.array([xy for xy, _ in obj["steps"]], dtype=float)
                actions = np.array([int(ACTION_FROM_NAME[name]) for _, name in obj["steps"]], dtype=np.int64)
                t = Trajectory(id=obj["id"], states=states, actions=actions)
                if t.id != len(store._items):
                    raise ValueError(f"non-dense trajectory id {t.id}")
                store._items[t.id] = t
        return store


def generate_random_trajectories(
    env: MazeEnv, n: int, length: int, rng: np.random.Generator, store: TrajectoryStore | None = None
) -> TrajectoryStore:
    store = store if store is not None else TrajectoryStore(metadata={"env_seed": env.rng_seed})
    for _ in range(n):
        t = random_rollout(env, length, rng)
        store.add(t.states, t.actions)
    return store

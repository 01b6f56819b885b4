"""Deep Q-learning on the maze with replay and a periodically synced target
network; reward comes from the true reward or a learned model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import Action, MazeEnv, State, normalised_goal_distance, sample_initial_state, transition, true_reward
from .mlp import Adam, Mlp
from .reward_model import RewardModel

Q_LAYERS = [2, 64, 64, 4]


class QTrainingDivergedError(RuntimeError):
    pass


@dataclass
class DqnConfig:
    step_budget: int = 150_000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int | None = None  # defaults to half the budget
    gamma: float = 0.99
    target_sync: int = 500
    learning_rate: float = 1e-3
    batch_size: int = 32
    replay_capacity: int = 10_000
    episode_length: int = 100
    warmup: int = 500
    checkpoint_steps: tuple[int, ...] = (50_000, 100_000, 150_000)
    seed: int | None = None  # None lets the pipeline derive it from the master seed

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0,1]")
        if self.step_budget < 0 or self.episode_length <= 0 or self.batch_size <= 0:
            raise ValueError("budgets must be positive")

    @property
    def decay_steps(self) -> int:
        return self.epsilon_decay_steps if self.epsilon_decay_steps is not None else max(self.step_budget // 2, 1)

    def epsilon_at(self, step: int) -> float:
        frac = min(step / self.decay_steps, 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class QNetwork:
    """State in, one Q-value per action out; argmax ties break in action order."""

    def __init__(self, seed: int = 0, net: Mlp | None = None):
        self.net = net if net is not None else Mlp(Q_LAYERS, seed)

    def q_values(self, s: State) -> np.ndarray:
        return self.net.forward(np.array([[s[0], s[1]]]))[0]

    def q_batch(self, states: np.ndarray) -> np.ndarray:
        return self.net.forward(states)

    def copy(self) -> "QNetwork":
        return QNetwork(net=self.net.copy())

    def save(self, path) -> None:
        self.net.save(path)

    @classmethod
    def load(cls, path) -> "QNetwork":
        return cls(net=Mlp.load(path))


def greedy_action(q: QNetwork, s: State) -> Action:
    # np.argmax returns the first maximum: Up, Right, Down, Left tie order
    return Action(int(np.argmax(q.q_values(s))))


class ReplayBuffer:
    """Fixed-capacity ring over (s, a, r, s_next) transitions."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, 2))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, 2))
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s: State, a: Action, r: float, s_next: State) -> None:
        i = self._head
        self.states[i] = s
        self.actions[i] = int(a)
        self.rewards[i] = r
        self.next_states[i] = s_next
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]


def true_reward_fn(env: MazeEnv):
    return lambda s, a, s_next: true_reward(env, s, a, s_next)


def model_reward_fn(model: RewardModel):
    return lambda s, a, s_next: model.predict_reward(s, a)


def td_update(q: QNetwork, target: QNetwork, batch, gamma: float, opt: Adam) -> float:
    """One Adam step on the mean squared TD error; returns the batch loss.

    The maze is a continuing task, so targets always bootstrap from the next
    state (episode resets are truncations, not terminations).
    """
    states, actions, rewards, next_states = batch
    q_next = target.q_batch(next_states)
    targets = rewards + gamma * q_next.max(axis=1)
    out, acts = q.net.forward_cached(states)
    b = len(actions)
    taken = out[np.arange(b), actions]
    err = taken - targets
    loss = float((err**2).mean())
    grad_out = np.zeros_like(out)
    grad_out[np.arange(b), actions] = 2.0 * err / b
    grads_w, grads_b = q.net.backward(acts, grad_out)
    opt.step(q.net, grads_w, grads_b)
    return loss


def train_dqn(
    env: MazeEnv,
    reward_fn,
    cfg: DqnConfig,
    q: QNetwork | None = None,
    start_sampler=None,
    checkpoint_cb=None,
) -> QNetwork:
    """Episodic epsilon-greedy Q-learning for cfg.step_budget environment steps.

    reward_fn is (s, a, s_next) -> float. Pass q to warm-start; start_sampler
    overrides the uniform wall-free episode start. checkpoint_cb(step, q) runs
    at every step in cfg.checkpoint_steps that fits the budget.
    """
    seed = cfg.seed if cfg.seed is not None else 0
    rng = np.random.default_rng(seed)
    q = q if q is not None else QNetwork(seed=seed)
    if cfg.step_budget == 0:
        return q
    target = q.copy()
    opt = Adam(q.net, lr=cfg.learning_rate)
    buffer = ReplayBuffer(cfg.replay_capacity)
    sample_start = start_sampler if start_sampler is not None else (lambda: sample_initial_state(env, rng))
    checkpoints = set(cfg.checkpoint_steps)

    s = sample_start()
    episode_steps = 0
    for step in range(1, cfg.step_budget + 1):
        if rng.uniform() < cfg.epsilon_at(step):
            a = Action(int(rng.integers(0, 4)))
        else:
            a = greedy_action(q, s)
        s_next = transition(env, s, a)
        r = reward_fn(s, a, s_next)
        buffer.push(s, a, r, s_next)
        if len(buffer) >= max(cfg.warmup, cfg.batch_size):
            loss = td_update(q, target, buffer.sample(cfg.batch_size, rng), cfg.gamma, opt)
            if not np.isfinite(loss):
                raise QTrainingDivergedError(f"non-finite TD loss at step {step}")
        if step % cfg.target_sync == 0:
            target = q.copy()
        s = s_next
        episode_steps += 1
        if episode_steps >= cfg.episode_length:
            s = sample_start()
            episode_steps = 0
        if checkpoint_cb is not None and step in checkpoints:
            checkpoint_cb(step, q)
    return q


def _as_policy(policy):
    if isinstance(policy, QNetwork):
        return lambda s, rng: greedy_action(policy, s)
    return policy


def random_policy(s: State, rng: np.random.Generator) -> Action:
    return Action(int(rng.integers(0, 4)))


def evaluate_policy(
    env: MazeEnv,
    policy,
    episode_length: int,
    n_seeds: int,
    start: State,
    seed_base: int = 0,
) -> tuple[float, float]:
    """Mean and population std of the final normalised goal distance over
    n_seeds rollouts from `start`.

    policy is a QNetwork (greedy) or a callable (state, rng) -> Action;
    deterministic policies yield std 0 by construction.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    act = _as_policy(policy)
    finals = []
    for k in range(n_seeds):
        rng = np.random.default_rng(seed_base + k)
        s = start
        for _ in range(episode_length):
            s = transition(env, s, act(s, rng))
        finals.append(normalised_goal_distance(env, s))
    arr = np.array(finals)
    # identical rollouts must report their exact value with zero spread
    # (deterministic-policy signature); naive mean/std leave ~1e-16 residue
    if bool(np.all(arr == arr[0])):
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std())


def path_length(env: MazeEnv, policy, episode_length: int, start: State, seed: int = 0) -> float:
    """Total distance actually travelled by one rollout (movement diagnostic)."""
    act = _as_policy(policy)
    rng = np.random.default_rng(seed)
    s = start
    total = 0.0
    for _ in range(episode_length):
        s_next = transition(env, s, act(s, rng))
        total += float(np.hypot(s_next[0] - s[0], s_next[1] - s[1]))
        s = s_next
    return total

"""Per-step reward approximator trained on pairwise trajectory preferences.

The probability that one trajectory beats another is the softmax of the two
undiscounted model returns (Bradley-Terry); training minimises the binary
cross-entropy of the labeled pairs by backpropagating through both return
sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import Action, State
from .mlp import Adam, Mlp
from .preference import PreferenceRecord
from .trajectories import Trajectory, TrajectoryStore

REWARD_LAYERS = [6, 64, 64, 1]


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    test_fraction: float = 0.2
    seed: int | None = None  # None lets the pipeline derive it from the master seed
    # deterministic early stop: quit once the best epoch loss stops improving
    early_stop_patience: int = 10
    early_stop_rel_tol: float = 1e-3

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, epochs, and batch_size must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0,1)")


class RewardModel:
    """x, y plus a one-hot action in; scalar reward out."""

    def __init__(self, seed: int = 0, net: Mlp | None = None):
        self.net = net if net is not None else Mlp(REWARD_LAYERS, seed)

    @property
    def seed(self) -> int:
        return self.net.seed

    def predict_reward(self, s: State, a: Action) -> float:
        x = np.zeros((1, 6))
        x[0, 0], x[0, 1] = s
        x[0, 2 + int(a)] = 1.0
        return float(self.net.forward(x)[0, 0])

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        return self.net.forward(features)[:, 0]

    def model_return(self, t: Trajectory) -> float:
        return float(self.predict_batch(trajectory_features(t)).sum())

    def copy(self) -> "RewardModel":
        return RewardModel(net=self.net.copy())

    def save(self, path) -> None:
        self.net.save(path)

    @classmethod
    def load(cls, path) -> "RewardModel":
        return cls(net=Mlp.load(path))


def model_return(m: RewardModel, t: Trajectory) -> float:
    return m.model_return(t)


def predict_reward(m: RewardModel, s: State, a: Action) -> float:
    return m.predict_reward(s, a)


def trajectory_features(t: Trajectory) -> np.ndarray:
    """(L, 6) feature rows: x, y, one-hot action."""
    feats = np.zeros((len(t), 6))
    feats[:, 0:2] = t.states
    feats[np.arange(len(t)), 2 + t.actions] = 1.0
    return feats


def pair_probability_from_returns(r1: float, r2: float) -> float:
    """exp(r1) / (exp(r1) + exp(r2)) with max-subtraction for stability."""
    m = max(r1, r2)
    e1 = np.exp(r1 - m)
    e2 = np.exp(r2 - m)
    return float(e1 / (e1 + e2))


def pair_probability(m: RewardModel, t1: Trajectory, t2: Trajectory) -> float:
    return pair_probability_from_returns(m.model_return(t1), m.model_return(t2))


@dataclass
class PairDataset:
    """Ordered (winner, loser) trajectory pairs with a split tag."""

    pairs: list[tuple[Trajectory, Trajectory]]
    split: str = "all"

    def __post_init__(self):
        for w, l in self.pairs:
            if w.id == l.id:
                raise ValueError(f"degenerate pair: trajectory {w.id} vs itself")

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_records(cls, records: list[PreferenceRecord], store: TrajectoryStore) -> "PairDataset":
        return cls(pairs=[(store[r.winner], store[r.loser]) for r in records])

    def train_test_split(self, test_fraction: float, rng: np.random.Generator):
        """Disjoint, exhaustive uniform split; keeps at least one pair per side."""
        n = len(self.pairs)
        if n < 2:
            raise ValueError("need >= 2 pairs to split")
        n_test = min(max(int(round(n * test_fraction)), 1), n - 1)
        perm = rng.permutation(n)
        test_idx = set(perm[:n_test].tolist())
        train = [self.pairs[i] for i in range(n) if i not in test_idx]
        test = [self.pairs[i] for i in range(n) if i in test_idx]
        return PairDataset(train, split="train"), PairDataset(test, split="test")


def _pair_returns(m: RewardModel, pairs: PairDataset) -> tuple[np.ndarray, np.ndarray]:
    """Winner/loser model returns with one forward pass per distinct trajectory."""
    returns: dict[int, float] = {}
    for w, l in pairs.pairs:
        for t in (w, l):
            if t.id not in returns:
                returns[t.id] = m.model_return(t)
    rw = np.array([returns[w.id] for w, _ in pairs.pairs])
    rl = np.array([returns[l.id] for _, l in pairs.pairs])
    return rw, rl


def bt_loss(m: RewardModel, pairs: PairDataset) -> float:
    """Summed binary cross-entropy of the winner probabilities."""
    if len(pairs) == 0:
        raise ValueError("empty pair dataset")
    rw, rl = _pair_returns(m, pairs)
    # -log sigmoid(rw - rl), stable for large gaps either way
    return float(np.logaddexp(0.0, -(rw - rl)).sum())


def mppa(m: RewardModel, test: PairDataset) -> float:
    """Fraction of pairs whose winner gets probability > 0.5 (ties score 0.5)."""
    if len(test) == 0:
        raise ValueError("empty pair dataset")
    rw, rl = _pair_returns(m, test)
    scores = np.where(rw > rl, 1.0, np.where(rw == rl, 0.5, 0.0))
    return float(scores.mean())


def _batch_step(m: RewardModel, batch, feats: dict[int, np.ndarray], opt: Adam) -> None:
    """One Adam step on the mean Bradley-Terry loss of a pair batch."""
    rows = []
    lengths = []
    for w, l in batch:
        rows.append(feats[w.id])
        lengths.append(len(w))
    for w, l in batch:
        rows.append(feats[l.id])
        lengths.append(len(l))
    x = np.concatenate(rows, axis=0)
    seg_starts = np.zeros(len(lengths), dtype=np.int64)
    np.cumsum(lengths[:-1], out=seg_starts[1:])

    out, acts = m.net.forward_cached(x)
    sums = np.add.reduceat(out[:, 0], seg_starts)
    b = len(batch)
    z = sums[:b] - sums[b:]
    # dL/dz for mean loss: -(1 - sigmoid(z)) / b
    sig = np.empty_like(z)
    pos = z >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    sig[~pos] = np.exp(z[~pos]) / (1.0 + np.exp(z[~pos]))
    dz = -(1.0 - sig) / b
    per_segment = np.concatenate([dz, -dz])
    grad_out = np.repeat(per_segment, lengths)[:, None]
    grads_w, grads_b = m.net.backward(acts, grad_out)
    opt.step(m.net, grads_w, grads_b)


def train(m: RewardModel, data: PairDataset, cfg: TrainConfig) -> RewardModel:
    """Minibatch Adam on the Bradley-Terry loss; deterministic given cfg.seed.

    Keeps the best epoch-end parameters, so the returned model's train loss
    never exceeds the initial loss. Raises TrainingDivergedError on a
    non-finite loss.
    """
    if len(data) == 0:
        raise ValueError("empty train split")
    rng = np.random.default_rng(cfg.seed if cfg.seed is not None else 0)
    opt = Adam(m.net, lr=cfg.learning_rate)
    feats = {}
    for w, l in data.pairs:
        for t in (w, l):
            if t.id not in feats:
                feats[t.id] = trajectory_features(t)

    n = len(data)
    best_loss = bt_loss(m, data)
    best_params = m.net.get_flat_params()
    stale = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = [data.pairs[i] for i in order[start : start + cfg.batch_size]]
            _batch_step(m, batch, feats, opt)
        loss = bt_loss(m, data)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite train loss {loss} at epoch {epoch}")
        if loss < best_loss * (1.0 - cfg.early_stop_rel_tol):
            stale = 0
        else:
            stale += 1
        if loss < best_loss:
            best_loss = loss
            best_params = m.net.get_flat_params()
        if stale >= cfg.early_stop_patience:
            break
    m.net.set_flat_params(best_params)
    return m


def _analytic_gradient(m: RewardModel, pairs: PairDataset) -> np.ndarray:
    """Flat gradient of the summed Bradley-Terry loss."""
    rows = []
    lengths = []
    for w, _ in pairs.pairs:
        rows.append(trajectory_features(w))
        lengths.append(len(w))
    for _, l in pairs.pairs:
        rows.append(trajectory_features(l))
        lengths.append(len(l))
    x = np.concatenate(rows, axis=0)
    seg_starts = np.zeros(len(lengths), dtype=np.int64)
    np.cumsum(lengths[:-1], out=seg_starts[1:])
    out, acts = m.net.forward_cached(x)
    sums = np.add.reduceat(out[:, 0], seg_starts)
    b = len(pairs)
    z = sums[:b] - sums[b:]
    sig = np.empty_like(z)
    pos = z >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    sig[~pos] = np.exp(z[~pos]) / (1.0 + np.exp(z[~pos]))
    dz = -(1.0 - sig)
    grad_out = np.repeat(np.concatenate([dz, -dz]), lengths)[:, None]
    grads_w, grads_b = m.net.backward(acts, grad_out)
    return np.concatenate([g.ravel() for g in grads_w + grads_b])


def gradient_check(
    m: RewardModel, pairs: PairDataset, h: float = 1e-5, n_params: int = 64, seed: int = 0
) -> float:
    """Max relative error between the analytic gradient and central finite
    differences over a seeded random parameter subset."""
    analytic = _analytic_gradient(m, pairs)
    flat = m.net.get_flat_params()
    rng = np.random.default_rng(seed)
    idx = rng.choice(flat.size, size=min(n_params, flat.size), replace=False)
    worst = 0.0
    for i in idx:
        theta = flat.copy()
        theta[i] = flat[i] + h
        m.net.set_flat_params(theta)
        up = bt_loss(m, pairs)
        theta[i] = flat[i] - h
        m.net.set_flat_params(theta)
        down = bt_loss(m, pairs)
        fd = (up - down) / (2.0 * h)
        err = abs(analytic[i] - fd) / max(abs(analytic[i]), abs(fd), 1e-8)
        worst = max(worst, err)
    m.net.set_flat_params(flat)
    return worst

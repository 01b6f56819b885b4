"""Preference sources, comparison-minimal extension ordering, and assembly of
the generalised training set.

Two comparator families order the preferred extensions before lifting:
return-sum comparison against the true reward (the synthetic protocol) and
label counting over a fixed pool of pairwise choices (the human protocol,
also driven live through the elicitation service).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .argumentation import Aaf, ExtensionOrder, PreferredExtension
from .env import MazeEnv
from .trajectories import TrajectoryStore, trajectory_return

Source = Literal["human", "synthetic", "generalised"]


class BudgetExhaustedError(RuntimeError):
    """Query budget ran out mid-sort; carries the partial order, marked invalid."""

    def __init__(self, message: str, partial_order: ExtensionOrder | None = None):
        super().__init__(message)
        self.partial_order = partial_order


@dataclass
class QueryBudget:
    max_queries: int
    used: int = 0

    def spend(self) -> None:
        if self.used >= self.max_queries:
            raise BudgetExhaustedError(f"query budget of {self.max_queries} exhausted")
        self.used += 1

    @property
    def remaining(self) -> int:
        return self.max_queries - self.used


@dataclass(frozen=True)
class PreferenceRecord:
    """One labeled ordered pair of trajectory ids."""

    winner: int
    loser: int
    source: Source
    query_id: int | None = None
    timestamp: float = 0.0
    tied: bool = False

    def __post_init__(self):
        if self.winner == self.loser:
            raise ValueError("degenerate preference: winner == loser")


@dataclass(frozen=True)
class ComparisonResult:
    better: Literal["first", "second"]
    tied: bool = False


class Comparator:
    """Counting wrapper around a compare(a, b) -> ComparisonResult callable."""

    def __init__(self, fn: Callable[[object, object], ComparisonResult]):
        self._fn = fn
        self.comparison_count = 0
        self.tie_count = 0

    def __call__(self, a, b) -> str:
        self.comparison_count += 1
        result = self._fn(a, b)
        if result.tied:
            self.tie_count += 1
        return result.better


def synthetic_pair_label(
    env: MazeEnv, t1, t2, query_id: int | None = None, timestamp: float = 0.0
) -> PreferenceRecord:
    """Winner is the trajectory with the larger true undiscounted return;
    ties break toward the lower id and are flagged."""
    if t1.id == t2.id:
        raise ValueError("cannot label a trajectory against itself")
    r1 = trajectory_return(env, t1, gamma=1.0)
    r2 = trajectory_return(env, t2, gamma=1.0)
    if r1 == r2:
        winner, loser = (t1, t2) if t1.id < t2.id else (t2, t1)
        return PreferenceRecord(winner.id, loser.id, "synthetic", query_id, timestamp, tied=True)
    winner, loser = (t1, t2) if r1 > r2 else (t2, t1)
    return PreferenceRecord(winner.id, loser.id, "synthetic", query_id, timestamp)


def sample_queries(aaf: Aaf, n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """n distinct attacking pairs uniformly without replacement (all if fewer exist)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    pairs = sorted(aaf.attack_pairs)
    if len(pairs) <= n:
        return pairs
    idx = rng.choice(len(pairs), size=n, replace=False)
    return [pairs[i] for i in idx]


def synthetic_extension_compare(
    env: MazeEnv, store: TrajectoryStore, p_i: PreferredExtension, p_j: PreferredExtension
) -> ComparisonResult:
    """Order two extensions by the sum of true undiscounted member returns."""
    si = sum(trajectory_return(env, store[t], gamma=1.0) for t in p_i.members)
    sj = sum(trajectory_return(env, store[t], gamma=1.0) for t in p_j.members)
    if si == sj:
        return ComparisonResult("first" if p_i.index < p_j.index else "second", tied=True)
    return ComparisonResult("first" if si > sj else "second")


def count_extension_compare(
    labels: list[PreferenceRecord], p_i: PreferredExtension, p_j: PreferredExtension
) -> ComparisonResult:
    """Order two extensions by counting pool labels crossing between them."""
    cij = sum(1 for rec in labels if rec.winner in p_i.members and rec.loser in p_j.members)
    cji = sum(1 for rec in labels if rec.winner in p_j.members and rec.loser in p_i.members)
    if cij == cji:
        return ComparisonResult("first" if p_i.index < p_j.index else "second", tied=True)
    return ComparisonResult("first" if cij > cji else "second")


def make_synthetic_comparator(env: MazeEnv, store: TrajectoryStore) -> Comparator:
    # return sums are fixed per extension; cache them across comparisons
    cache: dict[int, float] = {}

    def total(p: PreferredExtension) -> float:
        if p.index not in cache:
            cache[p.index] = sum(trajectory_return(env, store[t], gamma=1.0) for t in p.members)
        return cache[p.index]

    def cmp(p_i: PreferredExtension, p_j: PreferredExtension) -> ComparisonResult:
        si, sj = total(p_i), total(p_j)
        if si == sj:
            return ComparisonResult("first" if p_i.index < p_j.index else "second", tied=True)
        return ComparisonResult("first" if si > sj else "second")

    return Comparator(cmp)


def make_count_comparator(labels: list[PreferenceRecord]) -> Comparator:
    return Comparator(lambda p_i, p_j: count_extension_compare(labels, p_i, p_j))


def binary_insertion_sort(items: list, cmp: Comparator) -> ExtensionOrder:
    """Sort best-first with at most sum(ceil(log2 i), i=2..n) comparisons.

    A BudgetExhaustedError raised by the comparator aborts the sort; the
    exception is re-raised carrying the partial order with valid=False.
    """
    ranking: list = []
    for item in items:
        lo, hi = 0, len(ranking)
        while lo < hi:
            mid = (lo + hi) // 2
            try:
                outcome = cmp(item, ranking[mid])
            except BudgetExhaustedError as exc:
                partial = ExtensionOrder(
                    ranking=list(ranking),
                    comparisons=cmp.comparison_count,
                    ties=cmp.tie_count,
                    valid=False,
                )
                raise BudgetExhaustedError(str(exc), partial_order=partial) from exc
            if outcome == "first":
                hi = mid
            else:
                lo = mid + 1
        ranking.insert(lo, item)
    return ExtensionOrder(ranking=ranking, comparisons=cmp.comparison_count, ties=cmp.tie_count)


def max_comparisons(n: int) -> int:
    """Binary-insertion worst case: sum over i=2..n of ceil(log2 i)."""
    return sum(int(np.ceil(np.log2(i))) for i in range(2, n + 1))


def order_extensions(extensions: list[PreferredExtension], cmp: Comparator) -> ExtensionOrder:
    order = binary_insertion_sort(list(extensions), cmp)
    order.ranking = [p.index for p in order.ranking]
    return order


def build_generalised_dataset(aaf: Aaf, lifted: set[tuple[int, int]]) -> list[PreferenceRecord]:
    """One generalised record per preference-ordered attacking pair."""
    records = []
    for a, b in sorted(lifted):
        if aaf.attacks(a, b):
            records.append(PreferenceRecord(winner=a, loser=b, source="generalised"))
    return records


# ---------------------------------------------------------------------------
# Label-log (JSONL) round trip; shared by the elicitation service, the
# auto-labeler, and offline pipeline runs.

def log_entry(query_id: int, left: int, right: int, choice: str, source: str, ts: float) -> dict:
    return {"query_id": query_id, "left": left, "right": right, "choice": choice, "source": source, "ts": ts}


def append_log_entry(path, entry: dict) -> None:
    with open(path, "a") as f:
        f.write(json.dumps(entry) + "\n")


def read_log(path) -> list[dict]:
    entries = []
    with open(path) as f:
        for line in f:
            if line.strip():
                entries.append(json.loads(line))
    return entries


def records_from_log(entries: list[dict]) -> list[PreferenceRecord]:
    """Skipped queries are excluded; left/right choices become winner/loser."""
    records = []
    for e in entries:
        if e["choice"] == "skip":
            continue
        winner, loser = (e["left"], e["right"]) if e["choice"] == "left" else (e["right"], e["left"])
        records.append(
            PreferenceRecord(
                winner=winner,
                loser=loser,
                source=e.get("source", "human"),
                query_id=e["query_id"],
                timestamp=e.get("ts", 0.0),
            )
        )
    return records


def label_pairs_synthetic(
    env: MazeEnv, store: TrajectoryStore, pairs: list[tuple[int, int]], log_path=None
) -> list[PreferenceRecord]:
    """Auto-label a pair list with the true-return oracle, optionally logging."""
    records = []
    for qid, (left, right) in enumerate(pairs):
        rec = synthetic_pair_label(env, store[left], store[right], query_id=qid, timestamp=time.time())
        records.append(rec)
        if log_path is not None:
            choice = "left" if rec.winner == left else "right"
            append_log_entry(log_path, log_entry(qid, left, right, choice, "synthetic", rec.timestamp))
    return records

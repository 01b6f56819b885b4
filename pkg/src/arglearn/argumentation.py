"""Attack graph over trajectories, preferred-extension enumeration, and
preference lifting.

With a symmetric, irreflexive attack relation the preferred extensions are
exactly the maximal conflict-free sets, i.e. the maximal independent sets of
the attack graph. They are enumerated as maximal cliques of the complement
graph (pivoting Bron-Kerbosch); the exhaustive subset enumeration is kept as
an independent oracle for small instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .trajectories import Trajectory, TrajectoryStore

DEFAULT_EXTENSION_CAP = 10_000


class ExtensionLimitError(RuntimeError):
    """Extension enumeration exceeded the configured cap (never truncated silently)."""


@dataclass(frozen=True)
class Aaf:
    """Argument ids plus a symmetric, irreflexive attack relation."""

    arguments: frozenset[int]
    attack_pairs: frozenset[tuple[int, int]]  # unordered, stored as (i, j) with i < j

    def __post_init__(self):
        for i, j in self.attack_pairs:
            if i == j:
                raise ValueError(f"self-attack on argument {i}")
            if not (i < j):
                raise ValueError(f"attack pair {(i, j)} not in canonical i<j form")
            if i not in self.arguments or j not in self.arguments:
                raise ValueError(f"attack pair {(i, j)} references unknown arguments")

    @property
    def directed_attack_count(self) -> int:
        return 2 * len(self.attack_pairs)

    def directed_attacks(self) -> set[tuple[int, int]]:
        out = set()
        for i, j in self.attack_pairs:
            out.add((i, j))
            out.add((j, i))
        return out

    def attacks(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.attack_pairs if a != b else False

    def neighbors(self) -> dict[int, set[int]]:
        adj = {a: set() for a in self.arguments}
        for i, j in self.attack_pairs:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def to_json(self) -> dict:
        return {
            "arguments": sorted(self.arguments),
            "attacks": sorted(list(p) for p in self.attack_pairs),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Aaf":
        return cls(
            arguments=frozenset(obj["arguments"]),
            attack_pairs=frozenset((int(i), int(j)) for i, j in obj["attacks"]),
        )


@dataclass(frozen=True)
class PreferredExtension:
    """Maximal conflict-free set of trajectory ids."""

    members: frozenset[int]
    index: int


@dataclass
class ExtensionOrder:
    """Best-first ranking over extension indices (or any sortable items)."""

    ranking: list
    comparisons: int = 0
    ties: int = 0
    valid: bool = True


@dataclass(frozen=True)
class Paf:
    """AAF plus a strict (irreflexive, asymmetric) preference over arguments."""

    base: Aaf
    prefers: frozenset[tuple[int, int]]  # (a, b) means a is preferred to b

    def __post_init__(self):
        for a, b in self.prefers:
            if a == b:
                raise ValueError(f"reflexive preference on argument {a}")
            if (b, a) in self.prefers:
                raise ValueError(f"preference relation not asymmetric: both {(a, b)} and {(b, a)}")

    @property
    def reduced_attacks(self) -> frozenset[tuple[int, int]]:
        return frozenset(reduce_paf(self))


def trajectories_attack(t1: Trajectory, t2: Trajectory, delta: float) -> bool:
    """True iff some step's states are strictly farther apart than delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if len(t1) != len(t2):
        raise ValueError(f"attack undefined for lengths {len(t1)} != {len(t2)}")
    dists = np.linalg.norm(t1.states - t2.states, axis=1)
    return bool((dists > delta).any())


def build_aaf(store: TrajectoryStore, delta: float, ids=None) -> Aaf:
    """All-pairs attack graph over the store (equal-length trajectories).

    Pass `ids` to restrict to a subset, e.g. one iteration's rollouts.
    """
    ids = store.ids if ids is None else list(ids)
    if len(ids) < 2:
        raise ValueError("need at least two trajectories")
    states = store.states_array(ids)  # raises on mixed lengths
    # max over steps of pairwise state distance, vectorised over all pairs
    diffs = states[:, None, :, :] - states[None, :, :, :]
    dmax = np.linalg.norm(diffs, axis=3).max(axis=2)
    pairs = set()
    n = len(ids)
    for ii in range(n):
        for jj in range(ii + 1, n):
            if dmax[ii, jj] > delta:
                pairs.add((ids[ii], ids[jj]))
    return Aaf(arguments=frozenset(ids), attack_pairs=frozenset(pairs))


def preferred_extensions(aaf: Aaf, cap: int = DEFAULT_EXTENSION_CAP) -> list[PreferredExtension]:
    """All maximal conflict-free sets, ordered lexicographically by sorted members.

    Raises ExtensionLimitError when more than `cap` extensions exist.
    """
    vertices = sorted(aaf.arguments)
    attack_adj = aaf.neighbors()
    universe = set(vertices)
    comp_adj = {v: universe - attack_adj[v] - {v} for v in vertices}

    found: list[frozenset[int]] = []

    def expand(r: set, p: set, x: set):
        if not p and not x:
            found.append(frozenset(r))
            if len(found) > cap:
                raise ExtensionLimitError(f"more than {cap} preferred extensions")
            return
        pivot = max(p | x, key=lambda u: len(comp_adj[u] & p))
        for v in sorted(p - comp_adj[pivot]):
            expand(r | {v}, p & comp_adj[v], x & comp_adj[v])
            p.remove(v)
            x.add(v)

    if vertices:
        expand(set(), set(vertices), set())
    found.sort(key=lambda s: sorted(s))
    return [PreferredExtension(members=m, index=i) for i, m in enumerate(found)]


def brute_force_extensions(arguments, attack_pairs) -> set[frozenset[int]]:
    """Exhaustive maximal conflict-free enumeration; oracle for small AAFs."""
    args = sorted(arguments)
    attacks = {frozenset(p) for p in attack_pairs}

    def conflict_free(subset) -> bool:
        return all(frozenset(p) not in attacks for p in combinations(subset, 2))

    cf = [frozenset(c) for k in range(len(args) + 1) for c in combinations(args, k) if conflict_free(c)]
    return {s for s in cf if not any(s < t for t in cf)}


def lift_preferences(extensions: list[PreferredExtension], order: ExtensionOrder) -> set[tuple[int, int]]:
    """Lift a best-first extension order to trajectory preferences.

    (t1, t2) is included iff some extension containing t1 outranks every
    extension containing t2; with a strict total order this reduces to
    comparing the best rank each trajectory reaches. Pairs generated in both
    directions would violate asymmetry and are dropped.
    """
    if not order.valid:
        raise ValueError("cannot lift preferences from an invalidated extension order")
    if sorted(order.ranking) != sorted(e.index for e in extensions):
        raise ValueError("extension order is not a permutation of the given extensions")
    rank = {ext_index: pos for pos, ext_index in enumerate(order.ranking)}
    by_index = {e.index: e for e in extensions}
    best_rank: dict[int, int] = {}
    for ext_index, pos in rank.items():
        for t in by_index[ext_index].members:
            if t not in best_rank or pos < best_rank[t]:
                best_rank[t] = pos
    pairs = {
        (t1, t2)
        for t1 in best_rank
        for t2 in best_rank
        if t1 != t2 and best_rank[t1] < best_rank[t2]
    }
    return {p for p in pairs if (p[1], p[0]) not in pairs}


def reduce_paf(paf: Paf) -> set[tuple[int, int]]:
    """Directed attacks that survive the preference reduction: (b, a) is kept
    unless a is preferred to b."""
    return {(b, a) for b, a in paf.base.directed_attacks() if (a, b) not in paf.prefers}

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arglearn.argumentation import Aaf, PreferredExtension
from arglearn.env import MazeEnv
from arglearn.preference import (
    BudgetExhaustedError,
    ComparisonResult,
    Comparator,
    QueryBudget,
    binary_insertion_sort,
    build_generalised_dataset,
    count_extension_compare,
    label_pairs_synthetic,
    make_count_comparator,
    make_synthetic_comparator,
    max_comparisons,
    order_extensions,
    read_log,
    records_from_log,
    sample_queries,
    synthetic_extension_compare,
    synthetic_pair_label,
)
from arglearn.preference import PreferenceRecord
from arglearn.trajectories import TrajectoryStore

GOAL = (0.9, 0.9)
OPEN = MazeEnv(walls=(), goal=GOAL)


def _store_with_returns():
    """Trajectories parked at fixed points: return is a monotone function of
    goal distance, so ids 0..3 are increasingly good."""
    store = TrajectoryStore()
    for spot in [(0.05, 0.05), (0.3, 0.3), (0.5, 0.5), (0.85, 0.85)]:
        store.add(np.array([spot] * 6), np.zeros(6, dtype=int))
    return store


def test_synthetic_label_prefers_higher_return():
    store = _store_with_returns()
    rec = synthetic_pair_label(OPEN, store[0], store[3])
    assert rec.winner == 3 and rec.loser == 0
    assert rec.source == "synthetic"
    assert not rec.tied


def test_synthetic_label_antisymmetric():
    store = _store_with_returns()
    a = synthetic_pair_label(OPEN, store[1], store[2])
    b = synthetic_pair_label(OPEN, store[2], store[1])
    assert (a.winner, a.loser) == (b.winner, b.loser)


def test_synthetic_label_tie_breaks_to_lower_id():
    store = TrajectoryStore()
    store.add(np.array([[0.2, 0.2]] * 4), np.zeros(4, dtype=int))
    store.add(np.array([[0.2, 0.2]] * 4), np.zeros(4, dtype=int))
    rec = synthetic_pair_label(OPEN, store[1], store[0])
    assert rec.winner == 0 and rec.tied


def test_record_rejects_degenerate_pair():
    with pytest.raises(ValueError):
        PreferenceRecord(winner=1, loser=1, source="human")


def test_sample_queries_empty_and_undersized():
    empty = Aaf(arguments=frozenset({0, 1}), attack_pairs=frozenset())
    assert sample_queries(empty, 10, np.random.default_rng(0)) == []
    small = Aaf(arguments=frozenset(range(6)), attack_pairs=frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)}))
    assert len(sample_queries(small, 10, np.random.default_rng(0))) == 5


def test_sample_queries_deterministic_and_distinct():
    aaf = Aaf(
        arguments=frozenset(range(10)),
        attack_pairs=frozenset((i, j) for i in range(10) for j in range(i + 1, 10)),
    )
    a = sample_queries(aaf, 12, np.random.default_rng(4))
    b = sample_queries(aaf, 12, np.random.default_rng(4))
    assert a == b
    assert len(set(a)) == 12


def _ext(index, members):
    return PreferredExtension(members=frozenset(members), index=index)


def test_synthetic_extension_compare_prefers_higher_sum():
    store = _store_with_returns()
    low = _ext(0, {0, 1})
    high = _ext(1, {2, 3})
    assert synthetic_extension_compare(OPEN, store, high, low).better == "first"
    assert synthetic_extension_compare(OPEN, store, low, high).better == "second"


def test_synthetic_extension_compare_tie_flags():
    store = _store_with_returns()
    result = synthetic_extension_compare(OPEN, store, _ext(0, {1}), _ext(1, {1}))
    assert result.tied and result.better == "first"


def test_count_extension_compare_counts_cross_labels():
    labels = [
        PreferenceRecord(0, 1, "human"),
        PreferenceRecord(2, 1, "human"),
        PreferenceRecord(1, 3, "human"),
    ]
    p_i = _ext(0, {0, 2})
    p_j = _ext(1, {1, 3})
    # count(i,j) = 2 [(0,1), (2,1)], count(j,i) = 1 [(1,3)]
    assert count_extension_compare(labels, p_i, p_j).better == "first"


def test_count_extension_compare_no_evidence_is_tie():
    result = count_extension_compare([], _ext(0, {0}), _ext(1, {1}))
    assert result.tied and result.better == "first"


def test_binary_insertion_sort_counts():
    cmp = Comparator(lambda a, b: ComparisonResult("first" if a < b else "second"))
    order = binary_insertion_sort([5], cmp)
    assert order.comparisons == 0 and order.ranking == [5]

    cmp = Comparator(lambda a, b: ComparisonResult("first" if a < b else "second"))
    binary_insertion_sort([4, 3, 2, 1], cmp)
    assert cmp.comparison_count <= 5  # ceil(log2 2) + ceil(log2 3) + ceil(log2 4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=0, max_size=40))
def test_binary_insertion_sort_matches_key_sort(keys):
    items = list(enumerate(keys))  # (position, key); lower key = better
    cmp = Comparator(
        lambda a, b: ComparisonResult("first") if a[1] < b[1] else ComparisonResult("second", tied=a[1] == b[1])
    )
    order = binary_insertion_sort(items, cmp)
    assert [k for _, k in order.ranking] == sorted(keys)
    assert cmp.comparison_count <= max_comparisons(len(keys))


def test_binary_insertion_sort_stable_on_ties():
    items = [("a", 1), ("b", 1), ("c", 0), ("d", 1)]
    cmp = Comparator(lambda x, y: ComparisonResult("first" if x[1] < y[1] else "second", tied=x[1] == y[1]))
    order = binary_insertion_sort(items, cmp)
    assert [name for name, _ in order.ranking] == ["c", "a", "b", "d"]


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 64), seed=st.integers(0, 10_000))
def test_comparison_bound_holds_for_random_comparators(n, seed):
    rng = np.random.default_rng(seed)
    cmp = Comparator(lambda a, b: ComparisonResult("first" if rng.uniform() < 0.5 else "second"))
    binary_insertion_sort(list(range(n)), cmp)
    assert cmp.comparison_count <= max_comparisons(n)


def test_budget_exhaustion_aborts_with_invalid_partial_order():
    budget = QueryBudget(max_queries=2)

    def fn(a, b):
        budget.spend()
        return ComparisonResult("first" if a < b else "second")

    with pytest.raises(BudgetExhaustedError) as err:
        binary_insertion_sort([3, 1, 2, 0], Comparator(fn))
    assert err.value.partial_order is not None
    assert not err.value.partial_order.valid
    assert budget.used == 2


def test_order_extensions_agrees_with_return_sums():
    store = _store_with_returns()
    exts = [_ext(0, {0, 1}), _ext(1, {3}), _ext(2, {2})]
    order = order_extensions(exts, make_synthetic_comparator(OPEN, store))
    assert order.ranking == [1, 2, 0]  # {3} beats {2} beats {0,1}


def test_build_generalised_dataset_examples():
    aaf = Aaf(arguments=frozenset({0, 1, 2}), attack_pairs=frozenset({(0, 1)}))
    assert build_generalised_dataset(aaf, set()) == []
    records = build_generalised_dataset(aaf, {(0, 1), (0, 2)})
    assert len(records) == 1  # (0,2) is not an attacking pair
    assert records[0].winner == 0 and records[0].loser == 1
    assert records[0].source == "generalised"


def test_build_generalised_dataset_never_double_directed():
    aaf = Aaf(
        arguments=frozenset(range(4)),
        attack_pairs=frozenset({(0, 1), (1, 2), (2, 3)}),
    )
    lifted = {(0, 1), (1, 2), (3, 2)}
    records = build_generalised_dataset(aaf, lifted)
    seen = {(r.winner, r.loser) for r in records}
    assert seen == lifted
    assert all((b, a) not in seen for a, b in seen)


def test_label_log_round_trip(tmp_path):
    store = _store_with_returns()
    aaf = Aaf(arguments=frozenset(range(4)), attack_pairs=frozenset({(0, 3), (1, 2)}))
    path = tmp_path / "labels.jsonl"
    records = label_pairs_synthetic(OPEN, store, sorted(aaf.attack_pairs), log_path=path)
    entries = read_log(path)
    assert [e["query_id"] for e in entries] == [0, 1]
    assert all(set(e) == {"query_id", "left", "right", "choice", "source", "ts"} for e in entries)
    replayed = records_from_log(entries)
    assert [(r.winner, r.loser) for r in replayed] == [(r.winner, r.loser) for r in records]


def test_records_from_log_drops_skips():
    entries = [
        {"query_id": 0, "left": 1, "right": 2, "choice": "skip", "source": "human", "ts": 0.0},
        {"query_id": 1, "left": 1, "right": 2, "choice": "right", "source": "human", "ts": 0.0},
    ]
    records = records_from_log(entries)
    assert len(records) == 1
    assert records[0].winner == 2

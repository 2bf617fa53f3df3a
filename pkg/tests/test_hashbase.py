from collections import Counter, defaultdict

import pytest

from ovcengine.core import KeySchema
from ovcengine.hashbase import HashOpConfig, hash_aggregate, hash_join, key_hash, mix64
from ovcengine.metrics import MetricsCtx
from ovcengine.operators import merge_join
from ovcengine.streams import from_sorted_rows

from helpers import ref_group, ref_sort, trial_rows


def cfg(tmp_path, budget, parts=4):
    return HashOpConfig(memory_budget_rows=budget, partitions=parts, spill_dir=str(tmp_path))


def test_mixer_is_fixed_and_deterministic():
    assert mix64(0) == mix64(0)
    assert mix64(1) != mix64(2)
    assert key_hash((1, 2, 3), 2, 7) == key_hash((1, 2, 9), 2, 7)  # only the key matters


def test_aggregate_within_budget_never_spills(tmp_path):
    rows = trial_rows(1, 500, 2, ratio=5)
    m = MetricsCtx()
    out = list(hash_aggregate(iter(rows), 2, [("count", None)], cfg(tmp_path, budget=200), m))
    assert m.rows_spilled == 0
    assert Counter(out) == Counter(
        tuple(r) for r in ref_group(rows, 2, 2, [("count", None)])
    )


def test_aggregate_ten_times_budget_spills_the_overflow(tmp_path):
    rows = trial_rows(2, 2000, 2, ratio=1)  # all distinct keys
    budget = 200
    m = MetricsCtx()
    out = list(hash_aggregate(iter(rows), 2, [], cfg(tmp_path, budget=budget), m))
    assert m.rows_spilled >= len(rows) - budget
    assert Counter(out) == Counter(r[:2] for r in rows)


def test_aggregate_matches_reference_with_aggs(tmp_path):
    rows = trial_rows(3, 3000, 2, ratio=8, payload=2)
    aggs = [("count", None), ("sum", 2), ("max", 3)]
    out = list(hash_aggregate(iter(rows), 2, aggs, cfg(tmp_path, budget=64), MetricsCtx()))
    assert Counter(out) == Counter(tuple(r) for r in ref_group(rows, 2, 2, aggs))


def test_join_build_within_budget_never_spills_probe(tmp_path):
    build = trial_rows(4, 300, 2, ratio=2, payload=1)
    probe = trial_rows(5, 2000, 2, ratio=4, payload=1)
    m = MetricsCtx()
    out = list(hash_join(iter(build), iter(probe), 2, cfg(tmp_path, budget=1000), m))
    assert m.rows_spilled == 0
    buckets = defaultdict(list)
    for b in build:
        buckets[b[:2]].append(b)
    expected = Counter()
    for p in probe:
        for b in buckets.get(p[:2], ()):
            expected[p + b[2:]] += 1
    assert Counter(out) == expected


def test_join_matches_merge_join_on_sorted_copies(tmp_path):
    build = trial_rows(6, 1500, 2, ratio=4, payload=1)
    probe = trial_rows(7, 1500, 2, ratio=4, payload=1)
    out = Counter(hash_join(iter(build), iter(probe), 2, cfg(tmp_path, budget=100), MetricsCtx()))
    schema = KeySchema(2)
    merged = merge_join(
        from_sorted_rows(ref_sort(probe, 2), schema),
        from_sorted_rows(ref_sort(build, 2), schema),
        2,
        "inner",
    )
    assert out == Counter(r for r, _ in merged)


def test_join_grace_mode_spills_both_sides(tmp_path):
    build = trial_rows(8, 2000, 2, ratio=1)
    probe = trial_rows(9, 3000, 2, ratio=1)
    m = MetricsCtx()
    list(hash_join(iter(build), iter(probe), 2, cfg(tmp_path, budget=200), m))
    assert m.rows_spilled >= len(build) + len(probe)


def test_spill_monotonicity_in_budget(tmp_path):
    rows = trial_rows(10, 4000, 2, ratio=1)
    spills = []
    for budget in (100, 400, 1600, 6400):
        m = MetricsCtx()
        list(hash_aggregate(iter(rows), 2, [], cfg(tmp_path, budget=budget), m))
        spills.append(m.rows_spilled)
    assert spills == sorted(spills, reverse=True)


def test_deterministic_output_order(tmp_path):
    rows = trial_rows(11, 2500, 2, ratio=4)
    a = list(hash_aggregate(iter(rows), 2, [("count", None)], cfg(tmp_path, budget=100), MetricsCtx()))
    b = list(hash_aggregate(iter(rows), 2, [("count", None)], cfg(tmp_path, budget=100), MetricsCtx()))
    assert a == b


def test_config_validation():
    with pytest.raises(ValueError):
        HashOpConfig(memory_budget_rows=0)
    with pytest.raises(ValueError):
        HashOpConfig(partitions=1)

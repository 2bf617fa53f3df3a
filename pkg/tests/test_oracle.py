import math
import random

import pytest

from ovcengine.core import DESCENDING, KeySchema, make_code
from ovcengine.metrics import MetricsCtx
from ovcengine.oracle import Violation, recompute_codes, stirling_lower_bound
from ovcengine.streams import from_sorted_rows

from helpers import TABLE1, SCHEMA4


def test_table1_stream_is_clean():
    pairs = list(from_sorted_rows(TABLE1, SCHEMA4))
    assert recompute_codes(pairs, SCHEMA4) == []


def test_single_perturbation_is_reported():
    pairs = list(from_sorted_rows(TABLE1, SCHEMA4))
    bad = make_code(3, 13, SCHEMA4)
    pairs[1] = (pairs[1][0], bad)
    violations = recompute_codes(pairs, SCHEMA4)
    assert len(violations) == 1
    v = violations[0]
    assert v.index == 1 and v.kind == "code"
    assert v.found == bad and v.expected == make_code(3, 12, SCHEMA4)


def test_order_violation_is_reported():
    schema = KeySchema(2)
    pairs = list(from_sorted_rows([(2, 0), (3, 0)], schema))
    pairs = [pairs[1], pairs[0]]
    kinds = [v.kind for v in recompute_codes(pairs, schema)]
    assert "order" in kinds


def test_oracle_against_constructed_prefixes():
    # rows built from a base with a forced first difference at a known column
    rng = random.Random(31)
    for _ in range(10000):
        arity = rng.randint(1, 8)
        schema = KeySchema(arity, DESCENDING if rng.random() < 0.3 else "ascending")
        base = tuple(rng.randrange(1, 100) for _ in range(arity))
        p = rng.randint(0, arity)
        if p == arity:
            row, expected = base, make_code(arity, 0, schema)
        else:
            bumped = base[p] + rng.randint(1, 10)
            row = base[:p] + (bumped,) + tuple(rng.randrange(200) for _ in range(arity - p - 1))
            expected = make_code(p, bumped, schema)
        violations = recompute_codes([(base, make_code(0, base[0], schema)), (row, expected)], schema)
        assert violations == []
        wrong = expected ^ (1 << 40)
        violations = recompute_codes([(base, make_code(0, base[0], schema)), (row, wrong)], schema)
        assert [v.index for v in violations] == [1]


def test_stirling_values():
    assert stirling_lower_bound(1) == 0.0
    assert math.isclose(stirling_lower_bound(4), math.log2(24), rel_tol=1e-12)
    n = 100000
    series = n * math.log2(n / math.e) + 0.5 * math.log2(2 * math.pi * n)
    assert abs(stirling_lower_bound(n) - series) / series < 1e-4
    with pytest.raises(ValueError):
        stirling_lower_bound(0)


def test_metrics_merge_audit():
    a = MetricsCtx(row_comparisons=3, column_comparisons=5, code_decisions=2, rows_spilled=1, bytes_spilled=10)
    b = MetricsCtx(row_comparisons=4, column_comparisons=6, code_decisions=9, rows_spilled=0, bytes_spilled=2)
    total = MetricsCtx()
    total.merge(a)
    total.merge(b)
    assert total.as_dict() == {
        "row_comparisons": 7,
        "column_comparisons": 11,
        "code_decisions": 11,
        "rows_spilled": 1,
        "bytes_spilled": 12,
    }
    assert set(a.as_dict()) == {
        "row_comparisons", "column_comparisons", "code_decisions", "rows_spilled", "bytes_spilled",
    }


def test_violation_shape():
    v = Violation(3, "code", 1, 2)
    assert (v.index, v.kind, v.expected, v.found) == (3, "code", 1, 2)

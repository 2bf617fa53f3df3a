"""Shared builders and naive reference implementations for the test suite."""

from __future__ import annotations

import random
from collections import Counter, defaultdict

from ovcengine import GenSpec, KeySchema, generate, rows_as_tuples
from ovcengine.streams import CodedStream, from_sorted_rows

TABLE1 = [
    (5, 7, 3, 9),
    (5, 7, 3, 12),
    (5, 8, 4, 6),
    (5, 9, 2, 7),
    (5, 9, 2, 7),
    (5, 9, 3, 4),
    (5, 9, 3, 7),
]
# per-row (offset, value); value None marks the duplicate row
TABLE1_OFFSETS = [(0, 5), (3, 12), (1, 8), (1, 9), (4, None), (2, 3), (3, 7)]

SCHEMA4 = KeySchema(4)


def coded(rows, schema) -> CodedStream:
    return from_sorted_rows(rows, schema)


def trial_rows(seed, n, arity, ratio=1, payload=0, sort=True):
    """Deterministic trial input with a controlled duplication ratio."""
    if n == 0:
        return []
    spec = GenSpec(n, arity, ratio=ratio, payload_cols=payload, seed=seed)
    return rows_as_tuples(generate(spec, sort=sort))


def random_row(rng: random.Random, arity, domain):
    return tuple(rng.randrange(domain) for _ in range(arity))


def multiset(rows) -> Counter:
    return Counter(rows)


# naive references -----------------------------------------------------------

def ref_sort(rows, arity):
    return sorted(rows, key=lambda r: r[:arity])


def ref_distinct(rows, arity):
    """First row per distinct key, in key order."""
    seen = set()
    out = []
    for r in ref_sort(rows, arity):
        k = r[:arity]
        if k not in seen:
            seen.add(k)
            out.append(r)
    return out


def ref_group(rows, arity, g, aggs):
    table = {}
    order = []
    for r in ref_sort(rows, arity):
        k = r[:g]
        if k not in table:
            table[k] = [1 if kind == "count" else r[col] for kind, col in aggs]
            order.append(k)
        else:
            accs = table[k]
            for i, (kind, col) in enumerate(aggs):
                if kind == "count":
                    accs[i] += 1
                elif kind == "sum":
                    accs[i] = min(accs[i] + r[col], 0xFFFFFFFF)
                elif kind == "min":
                    accs[i] = min(accs[i], r[col])
                else:
                    accs[i] = max(accs[i], r[col])
    return [k + tuple(table[k]) for k in order]


def ref_join(left, right, j, kind, null=0xFFFFFFFF):
    """Bucketed nested-loop join, ordered by the (sorted) left input."""
    buckets = defaultdict(list)
    for r in right:
        buckets[r[:j]].append(r)
    out = []
    for l in left:
        matches = buckets.get(l[:j], ())
        if kind == "inner":
            out.extend(l + m[j:] for m in matches)
        elif kind == "left_semi":
            if matches:
                out.append(l)
        elif kind == "left_anti":
            if not matches:
                out.append(l)
        else:  # left_outer
            if matches:
                out.extend(l + m[j:] for m in matches)
            else:
                pad = len(right[0]) - j if right else 0
                out.append(l + (null,) * pad)
    return out

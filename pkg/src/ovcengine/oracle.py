"""Brute-force validation of coded streams and the comparison lower bound.

``recompute_codes`` re-derives every code of a materialized stream by direct
column-by-column comparison, independently of the code-combination shortcuts
the operators use, and reports each mismatch and each sort-order violation.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .core import (
    KeySchema,
    OFFSET_SHIFT,
    VALID,
    VALUE_MASK,
)


class Violation(NamedTuple):
    index: int
    kind: str  # "code" or "order"
    expected: int | None
    found: int | None


def recompute_codes(pairs, schema: KeySchema) -> list[Violation]:
    """Check a materialized list of (row, code) pairs against first principles.

    The first row must carry an offset-0 code holding its first key column;
    every later row's code is re-derived from its predecessor.  An empty
    result means the stream is valid.
    """
    violations: list[Violation] = []
    arity = schema.arity
    ascending = not schema.descending
    prev = None
    for index, (row, code) in enumerate(pairs):
        if prev is None:
            if ascending:
                expected = VALID | (arity << OFFSET_SHIFT) | row[0]
            else:
                expected = VALID | (VALUE_MASK ^ row[0])
        else:
            off = 0
            while off < arity and prev[off] == row[off]:
                off += 1
            if off < arity and prev[off] > row[off]:
                violations.append(Violation(index, "order", None, code))
                prev = row
                continue
            if off == arity:
                expected = VALID if ascending else VALID | (arity << OFFSET_SHIFT)
            elif ascending:
                expected = VALID | ((arity - off) << OFFSET_SHIFT) | row[off]
            else:
                expected = VALID | (off << OFFSET_SHIFT) | (VALUE_MASK ^ row[off])
        if code != expected:
            violations.append(Violation(index, "code", expected, code))
        prev = row
    return violations


def stirling_lower_bound(n: int) -> float:
    """log2(n!) by direct summation, the comparison lower bound for n rows."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.fsum(math.log2(k) for k in range(2, n + 1))

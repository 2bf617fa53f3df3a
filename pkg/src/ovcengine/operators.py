"""Order-preserving relational operators over coded streams.

Every operator consumes coded streams and derives its output codes from the
input codes alone: a surviving row's code is the running maximum of its own
code and the codes of rows dropped since the previous output (the chained
maximum of consecutive links spans any gap), duplicates and boundaries are
single packed-code tests, and repeated matches of one row carry duplicate
codes.  Column values are compared only where the operation itself needs
them, e.g. in the merge logic of a join.

All operators require ascending-coded streams.
"""

from __future__ import annotations

from collections import deque

from .core import (
    ASCENDING,
    KeySchema,
    OFFSET_SHIFT,
    OvcError,
    VALID,
    VALUE_MASK,
    boundary_threshold,
)
from .losertree import LoserTree
from .streams import CodedStream

__all__ = [
    "KeyOrderBroken",
    "NULL_VALUE",
    "JOIN_KINDS",
    "filter",
    "project",
    "segment",
    "dedup",
    "group_aggregate",
    "merge_join",
    "intersect_distinct",
    "except_distinct",
    "lookup_join",
    "exchange_split",
    "exchange_merge",
]

# Padding for the right-hand payload of unmatched rows in left outer joins.
# Keys are never null; only payload columns may carry the marker.
NULL_VALUE = VALUE_MASK

JOIN_KINDS = ("inner", "left_semi", "left_anti", "left_outer")

AGG_KINDS = ("count", "sum", "min", "max")


class KeyOrderBroken(OvcError):
    """A projection tried to reorder or drop the leading sort-key prefix."""


def _require_ascending(schema: KeySchema) -> None:
    if schema.direction != ASCENDING:
        raise ValueError("operators consume ascending-coded streams only")


def filter(stream: CodedStream, pred, metrics=None) -> CodedStream:
    """Keep rows passing `pred`; codes of dropped rows fold into the next output."""
    _require_ascending(stream.schema)

    def gen():
        pending = VALID  # duplicate code, the identity of the running maximum
        for row, code in stream:
            if pred(row):
                yield row, (code if code > pending else pending)
                pending = VALID
            elif code > pending:
                pending = code

    return CodedStream(stream.schema, gen())


def project(stream: CodedStream, keep, metrics=None) -> CodedStream:
    """Keep columns by index; the kept key columns must stay a leading prefix.

    `keep` must start with 0, 1, ..., j-1 for some j >= 1; everything after
    that prefix is carried as payload.  With j equal to the input arity the
    codes pass through unchanged, with a shorter prefix they are capped to it.
    """
    schema = stream.schema
    _require_ascending(schema)
    keep = tuple(keep)
    j = 0
    while j < len(keep) and j < schema.arity and keep[j] == j:
        j += 1
    if j == 0:
        raise KeyOrderBroken(f"keep list {keep!r} does not retain a leading key prefix")

    out_schema = KeySchema(j)
    if j == schema.arity:
        def gen():
            for row, code in stream:
                yield tuple(row[i] for i in keep), code
    else:
        threshold = boundary_threshold(j, schema)
        shift = (schema.arity - j) << OFFSET_SHIFT

        def gen():
            for row, code in stream:
                out = code - shift if code >= threshold else VALID
                yield tuple(row[i] for i in keep), out

    return CodedStream(out_schema, gen())


def segment(stream: CodedStream, seg_len: int):
    """Split on distinct values of the leading `seg_len` columns.

    Yields one coded stream per segment, with every code cut to the
    segmentation key; a per-segment sort on a new suffix key re-extends them.
    Segments must be consumed in order; an unconsumed remainder is drained
    when the next segment is requested.
    """
    schema = stream.schema
    _require_ascending(schema)
    if not 1 <= seg_len <= schema.arity:
        raise ValueError(f"segment length {seg_len} outside [1, {schema.arity}]")
    out_schema = KeySchema(seg_len)
    threshold = boundary_threshold(seg_len, schema)
    shift = (schema.arity - seg_len) << OFFSET_SHIFT
    it = iter(stream)

    state = {"carry": next(it, None)}

    def seg_rows(head):
        yield head[0], head[1] - shift  # boundary row, re-expressed at seg_len
        for row, code in it:
            if code >= threshold:
                state["carry"] = (row, code)
                return
            yield row, VALID  # offset at or past the segment key: duplicate

    def outer():
        while state["carry"] is not None:
            head = state["carry"]
            state["carry"] = None
            inner = seg_rows(head)
            yield CodedStream(out_schema, inner)
            for _ in inner:
                pass

    return outer()


def dedup(stream: CodedStream, metrics=None) -> CodedStream:
    """Suppress rows whose offset equals the arity; survivors keep their codes."""
    _require_ascending(stream.schema)

    def gen():
        tested = 0
        try:
            for row, code in stream:
                tested += 1
                if code != VALID:
                    yield row, code
        finally:
            if metrics is not None:
                metrics.code_decisions += tested

    return CodedStream(stream.schema, gen())


class _GroupStream(CodedStream):
    """Grouping output; `saturated` is set if any sum or count hit 2^32-1."""

    __slots__ = ("saturated",)

    def __init__(self, schema, iterable):
        super().__init__(schema, iterable)
        self.saturated = False


def group_aggregate(stream: CodedStream, g: int, aggs, metrics=None) -> CodedStream:
    """Aggregate runs of equal leading `g` columns into one row per group.

    `aggs` is a list of (kind, column) with kind in {count, sum, min, max};
    count ignores its column, the others read a column at index >= g.  Group
    boundaries are single packed-code tests; the output keeps the first row
    of each group's code, capped to arity g.  Sums and counts saturate at
    2^32-1 and set the stream's `saturated` flag.
    """
    schema = stream.schema
    _require_ascending(schema)
    if not 1 <= g <= schema.arity:
        raise ValueError(f"group key length {g} outside [1, {schema.arity}]")
    specs = []
    for kind, col in aggs:
        if kind not in AGG_KINDS:
            raise ValueError(f"unknown aggregate {kind!r}")
        if kind != "count" and (col is None or col < g):
            raise ValueError(f"aggregate {kind} needs a column index >= {g}")
        specs.append((kind, col))

    threshold = boundary_threshold(g, schema)
    shift = (schema.arity - g) << OFFSET_SHIFT
    out = _GroupStream(KeySchema(g), ())

    def gen():
        tested = 0
        key = None
        first_code = 0
        accs = None
        try:
            for row, code in stream:
                tested += 1
                if code >= threshold:
                    if key is not None:
                        yield key + tuple(accs), first_code
                    key = row[:g]
                    first_code = code - shift
                    accs = [
                        1 if kind == "count" else row[col]
                        for kind, col in specs
                    ]
                else:
                    for i, (kind, col) in enumerate(specs):
                        if kind == "count":
                            v = accs[i] + 1
                        elif kind == "sum":
                            v = accs[i] + row[col]
                        elif kind == "min":
                            v = row[col] if row[col] < accs[i] else accs[i]
                        else:
                            v = row[col] if row[col] > accs[i] else accs[i]
                        if v > VALUE_MASK:
                            v = VALUE_MASK
                            out.saturated = True
                        accs[i] = v
            if key is not None:
                yield key + tuple(accs), first_code
        finally:
            if metrics is not None:
                metrics.code_decisions += tested

    out._it = iter(gen())
    return out


def _groups(stream: CodedStream, j: int, metrics=None):
    """Yield maximal runs of rows sharing the leading j columns, as lists.

    Group boundaries are packed-code tests; no column is touched.
    """
    it = iter(stream)
    first = next(it, None)
    if first is None:
        return
    threshold = boundary_threshold(j, stream.schema)
    tested = 0
    group = [first]
    try:
        for item in it:
            tested += 1
            if item[1] >= threshold:
                yield group
                group = [item]
            else:
                group.append(item)
        yield group
    finally:
        if metrics is not None:
            metrics.code_decisions += tested


def _compare_keys(a, b, j, metrics=None) -> int:
    """Three-way column comparison of two join keys, charged to metrics."""
    n = 0
    result = 0
    for i in range(j):
        n += 1
        if a[i] != b[i]:
            result = -1 if a[i] < b[i] else 1
            break
    if metrics is not None:
        metrics.row_comparisons += 1
        metrics.column_comparisons += n
    return result


def merge_join(left: CodedStream, right: CodedStream, j: int, kind: str, metrics=None) -> CodedStream:
    """Join sorted inputs on their leading j columns, preserving left order.

    Output rows are the left row plus the right row's columns past the join
    key; the key arity stays the left input's.  Codes follow the filter rule
    for skipped left rows, and the second and later matches of one left row
    carry duplicate codes.  Unmatched left rows in a left outer join carry
    null-marker payload padding.
    """
    if kind not in JOIN_KINDS:
        raise ValueError(f"unknown join kind {kind!r}")
    _require_ascending(left.schema)
    _require_ascending(right.schema)
    if not 1 <= j <= min(left.schema.arity, right.schema.arity):
        raise ValueError(f"join key length {j} exceeds an input arity")

    out_schema = left.schema

    def gen():
        pending = VALID

        def out_code(code):
            nonlocal pending
            c = code if code > pending else pending
            pending = VALID
            return c

        def absorb(group):
            nonlocal pending
            for _, code in group:
                if code > pending:
                    pending = code

        lgroups = _groups(left, j, metrics)
        rgroups = _groups(right, j, metrics)
        rgroup = next(rgroups, None)
        # all right rows share one width; an empty right side pads nothing
        pad = len(rgroup[0][0]) - j if rgroup is not None else 0
        for lgroup in lgroups:
            matched = False
            if rgroup is not None:
                lkey = lgroup[0][0]
                cmp = _compare_keys(lkey, rgroup[0][0], j, metrics)
                while cmp > 0:
                    rgroup = next(rgroups, None)
                    if rgroup is None:
                        break
                    cmp = _compare_keys(lkey, rgroup[0][0], j, metrics)
                if rgroup is not None:
                    matched = cmp == 0

            if kind == "inner":
                if matched:
                    for lrow, lcode in lgroup:
                        c = out_code(lcode)
                        for rrow, _ in rgroup:
                            yield lrow + rrow[j:], c
                            c = VALID
                else:
                    absorb(lgroup)
            elif kind == "left_semi":
                if matched:
                    for lrow, lcode in lgroup:
                        yield lrow, out_code(lcode)
                else:
                    absorb(lgroup)
            elif kind == "left_anti":
                if matched:
                    absorb(lgroup)
                else:
                    for lrow, lcode in lgroup:
                        yield lrow, out_code(lcode)
            else:  # left_outer
                if matched:
                    for lrow, lcode in lgroup:
                        c = out_code(lcode)
                        for rrow, _ in rgroup:
                            yield lrow + rrow[j:], c
                            c = VALID
                else:
                    nulls = (NULL_VALUE,) * pad
                    for lrow, lcode in lgroup:
                        yield lrow + nulls, out_code(lcode)

            if matched:
                # the next left key is strictly greater, this right group is done
                rgroup = next(rgroups, None)

    return CodedStream(out_schema, gen())


def intersect_distinct(left: CodedStream, right: CodedStream, metrics=None) -> CodedStream:
    """Set intersection on the full key: dedup both sides, then inner join."""
    if left.schema.arity != right.schema.arity:
        raise ValueError("intersect needs equal key arities")
    return merge_join(
        dedup(left, metrics), dedup(right, metrics), left.schema.arity, "inner", metrics
    )


def except_distinct(left: CodedStream, right: CodedStream, metrics=None) -> CodedStream:
    """Set difference on the full key: dedup both sides, then anti join."""
    if left.schema.arity != right.schema.arity:
        raise ValueError("except needs equal key arities")
    return merge_join(
        dedup(left, metrics), dedup(right, metrics), left.schema.arity, "left_anti", metrics
    )


def lookup_join(
    outer: CodedStream,
    lookup,
    kind: str,
    metrics=None,
    *,
    inner_width: int | None = None,
    composite: bool = False,
    inner_arity: int | None = None,
) -> CodedStream:
    """Order-preserving nested-loops join against a deterministic lookup source.

    `lookup(row)` returns the matching inner rows, sorted; the join predicate
    is whatever the source implements and need not be an equality.  Codes of
    match-less outer rows fold into the next output exactly as in a filter.

    Plain mode appends matched inner rows as payload; the key stays the outer
    key and repeated matches carry duplicate codes.  `inner_width` sizes the
    null padding for left outer joins.

    Composite mode (`composite=True`, inner joins only) expects
    `lookup(row)` to return (inner_row, inner_code) pairs forming a coded
    chain; the output key is the outer key followed by `inner_arity` inner
    key columns, and inner codes carry over with their offsets shifted past
    the outer key.  Runs of equal outer keys are joined inner-row-major so
    every output code stays derivable from the previous output row.
    """
    if kind not in JOIN_KINDS:
        raise ValueError(f"unknown join kind {kind!r}")
    _require_ascending(outer.schema)
    if composite:
        if kind != "inner":
            raise ValueError("composite lookup joins support inner joins only")
        if inner_arity is None or inner_arity < 1:
            raise ValueError("composite mode needs the inner key arity")
        return _composite_lookup_join(outer, lookup, metrics, inner_arity)
    if kind == "left_outer" and inner_width is None:
        raise ValueError("left outer lookup joins need inner_width for padding")

    def gen():
        pending = VALID

        def out_code(code):
            nonlocal pending
            c = code if code > pending else pending
            pending = VALID
            return c

        for orow, ocode in outer:
            matches = lookup(orow)
            if kind == "left_semi":
                if matches:
                    yield orow, out_code(ocode)
                elif ocode > pending:
                    pending = ocode
            elif kind == "left_anti":
                if matches:
                    if ocode > pending:
                        pending = ocode
                else:
                    yield orow, out_code(ocode)
            elif kind == "inner":
                if matches:
                    c = out_code(ocode)
                    for m in matches:
                        yield orow + tuple(m), c
                        c = VALID
                elif ocode > pending:
                    pending = ocode
            else:  # left_outer
                if matches:
                    c = out_code(ocode)
                    for m in matches:
                        yield orow + tuple(m), c
                        c = VALID
                else:
                    yield orow + (NULL_VALUE,) * inner_width, out_code(ocode)

    return CodedStream(outer.schema, gen())


def _composite_lookup_join(outer, lookup, metrics, inner_arity):
    out_schema = KeySchema(outer.schema.arity + inner_arity)
    shift = inner_arity << OFFSET_SHIFT

    def gen():
        pending = VALID
        it = iter(outer)
        item = next(it, None)
        while item is not None:
            # batch a run of outer rows with exactly equal keys (duplicate codes)
            batch = [item]
            item = next(it, None)
            while item is not None and item[1] == VALID:
                batch.append(item)
                item = next(it, None)
            orow0, ocode0 = batch[0]
            matches = lookup(orow0)
            if not matches:
                for _, oc in batch:
                    if oc > pending:
                        pending = oc
                continue
            first = True
            for irow, icode in matches:
                # inner-row-major within the batch keeps codes derivable
                for k, (orow, _) in enumerate(batch):
                    if first:
                        combined = ocode0 if ocode0 > pending else pending
                        pending = VALID
                        yield orow + irow, combined + shift
                        first = False
                    elif k == 0:
                        # new inner row against the batch's last outer row:
                        # shared prefix = outer key + the inner code's offset
                        yield orow + irow, icode
                    else:
                        # same inner row, equal outer key: a full duplicate
                        yield orow + irow, VALID

    return CodedStream(out_schema, gen())


def exchange_split(stream: CodedStream, parts: int, part_fn, metrics=None) -> list[CodedStream]:
    """Order-preserving split into `parts` streams routed by `part_fn(row)`.

    Each partition behaves like a filter over the input: rows routed
    elsewhere fold into its next output's code.  Partitions buffer rows
    until their consumer pulls them.
    """
    schema = stream.schema
    _require_ascending(schema)
    if parts < 1:
        raise ValueError("need at least one partition")

    it = iter(stream)
    queues = [deque() for _ in range(parts)]
    pend = [VALID] * parts

    def pull_until(p) -> bool:
        for row, code in it:
            t = part_fn(row)
            if not 0 <= t < parts:
                raise ValueError(f"partition function returned {t} for {parts} parts")
            out = code if code > pend[t] else pend[t]
            pend[t] = VALID
            for q in range(parts):
                if q != t and code > pend[q]:
                    pend[q] = code
            queues[t].append((row, out))
            if t == p:
                return True
        return False

    def part_stream(p):
        q = queues[p]
        while True:
            if q:
                yield q.popleft()
            elif not pull_until(p):
                return

    return [CodedStream(schema, part_stream(p)) for p in range(parts)]


def exchange_merge(inputs, metrics=None) -> CodedStream:
    """Order-preserving merge of coded streams through one loser tree."""
    inputs = list(inputs)
    if not inputs:
        raise ValueError("need at least one input stream")
    schema = inputs[0].schema
    for s in inputs:
        _require_ascending(s.schema)
        if s.schema.arity != schema.arity:
            raise ValueError("all merge inputs need the same key arity")

    def gen():
        tree = LoserTree([iter(s) for s in inputs], schema, metrics)
        while True:
            item = tree.pop()
            if item is None:
                return
            yield item

    return CodedStream(schema, gen())

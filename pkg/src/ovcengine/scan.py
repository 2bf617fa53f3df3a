"""Synthetic data generation and columnar storage whose scans code for free.

A sorted table with its leading key columns run-length encoded already knows
every row's shared-prefix length: the leftmost column starting a run at a row
is the row's code offset, and the run's value is the code value.  Scanning
such a table therefore emits offset-value codes without a single column
comparison.

File formats (little-endian throughout):

    plain rows   magic "OVCP" | u32 version=1 | u32 arity | u32 payload cols
                 | u64 row count | row-major u32 column values
    RLE table    magic "OVCT" | u32 version=1 | u32 arity | u32 payload cols
                 | u64 row count | per key column: u64 run count then
                 run count x (u32 value | u64 run length) | per payload
                 column: row count x u32
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import KeySchema, OFFSET_SHIFT, OvcError, VALID
from .streams import CodedStream

_PLAIN_MAGIC = b"OVCP"
_RLE_MAGIC = b"OVCT"
_HEADER = struct.Struct("<4sIIIQ")


class FormatError(OvcError):
    """A table file is malformed or violates the nested-run invariant."""


@dataclass(frozen=True)
class GenSpec:
    """Deterministic synthetic table description.

    Either give per-column distinct counts, or a target ratio of input rows
    to distinct keys; with a ratio, every distinct key repeats `ratio` times
    (the last one possibly fewer), so the group count is rows/ratio up to
    rounding.
    """

    rows: int
    key_cols: int
    distinct_per_col: tuple[int, ...] | None = None
    ratio: int | None = None
    payload_cols: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.rows < 0 or self.key_cols < 1 or self.payload_cols < 0:
            raise ValueError("bad table shape")
        if (self.distinct_per_col is None) == (self.ratio is None):
            raise ValueError("give exactly one of distinct_per_col or ratio")
        if self.distinct_per_col is not None and len(self.distinct_per_col) != self.key_cols:
            raise ValueError("need one distinct count per key column")
        if self.ratio is not None and self.ratio < 1:
            raise ValueError("ratio must be >= 1")


def generate(spec: GenSpec, *, sort: bool = False) -> np.ndarray:
    """Materialize the table as a (rows, key_cols + payload_cols) uint32 array."""
    rng = np.random.default_rng(spec.seed)
    n = spec.rows
    k = spec.key_cols
    if n == 0:
        return np.zeros((0, k + spec.payload_cols), dtype=np.uint32)

    if spec.ratio is not None:
        distinct = max(1, round(n / spec.ratio))
        # few distinct values per column: the smallest uniform per-column
        # domain whose product covers the distinct-key target
        base = 2
        while base**k < distinct:
            base += 1
        ids = rng.permutation(base**k)[:distinct].astype(np.uint64)
        keys = np.empty((distinct, k), dtype=np.uint32)
        for c in range(k - 1, -1, -1):
            keys[:, c] = (ids % base).astype(np.uint32)
            ids //= base
        data = np.repeat(keys, spec.ratio, axis=0)[:n]
        if len(data) < n:  # rounding left a shortfall: cycle the keys again
            shortfall = n - len(data)
            extra = np.tile(keys, (shortfall // distinct + 1, 1))[:shortfall]
            data = np.vstack([data, extra])
    else:
        cols = [
            rng.integers(0, d, size=n, dtype=np.uint32)
            for d in spec.distinct_per_col
        ]
        data = np.column_stack(cols)

    if spec.payload_cols:
        payload = rng.integers(0, 1 << 32, size=(n, spec.payload_cols), dtype=np.uint32)
        data = np.column_stack([data, payload])

    if sort:
        order = np.lexsort(tuple(data[:, c] for c in range(k - 1, -1, -1)))
        data = data[order]
    else:
        data = data[rng.permutation(n)]
    return np.ascontiguousarray(data)


def rows_as_tuples(table: np.ndarray) -> list[tuple]:
    return [tuple(r) for r in table.tolist()]


def write_rows(path, table: np.ndarray, arity: int) -> None:
    """Spill a table in the plain row format."""
    n, width = table.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_PLAIN_MAGIC, 1, arity, width - arity, n))
        fh.write(np.ascontiguousarray(table, dtype="<u4").tobytes())


def read_rows(path) -> tuple[np.ndarray, int]:
    """Read a plain row file; returns (table, arity)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, arity, payload, n = _HEADER.unpack(header)
        if magic != _PLAIN_MAGIC or version != 1:
            raise FormatError(f"{path} is not a version-1 plain row file")
        body = fh.read()
    width = arity + payload
    expect = 4 * n * width
    if len(body) != expect:
        raise FormatError(f"{path}: expected {expect} body bytes, found {len(body)}")
    table = np.frombuffer(body, dtype="<u4").reshape(n, width).astype(np.uint32)
    return table, arity


class RleTable:
    """Sorted table with run-length encoded key columns and plain payload.

    Run boundaries of each key column include every boundary of the column
    to its left, so runs nest and the implied row order is the sorted order.
    """

    def __init__(self, arity, row_count, key_runs, payload):
        self.arity = arity
        self.row_count = row_count
        self.key_runs = key_runs          # per column: (values u32[], lengths u64[])
        self.payload = payload            # (rows, payload_cols) uint32

    @classmethod
    def from_rows(cls, table: np.ndarray, arity: int) -> "RleTable":
        """Encode a sorted table; raises FormatError on unsorted input."""
        n, width = table.shape
        if arity < 1 or arity > width:
            raise ValueError(f"arity {arity} outside table width {width}")
        key_runs = []
        if n == 0:
            return cls(arity, 0, [(np.empty(0, np.uint32), np.empty(0, np.uint64))] * arity,
                       np.zeros((0, width - arity), np.uint32))
        breaks = np.zeros(n, dtype=bool)
        breaks[0] = True
        for c in range(arity):
            col = table[:, c]
            changed = np.empty(n, dtype=bool)
            changed[0] = True
            changed[1:] = col[1:] != col[:-1]
            decreased = col[1:] < col[:-1]
            if np.any(decreased & ~breaks[1:]):
                raise FormatError(f"rows are not sorted on key column {c}")
            breaks |= changed  # nested runs: a parent break splits this column too
            starts = np.flatnonzero(breaks)
            lengths = np.diff(np.append(starts, n)).astype(np.uint64)
            key_runs.append((col[starts].astype(np.uint32), lengths))
        return cls(arity, n, key_runs, table[:, arity:].astype(np.uint32))

    def to_rows(self) -> np.ndarray:
        """Expand back to the full sorted table."""
        if self.row_count == 0:
            return np.zeros((0, self.arity + self.payload.shape[1]), np.uint32)
        cols = [
            np.repeat(values, lengths.astype(np.int64))
            for values, lengths in self.key_runs
        ]
        cols.extend(self.payload[:, c] for c in range(self.payload.shape[1]))
        return np.column_stack(cols)

    def to_file(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_RLE_MAGIC, 1, self.arity, self.payload.shape[1], self.row_count))
            for values, lengths in self.key_runs:
                fh.write(struct.pack("<Q", len(values)))
                fh.write(values.astype("<u4").tobytes())
                fh.write(lengths.astype("<u8").tobytes())
            fh.write(np.ascontiguousarray(self.payload.T, dtype="<u4").tobytes())

    @classmethod
    def from_file(cls, path) -> "RleTable":
        with open(path, "rb") as fh:
            header = fh.read(_HEADER.size)
            if len(header) < _HEADER.size:
                raise FormatError(f"{path}: truncated header")
            magic, version, arity, payload_cols, n = _HEADER.unpack(header)
            if magic != _RLE_MAGIC or version != 1:
                raise FormatError(f"{path} is not a version-1 table file")
            key_runs = []
            for _ in range(arity):
                raw = fh.read(8)
                if len(raw) < 8:
                    raise FormatError(f"{path}: truncated run list")
                (count,) = struct.unpack("<Q", raw)
                values = np.frombuffer(fh.read(4 * count), dtype="<u4").astype(np.uint32)
                lengths = np.frombuffer(fh.read(8 * count), dtype="<u8").astype(np.uint64)
                if len(values) != count or len(lengths) != count:
                    raise FormatError(f"{path}: truncated run list")
                if int(lengths.sum()) != n:
                    raise FormatError(f"{path}: run lengths disagree with row count")
                key_runs.append((values, lengths))
            body = fh.read(4 * payload_cols * n)
            payload = (
                np.frombuffer(body, dtype="<u4").reshape(payload_cols, n).T.astype(np.uint32)
                if payload_cols
                else np.zeros((n, 0), np.uint32)
            )
        return cls(arity, n, key_runs, payload)


def scan_with_codes(table: RleTable, metrics=None) -> CodedStream:
    """Sorted scan emitting (row, code) pairs without any column comparison.

    A row's offset is the leftmost key column whose run starts there (the
    first row has offset 0); rows inside every run carry duplicate codes.
    """
    schema = KeySchema(table.arity)
    n = table.row_count
    if n == 0:
        return CodedStream(schema, iter(()))

    arity = table.arity
    start_values = np.zeros(n, dtype=np.uint64)
    offsets = np.full(n, arity, dtype=np.uint64)
    for c in range(arity - 1, -1, -1):
        values, lengths = table.key_runs[c]
        starts = np.zeros(n, dtype=bool)
        starts[np.cumsum(lengths.astype(np.int64))[:-1]] = True
        starts[0] = True
        offsets[starts] = c  # leftmost starting column wins: c descends
        start_values[starts] = values.astype(np.uint64)
    dup_mask = offsets == arity
    start_values[dup_mask] = 0
    codes = (
        np.uint64(VALID)
        + ((np.uint64(arity) - offsets) << np.uint64(OFFSET_SHIFT))
        + start_values
    )

    rows = rows_as_tuples(table.to_rows())
    code_list = codes.tolist()

    def gen():
        yield from zip(rows, code_list)

    return CodedStream(schema, gen())

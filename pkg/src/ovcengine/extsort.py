"""External merge sort producing coded streams.

Run generation fills memory and tournament-sorts it (or runs replacement
selection), spilling sorted runs whose records carry their codes with the
shared prefixes truncated.  Merging is fan-in limited; the final merge
streams (row, code) pairs without materializing.

Run file layout (all little-endian):

    header   magic "OVCR" | u32 version=1 | u32 arity | u32 direction
             | u32 width (total columns incl. payload) | u64 row count
    record   u64 packed code | u32 x (width - offset) column values,
             the row's columns from the code's offset onward

The first record has offset 0 and therefore carries the full row; every
later row is reconstructed by patching its suffix onto its predecessor.
"""

from __future__ import annotations

import itertools
import os
import struct
import sys
import tempfile
from array import array
from dataclasses import dataclass

from .core import (
    ASCENDING,
    KeySchema,
    NEXT_RUN,
    OFFSET_MASK,
    OFFSET_SHIFT,
    OvcError,
    SENTINEL_SHIFT,
    VALID,
    VALUE_MASK,
    encode_first,
)
from .losertree import LoserTree, tree_from_rows
from .streams import CodedStream

SPILL_DIR_ENV = "OVCENGINE_SPILL_DIR"

MINIRUN_MERGE = "minirun-merge"
REPLACEMENT_SELECTION = "replacement-selection"

_MAGIC = b"OVCR"
_HEADER = struct.Struct("<4sIIIIQ")
_SWAP = sys.byteorder == "big"


class SpillIo(OvcError):
    """Temporary storage failed or a spill file is malformed."""


_spill_names = itertools.count()


def _spill_prefix(spill_dir: str, tag: str) -> str:
    return os.path.join(spill_dir, f"ovc-{tag}-{os.getpid()}-{next(_spill_names)}")


@dataclass
class SortConfig:
    memory_budget_rows: int = 65536
    fan_in: int = 64
    run_gen_mode: str = MINIRUN_MERGE
    spill_dir: str | None = None

    def __post_init__(self):
        if self.memory_budget_rows < 2:
            raise ValueError("memory budget must hold at least 2 rows")
        if self.fan_in < 2:
            raise ValueError("fan-in must be at least 2")
        if self.run_gen_mode not in (MINIRUN_MERGE, REPLACEMENT_SELECTION):
            raise ValueError(f"unknown run generation mode {self.run_gen_mode!r}")


def resolve_spill_dir(explicit: str | None = None) -> str:
    """Spill directory: explicit config, else $OVCENGINE_SPILL_DIR, else tmp."""
    return explicit or os.environ.get(SPILL_DIR_ENV) or tempfile.gettempdir()


class RunFile:
    """One spilled sorted run: prefix-truncated rows with stored codes."""

    __slots__ = ("path", "arity", "direction", "width", "row_count")

    def __init__(self, path, arity, direction, width, row_count):
        self.path = path
        self.arity = arity
        self.direction = direction
        self.width = width
        self.row_count = row_count

    @property
    def schema(self) -> KeySchema:
        return KeySchema(self.arity, self.direction)

    @classmethod
    def write(cls, path, pairs, schema: KeySchema, width: int, metrics=None) -> "RunFile":
        """Spill an iterator of (row, code) pairs; counts rows and bytes."""
        arity = schema.arity
        direction = 1 if schema.descending else 0
        buf = array("I")
        count = 0
        try:
            with open(path, "wb") as fh:
                fh.write(_HEADER.pack(_MAGIC, 1, arity, direction, width, 0))
                for row, code in pairs:
                    off = arity - ((code >> OFFSET_SHIFT) & OFFSET_MASK)
                    buf.append(code & VALUE_MASK)
                    buf.append(code >> OFFSET_SHIFT)
                    buf.extend(row[off:])
                    count += 1
                    if len(buf) >= 262144:
                        if _SWAP:
                            buf.byteswap()
                        buf.tofile(fh)
                        del buf[:]
                if buf:
                    if _SWAP:
                        buf.byteswap()
                    buf.tofile(fh)
                bytes_written = fh.tell() - _HEADER.size
                fh.seek(0)
                fh.write(_HEADER.pack(_MAGIC, 1, arity, direction, width, count))
        except OSError as exc:
            raise SpillIo(f"cannot write run file {path}: {exc}") from exc
        if metrics is not None:
            metrics.rows_spilled += count
            metrics.bytes_spilled += bytes_written
        return cls(path, arity, direction, width, count)

    @classmethod
    def open(cls, path) -> "RunFile":
        try:
            with open(path, "rb") as fh:
                magic, version, arity, direction, width, count = _HEADER.unpack(
                    fh.read(_HEADER.size)
                )
        except (OSError, struct.error) as exc:
            raise SpillIo(f"cannot read run file {path}: {exc}") from exc
        if magic != _MAGIC or version != 1:
            raise SpillIo(f"{path} is not a version-1 run file")
        return cls(path, arity, direction, width, count)

    def cursor(self):
        """Yield (row, code) pairs, reconstructing truncated prefixes."""
        arity = self.arity
        width = self.width
        try:
            with open(self.path, "rb") as fh:
                fh.seek(_HEADER.size)
                buf = array("I")
                buf.frombytes(fh.read())
        except OSError as exc:
            raise SpillIo(f"cannot read run file {self.path}: {exc}") from exc
        if _SWAP:
            buf.byteswap()
        i = 0
        prev = ()
        end = len(buf)
        for _ in range(self.row_count):
            if i + 2 > end:
                raise SpillIo(f"truncated run file {self.path}")
            code = buf[i] | (buf[i + 1] << OFFSET_SHIFT)
            off = arity - ((code >> OFFSET_SHIFT) & OFFSET_MASK)
            stop = i + 2 + width - off
            row = prev[:off] + tuple(buf[i + 2 : stop])
            i = stop
            prev = row
            yield row, code

    def delete(self) -> None:
        try:
            os.remove(self.path)
        except OSError:
            pass


def _row_blocks(rows, budget):
    it = iter(rows)
    while True:
        block = list(itertools.islice(it, budget))
        if not block:
            return
        yield block


def _row_width(block, schema) -> int:
    width = len(block[0])
    if width < schema.arity:
        raise ValueError(f"rows have {width} columns, key needs {schema.arity}")
    return width


def generate_runs(rows, schema: KeySchema, cfg: SortConfig, metrics=None) -> list[RunFile]:
    """Turn an unsorted row stream into sorted coded runs on disk."""
    if schema.direction != ASCENDING:
        raise ValueError("external sort operates on ascending codes only")
    prefix = _spill_prefix(resolve_spill_dir(cfg.spill_dir), "run")
    if cfg.run_gen_mode == MINIRUN_MERGE:
        runs = []
        for block in _row_blocks(rows, cfg.memory_budget_rows):
            width = _row_width(block, schema)
            tree = tree_from_rows(block, schema, metrics)
            path = f"{prefix}-{len(runs)}.run"
            runs.append(RunFile.write(path, iter(tree), schema, width, metrics))
        return runs
    return _replacement_selection_runs(rows, schema, cfg, metrics, prefix)


def _replacement_selection_runs(rows, schema, cfg, metrics, prefix):
    """Single persistent tree; out-of-order keys wait in the next run.

    Each replacement is coded relative to the winner it replaces (the one
    additional row comparison per input row); keys that regressed behind the
    winner carry the next-run sentinel and sort after every current-run key.
    """
    it = iter(rows)
    seed_rows = list(itertools.islice(it, cfg.memory_budget_rows))
    if not seed_rows:
        return []
    width = _row_width(seed_rows, schema)
    arity = schema.arity

    def successor(winner_row):
        row = next(it, None)
        if row is None:
            return None
        off = 0
        while off < arity and winner_row[off] == row[off]:
            off += 1
        if metrics is not None:
            metrics.row_comparisons += 1
            metrics.column_comparisons += min(off + 1, arity)
        if off == arity:
            return row, VALID
        if row[off] > winner_row[off]:
            return row, VALID | ((arity - off) << OFFSET_SHIFT) | row[off]
        # key regressed: assign to the next run with a fresh first-row code
        return row, NEXT_RUN | (arity << OFFSET_SHIFT) | row[0]

    seed = [(row, encode_first(row, schema)) for row in seed_rows]
    tree = LoserTree((), schema, metrics, _seed_items=seed, _successor_fn=successor)

    runs = []
    pending = True
    while pending:
        path = f"{prefix}-{len(runs)}.run"

        def run_pairs():
            nonlocal pending
            while True:
                code = tree.root_code
                if code >> SENTINEL_SHIFT != 1:
                    if code >> SENTINEL_SHIFT == 2:
                        tree.flip_next_run()
                    else:
                        pending = False
                    return
                yield tree.pop()

        run = RunFile.write(path, run_pairs(), schema, width, metrics)
        if run.row_count:
            runs.append(run)
        else:
            run.delete()
    return runs


def merge_schedule(run_count: int, fan_in: int) -> tuple[list[int], int]:
    """Planner arithmetic: sizes of intermediate merges, then the final fan-in.

    While more runs remain than the fan-in allows, the lowest-numbered fan_in
    runs merge into a new run appended at the end of the list.
    """
    sizes = []
    n = run_count
    while n > fan_in:
        sizes.append(fan_in)
        n = n - fan_in + 1
    return sizes, n


def merge_runs(
    runs,
    schema: KeySchema,
    cfg: SortConfig,
    metrics=None,
    *,
    consume_inputs: bool = False,
) -> CodedStream:
    """Merge spilled runs into one coded stream, spilling intermediate levels.

    While more runs remain than the fan-in, the lowest-numbered fan_in runs
    merge into a new run appended at the end; the final merge streams without
    materializing.  Intermediate runs are temporary and always cleaned up;
    the caller's run files are deleted only with consume_inputs set (the sort
    does this for its own spill files).
    """
    runs = list(runs)
    if not runs:
        return CodedStream(schema, iter(()))
    prefix = _spill_prefix(resolve_spill_dir(cfg.spill_dir), "merge")
    owned = set()  # intermediate runs created here are always deleted
    level = 0
    while len(runs) > cfg.fan_in:
        head, runs = runs[: cfg.fan_in], runs[cfg.fan_in :]
        tree = LoserTree([r.cursor() for r in head], schema, metrics)
        path = f"{prefix}-{level}.run"
        merged = RunFile.write(path, iter(tree), schema, head[0].width, metrics)
        for r in head:
            if consume_inputs or r.path in owned:
                r.delete()
        owned.add(merged.path)
        runs.append(merged)
        level += 1

    final = runs

    def stream():
        tree = LoserTree([r.cursor() for r in final], schema, metrics)
        try:
            while True:
                item = tree.pop()
                if item is None:
                    return
                yield item
        finally:
            for r in final:
                if consume_inputs or r.path in owned:
                    r.delete()

    return CodedStream(schema, stream())


def sort(rows, schema: KeySchema, cfg: SortConfig | None = None, metrics=None) -> CodedStream:
    """External merge sort of an unsorted row stream into a coded stream."""
    cfg = cfg or SortConfig()
    runs = generate_runs(rows, schema, cfg, metrics)
    return merge_runs(runs, schema, cfg, metrics, consume_inputs=True)

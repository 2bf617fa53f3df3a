"""Deliberately simple hash aggregation and hash join with spill accounting.

Both operators hold at most a budgeted number of rows in memory and push the
overflow to partition files, recursing on each partition.  Row and byte spill
counts make the memory pressure comparable with the sort-based plans; the
temp-file conventions (spill directory resolution, plain row layout) are
shared with the external sort.  Collisions of the 64-bit key hash are
resolved by full key comparison, charged to the column-comparison counter.
"""

from __future__ import annotations

import os
from array import array
from dataclasses import dataclass

from .extsort import SpillIo, _spill_prefix, resolve_spill_dir

_M64 = (1 << 64) - 1


@dataclass
class HashOpConfig:
    memory_budget_rows: int = 65536
    partitions: int = 16
    spill_dir: str | None = None
    seed: int = 0x9E3779B97F4A7C15
    max_recursion: int = 8

    def __post_init__(self):
        if self.memory_budget_rows < 1:
            raise ValueError("memory budget must hold at least 1 row")
        if self.partitions < 2:
            raise ValueError("need at least 2 spill partitions")


def mix64(x: int) -> int:
    """splitmix64 finalizer: a fixed, well-mixed 64-bit permutation."""
    x &= _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def key_hash(row, j: int, seed: int) -> int:
    h = seed
    for c in row[:j]:
        h = mix64(h ^ c)
    return h


class _PartitionWriter:
    """Fixed-width row spill files, one per partition."""

    def __init__(self, prefix, parts, width, metrics):
        self.paths = [f"{prefix}-p{i}.rows" for i in range(parts)]
        self.width = width
        self.metrics = metrics
        self.bufs = [array("I") for _ in range(parts)]
        self.files = []
        try:
            self.files = [open(p, "wb") for p in self.paths]
        except OSError as exc:
            raise SpillIo(f"cannot open spill partition: {exc}") from exc

    def put(self, part, row):
        buf = self.bufs[part]
        buf.extend(row)
        if self.metrics is not None:
            self.metrics.rows_spilled += 1
            self.metrics.bytes_spilled += 4 * self.width
        if len(buf) >= 65536:
            buf.tofile(self.files[part])
            del buf[:]

    def finish(self):
        for buf, fh in zip(self.bufs, self.files):
            if buf:
                buf.tofile(fh)
            fh.close()
        return self.paths

    def abort(self):
        for fh in self.files:
            fh.close()
        for p in self.paths:
            try:
                os.remove(p)
            except OSError:
                pass


def _read_spilled(path, width):
    buf = array("I")
    try:
        with open(path, "rb") as fh:
            buf.frombytes(fh.read())
    except OSError as exc:
        raise SpillIo(f"cannot read spill partition {path}: {exc}") from exc
    finally:
        try:
            os.remove(path)
        except OSError:
            pass
    for i in range(0, len(buf), width):
        yield tuple(buf[i : i + width])


def _probe_bucket(bucket, key, j, metrics):
    """Find `key` in a hash bucket's entries by honest column comparison."""
    for entry in bucket:
        ek = entry[0]
        if ek == key:
            if metrics is not None:
                metrics.column_comparisons += j
            return entry
        if metrics is not None:
            i = 0
            while ek[i] == key[i]:
                i += 1
            metrics.column_comparisons += i + 1
    return None


def hash_aggregate(rows, g: int, aggs, cfg: HashOpConfig, metrics=None, *, _depth=0):
    """Group rows on their first `g` columns; unordered output.

    The in-memory table holds up to the budget in distinct keys; rows of
    unseen keys beyond that spill into hash partitions processed recursively.
    Past the recursion cap a partition falls back to sorted aggregation.
    """
    specs = list(aggs)
    rows = iter(rows)
    table: dict[int, list] = {}
    held = 0
    writer = None
    width = None
    prefix = _spill_prefix(resolve_spill_dir(cfg.spill_dir), f"hagg{_depth}")

    def new_accs(row):
        return [1 if kind == "count" else row[col] for kind, col in specs]

    def update(accs, row):
        for i, (kind, col) in enumerate(specs):
            if kind == "count":
                accs[i] += 1
            elif kind == "sum":
                accs[i] += row[col]
            elif kind == "min":
                if row[col] < accs[i]:
                    accs[i] = row[col]
            elif row[col] > accs[i]:
                accs[i] = row[col]
        for i, (kind, _) in enumerate(specs):
            if kind in ("count", "sum") and accs[i] > 0xFFFFFFFF:
                accs[i] = 0xFFFFFFFF

    try:
        for row in rows:
            if width is None:
                width = len(row)
            key = row[:g]
            h = key_hash(row, g, cfg.seed)
            bucket = table.get(h)
            if bucket is None:
                if held < cfg.memory_budget_rows:
                    table[h] = [(key, new_accs(row))]
                    held += 1
                else:
                    if writer is None:
                        writer = _PartitionWriter(prefix, cfg.partitions, width, metrics)
                    writer.put(h % cfg.partitions, row)
                continue
            entry = _probe_bucket(bucket, key, g, metrics)
            if entry is not None:
                update(entry[1], row)
            elif held < cfg.memory_budget_rows:
                bucket.append((key, new_accs(row)))
                held += 1
            else:
                if writer is None:
                    writer = _PartitionWriter(prefix, cfg.partitions, width, metrics)
                writer.put(h % cfg.partitions, row)
    except BaseException:
        if writer is not None:
            writer.abort()
        raise

    for bucket in table.values():
        for key, accs in bucket:
            yield key + tuple(accs)

    if writer is not None:
        paths = writer.finish()
        for path in paths:
            spilled = _read_spilled(path, width)
            if _depth >= cfg.max_recursion:
                yield from _sorted_aggregate(spilled, g, specs)
            else:
                yield from hash_aggregate(spilled, g, specs, cfg, metrics, _depth=_depth + 1)


def _sorted_aggregate(rows, g, specs):
    """Fallback for pathological partitions: sort, then one linear pass."""
    data = sorted(rows, key=lambda r: r[:g])
    key = None
    accs = None
    for row in data:
        if row[:g] != key:
            if key is not None:
                yield key + tuple(accs)
            key = row[:g]
            accs = [1 if kind == "count" else row[col] for kind, col in specs]
        else:
            for i, (kind, col) in enumerate(specs):
                if kind == "count":
                    accs[i] += 1
                elif kind == "sum":
                    accs[i] = min(accs[i] + row[col], 0xFFFFFFFF)
                elif kind == "min":
                    accs[i] = min(accs[i], row[col])
                else:
                    accs[i] = max(accs[i], row[col])
    if key is not None:
        yield key + tuple(accs)


def hash_join(build, probe, j: int, cfg: HashOpConfig, metrics=None, *, _depth=0):
    """Inner join on the leading j columns; unordered output.

    Emits probe row + build row columns past the key.  A build side larger
    than the budget triggers grace partitioning of both inputs; a probe side
    never spills while the build side fits.
    """
    build = iter(build)
    table: dict[int, list] = {}
    held = 0
    overflow = False
    build_width = None
    prefix = _spill_prefix(resolve_spill_dir(cfg.spill_dir), f"hjoin{_depth}")
    bwriter = None

    try:
        for row in build:
            if build_width is None:
                build_width = len(row)
            if not overflow and held >= cfg.memory_budget_rows:
                # grace mode: everything held so far and the rest goes to disk
                overflow = True
                bwriter = _PartitionWriter(prefix + "-b", cfg.partitions, build_width, metrics)
                for h, bucket in table.items():
                    for _, brow in bucket:
                        bwriter.put(h % cfg.partitions, brow)
                table.clear()
                held = 0
            if overflow:
                bwriter.put(key_hash(row, j, cfg.seed) % cfg.partitions, row)
            else:
                h = key_hash(row, j, cfg.seed)
                table.setdefault(h, []).append((row[:j], row))
                held += 1
    except BaseException:
        if bwriter is not None:
            bwriter.abort()
        raise

    if not overflow:
        for prow in probe:
            h = key_hash(prow, j, cfg.seed)
            bucket = table.get(h)
            if bucket is None:
                continue
            pkey = prow[:j]
            for bkey, brow in bucket:
                if bkey == pkey:
                    if metrics is not None:
                        metrics.column_comparisons += j
                    yield prow + brow[j:]
                elif metrics is not None:
                    i = 0
                    while bkey[i] == pkey[i]:
                        i += 1
                    metrics.column_comparisons += i + 1
        return

    bpaths = bwriter.finish()
    pwriter = None
    probe_width = None
    try:
        for prow in probe:
            if probe_width is None:
                probe_width = len(prow)
                pwriter = _PartitionWriter(prefix + "-p", cfg.partitions, probe_width, metrics)
            pwriter.put(key_hash(prow, j, cfg.seed) % cfg.partitions, prow)
    except BaseException:
        if pwriter is not None:
            pwriter.abort()
        raise
    ppaths = pwriter.finish() if pwriter is not None else None

    for part in range(cfg.partitions):
        bpart = _read_spilled(bpaths[part], build_width)
        if ppaths is None:
            for _ in bpart:
                pass
            continue
        ppart = _read_spilled(ppaths[part], probe_width)
        if _depth >= cfg.max_recursion:
            yield from _sorted_join(bpart, ppart, j, metrics)
        else:
            yield from hash_join(bpart, ppart, j, cfg, metrics, _depth=_depth + 1)


def _sorted_join(build, probe, j, metrics):
    """Fallback for pathological partitions: in-memory sorted merge join."""
    brows = sorted(build, key=lambda r: r[:j])
    prows = sorted(probe, key=lambda r: r[:j])
    bi = 0
    for prow in prows:
        pkey = prow[:j]
        while bi < len(brows) and brows[bi][:j] < pkey:
            bi += 1
        k = bi
        while k < len(brows) and brows[k][:j] == pkey:
            if metrics is not None:
                metrics.column_comparisons += j
            yield prow + brows[k][j:]
            k += 1

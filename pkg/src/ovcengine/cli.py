"""Benchmark and verification harness.

Subcommands: gen, sort, bench-group, query-intersect, verify.  Every command
prints a JSON report to stdout (optionally flattened to CSV via --csv) and is
deterministic for a fixed --seed except for wall-clock fields.

Exit codes: 0 ok, 1 verification failure, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

from . import extsort, operators, scan
from .core import KeySchema, boundary_threshold
from .hashbase import HashOpConfig, hash_aggregate, hash_join, mix64
from .metrics import MetricsCtx
from .oracle import recompute_codes
from .streams import CodedStream, from_sorted_rows

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class DataError(Exception):
    """Bad input data or incompatible inputs: exit code 3."""


def checksum_rows(rows) -> int:
    """Order-insensitive 64-bit checksum of a row multiset."""
    total = 0
    for row in rows:
        h = 0x9E3779B97F4A7C15
        for c in row:
            h = mix64(h ^ c)
        total = (total + h) & 0xFFFFFFFFFFFFFFFF
    return total


def _flatten(report, prefix=""):
    flat = {}
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _emit(report, csv_path=None):
    print(json.dumps(report, indent=2))
    if csv_path:
        flat = _flatten(report)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(flat.keys())
            writer.writerow(flat.values())


def _load_table(path):
    """Read a plain or RLE table file; returns (rows, arity, coded_or_none)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == scan._RLE_MAGIC:
        table = scan.RleTable.from_file(path)
        return table, table.arity, True
    if magic == scan._PLAIN_MAGIC:
        rows, arity = scan.read_rows(path)
        return rows, arity, False
    raise DataError(f"{path}: unknown table format")


def _coded_stream_from_file(path, metrics=None, *, require_sorted=True):
    """Open a table file as a sorted coded stream.

    RLE tables scan with free codes; plain files must already be sorted and
    are coded by consecutive derivation (charged to `metrics`).
    """
    table, arity, is_rle = _load_table(path)
    if is_rle:
        return scan.scan_with_codes(table, metrics), arity
    rows = scan.rows_as_tuples(table)
    schema = KeySchema(arity)
    if require_sorted:
        for i in range(1, len(rows)):
            if rows[i][:arity] < rows[i - 1][:arity]:
                raise DataError(f"{path}: rows are not sorted on the key")
    return from_sorted_rows(rows, schema, metrics), arity


def cmd_gen(args) -> int:
    if args.distinct_per_col:
        distinct = tuple(int(x) for x in args.distinct_per_col.split(","))
        spec = scan.GenSpec(args.rows, args.key_cols, distinct_per_col=distinct,
                            payload_cols=args.payload_cols, seed=args.seed)
    else:
        spec = scan.GenSpec(args.rows, args.key_cols, ratio=args.ratio,
                            payload_cols=args.payload_cols, seed=args.seed)
    sorted_out = args.sorted or args.format == "rle"
    table = scan.generate(spec, sort=sorted_out)
    if args.format == "rle":
        scan.RleTable.from_rows(table, args.key_cols).to_file(args.out)
    else:
        scan.write_rows(args.out, table, args.key_cols)
    _emit(
        {
            "experiment": "gen",
            "parameters": {
                "rows": args.rows,
                "key_cols": args.key_cols,
                "payload_cols": args.payload_cols,
                "ratio": args.ratio,
                "seed": args.seed,
                "format": args.format,
                "sorted": sorted_out,
                "out": args.out,
            },
            "rows_out": int(table.shape[0]),
        },
        args.csv,
    )
    return EXIT_OK


def cmd_sort(args) -> int:
    table, arity, is_rle = _load_table(args.infile)
    rows = scan.rows_as_tuples(table.to_rows() if is_rle else table)
    schema = KeySchema(arity)
    cfg = extsort.SortConfig(
        memory_budget_rows=args.budget, fan_in=args.fan_in, run_gen_mode=args.run_mode,
        spill_dir=args.spill_dir,
    )
    metrics = MetricsCtx()
    t0 = time.perf_counter()
    stream = extsort.sort(iter(rows), schema, cfg, metrics)
    if args.out:
        run = extsort.RunFile.write(args.out, iter(stream), schema,
                                    len(rows[0]) if rows else arity, None)
        out_rows = run.row_count
        checksum = checksum_rows(r for r, _ in extsort.RunFile.open(args.out).cursor())
    else:
        out = [row for row, _ in stream]
        out_rows = len(out)
        checksum = checksum_rows(out)
    wall = time.perf_counter() - t0
    _emit(
        {
            "experiment": "sort",
            "parameters": {
                "in": args.infile,
                "rows": len(rows),
                "arity": arity,
                "budget": args.budget,
                "fan_in": args.fan_in,
                "run_mode": args.run_mode,
            },
            "metrics": metrics.as_dict(),
            "wall_clock_s": {"sort": wall},
            "rows_out": out_rows,
            "result_checksum": checksum,
        },
        args.csv,
    )
    return EXIT_OK


def cmd_bench_group(args) -> int:
    setup_metrics = MetricsCtx()
    stream, arity = _coded_stream_from_file(args.infile, setup_metrics)
    if not 1 <= args.group_cols <= arity:
        raise DataError(f"--g {args.group_cols} outside [1, {arity}]")
    pairs = list(stream)
    rows = [p[0] for p in pairs]
    codes = [p[1] for p in pairs]
    schema = KeySchema(arity)
    g = args.group_cols
    metrics = MetricsCtx()

    t0 = time.perf_counter()
    if args.mode == "ovc":
        threshold = boundary_threshold(g, schema)
        groups = 0
        for code in codes:
            if code >= threshold:
                groups += 1
        metrics.code_decisions += len(codes)
    else:
        groups = 0
        comparisons = 0
        prev = None
        for row in rows:
            if prev is None:
                groups += 1
            else:
                i = 0
                while i < g and row[i] == prev[i]:
                    i += 1
                comparisons += i + 1 if i < g else g
                if i < g:
                    groups += 1
            prev = row
        metrics.column_comparisons += comparisons
        metrics.row_comparisons += max(len(rows) - 1, 0)
    wall = time.perf_counter() - t0

    _emit(
        {
            "experiment": "bench-group",
            "parameters": {"in": args.infile, "rows": len(rows), "g": g, "mode": args.mode},
            "metrics": metrics.as_dict(),
            "setup_metrics": setup_metrics.as_dict(),
            "wall_clock_s": {"aggregate": wall},
            "rows_out": groups,
            "result_checksum": groups,
        },
        args.csv,
    )
    return EXIT_OK


def _sort_engine_intersect(rows1, rows2, arity, budget, fan_in, spill_dir, metrics):
    schema = KeySchema(arity)
    cfg = extsort.SortConfig(memory_budget_rows=budget, fan_in=fan_in, spill_dir=spill_dir)
    sorted1 = extsort.sort(iter(rows1), schema, cfg, metrics)
    sorted2 = extsort.sort(iter(rows2), schema, cfg, metrics)
    out = operators.intersect_distinct(sorted1, sorted2, metrics)
    return (row for row, _ in out)


def _hash_engine_intersect(rows1, rows2, arity, budget, partitions, spill_dir, metrics):
    cfg = HashOpConfig(memory_budget_rows=budget, partitions=partitions, spill_dir=spill_dir)
    distinct1 = hash_aggregate(iter(rows1), arity, [], cfg, metrics)
    distinct2 = hash_aggregate(iter(rows2), arity, [], cfg, metrics)
    return hash_join(distinct1, distinct2, arity, cfg, metrics)


def cmd_query_intersect(args) -> int:
    t1, arity1, rle1 = _load_table(args.t1)
    t2, arity2, rle2 = _load_table(args.t2)
    if arity1 != arity2:
        raise DataError(f"key arity mismatch: {arity1} vs {arity2}")
    rows1 = scan.rows_as_tuples((t1.to_rows() if rle1 else t1)[:, :arity1])
    rows2 = scan.rows_as_tuples((t2.to_rows() if rle2 else t2)[:, :arity2])

    report = {
        "experiment": "query-intersect",
        "parameters": {
            "t1": args.t1,
            "t2": args.t2,
            "rows": [len(rows1), len(rows2)],
            "arity": arity1,
            "budget": args.budget,
            "engine": args.engine,
        },
        "engines": {},
        "wall_clock_s": {},
    }
    engines = ("sort", "hash") if args.engine == "both" else (args.engine,)
    checksums = {}
    for engine in engines:
        metrics = MetricsCtx()
        t0 = time.perf_counter()
        if engine == "sort":
            result = _sort_engine_intersect(
                rows1, rows2, arity1, args.budget, args.fan_in, args.spill_dir, metrics
            )
        else:
            result = _hash_engine_intersect(
                rows1, rows2, arity1, args.budget, args.partitions, args.spill_dir, metrics
            )
        count = 0
        checksum = 0
        m64 = 0xFFFFFFFFFFFFFFFF
        for row in result:
            count += 1
            h = 0x9E3779B97F4A7C15
            for c in row:
                h = mix64(h ^ c)
            checksum = (checksum + h) & m64
        wall = time.perf_counter() - t0
        checksums[engine] = checksum
        report["engines"][engine] = {
            "metrics": metrics.as_dict(),
            "rows_out": count,
            "result_checksum": checksum,
        }
        report["wall_clock_s"][engine] = wall
    if len(checksums) == 2:
        report["checksums_equal"] = checksums["sort"] == checksums["hash"]
    _emit(report, args.csv)
    return EXIT_OK


_VERIFY_STEPS = ("scan", "sort", "filter", "project", "segment", "dedup",
                 "group", "merge-join", "intersect", "exchange")


def _run_verify_plan(args):
    """Build and run the named pipeline; returns (pairs, schema)."""
    metrics = MetricsCtx()
    steps = [s.strip() for s in args.plan.split(",") if s.strip()]
    for s in steps:
        if s not in _VERIFY_STEPS:
            raise DataError(f"unknown plan step {s!r}")
    if not steps:
        raise DataError("empty plan")

    first, rest = steps[0], steps[1:]
    table, arity, is_rle = _load_table(args.infile)
    schema = KeySchema(arity)
    if first == "scan":
        if not is_rle:
            stream, arity = _coded_stream_from_file(args.infile, metrics)
            schema = KeySchema(arity)
        else:
            stream = scan.scan_with_codes(table, metrics)
    elif first == "sort":
        rows = scan.rows_as_tuples(table.to_rows() if is_rle else table)
        cfg = extsort.SortConfig(memory_budget_rows=args.budget, fan_in=args.fan_in,
                                 spill_dir=args.spill_dir)
        stream = extsort.sort(iter(rows), schema, cfg, metrics)
    else:
        raise DataError("plans start with scan or sort")

    for step in rest:
        if step == "filter":
            col, mod = args.filter_col, args.filter_mod
            stream = operators.filter(stream, lambda r: r[col] % mod != 0, metrics)
        elif step == "project":
            keep = tuple(int(x) for x in args.keep.split(","))
            stream = operators.project(stream, keep, metrics)
        elif step == "segment":
            # concatenated segments form one valid stream at the capped arity
            segs = operators.segment(stream, args.seg_len)

            def chained(segs=segs):
                for seg in segs:
                    yield from seg

            stream = CodedStream(KeySchema(args.seg_len), chained())
        elif step == "dedup":
            stream = operators.dedup(stream, metrics)
        elif step == "group":
            stream = operators.group_aggregate(stream, args.group_cols, [("count", None)], metrics)
        elif step == "merge-join":
            if not args.in2:
                raise DataError("merge-join needs --in2")
            right, _ = _coded_stream_from_file(args.in2, metrics)
            j = min(args.join_cols or stream.schema.arity, stream.schema.arity,
                    right.schema.arity)
            stream = operators.merge_join(stream, right, j, args.join_kind, metrics)
        elif step == "intersect":
            if not args.in2:
                raise DataError("intersect needs --in2")
            right, _ = _coded_stream_from_file(args.in2, metrics)
            stream = operators.intersect_distinct(stream, right, metrics)
        elif step == "exchange":
            parts = operators.exchange_split(
                stream, args.partitions, lambda r: mix64(r[0]) % args.partitions, metrics
            )
            stream = operators.exchange_merge(parts, metrics)
    return list(stream), stream.schema, metrics


def cmd_verify(args) -> int:
    pairs, schema, metrics = _run_verify_plan(args)
    if args.corrupt_index is not None and pairs:
        i = args.corrupt_index % len(pairs)
        row, code = pairs[i]
        pairs[i] = (row, code ^ 1)
    violations = recompute_codes(pairs, schema)
    report = {
        "experiment": "verify",
        "parameters": {"in": args.infile, "plan": args.plan},
        "metrics": metrics.as_dict(),
        "rows_out": len(pairs),
        "violations": len(violations),
    }
    _emit(report, args.csv)
    for v in violations[:20]:
        print(f"violation at row {v.index}: kind={v.kind} expected={v.expected} found={v.found}",
              file=sys.stderr)
    return EXIT_VERIFY if violations else EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovcengine",
        description="Sort-based query execution with coded streams: data "
                    "generation, sorting, and benchmark harness.",
    )
    parser.add_argument("--csv", help="also write the report, flattened, to this CSV path")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic table file")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--key-cols", type=int, default=4)
    p.add_argument("--payload-cols", type=int, default=0)
    p.add_argument("--ratio", type=int, default=1,
                   help="input rows per distinct key (duplication factor)")
    p.add_argument("--distinct-per-col", default=None,
                   help="comma list of per-column distinct counts (overrides --ratio)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sorted", action="store_true")
    p.add_argument("--format", choices=("plain", "rle"), default="plain")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sort", help="external-sort a table file, report counters")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None, help="write the sorted coded run here")
    p.add_argument("--budget", type=int, default=65536, help="memory budget in rows")
    p.add_argument("--fan-in", type=int, default=64)
    p.add_argument("--run-mode", choices=(extsort.MINIRUN_MERGE, extsort.REPLACEMENT_SELECTION),
                   default=extsort.MINIRUN_MERGE)
    p.add_argument("--spill-dir", default=None)
    p.set_defaults(func=cmd_sort)

    p = sub.add_parser("bench-group", help="in-stream aggregation benchmark")
    p.add_argument("--in", dest="infile", required=True, help="sorted plain or rle table")
    p.add_argument("--g", dest="group_cols", type=int, required=True)
    p.add_argument("--mode", choices=("ovc", "full-compare"), required=True)
    p.set_defaults(func=cmd_bench_group)

    p = sub.add_parser("query-intersect", help="intersect-distinct of two tables")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2", required=True)
    p.add_argument("--engine", choices=("sort", "hash", "both"), default="both")
    p.add_argument("--budget", type=int, default=65536, help="per-operator memory in rows")
    p.add_argument("--fan-in", type=int, default=64)
    p.add_argument("--partitions", type=int, default=16)
    p.add_argument("--spill-dir", default=None)
    p.set_defaults(func=cmd_query_intersect)

    p = sub.add_parser("verify", help="run a pipeline and validate its codes")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--in2", default=None, help="second input for join steps")
    p.add_argument("--plan", required=True,
                   help="comma list of steps, e.g. 'sort,filter,group' "
                        f"(steps: {', '.join(_VERIFY_STEPS)})")
    p.add_argument("--budget", type=int, default=65536)
    p.add_argument("--fan-in", type=int, default=64)
    p.add_argument("--spill-dir", default=None)
    p.add_argument("--filter-col", type=int, default=0)
    p.add_argument("--filter-mod", type=int, default=2)
    p.add_argument("--keep", default="0")
    p.add_argument("--seg-len", type=int, default=1)
    p.add_argument("--g", dest="group_cols", type=int, default=1)
    p.add_argument("--join-cols", type=int, default=None)
    p.add_argument("--join-kind", choices=operators.JOIN_KINDS, default="inner")
    p.add_argument("--partitions", type=int, default=4)
    p.add_argument("--corrupt-index", type=int, default=None,
                   help="test hook: flip one output code before verification")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (scan.FormatError, extsort.SpillIo, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

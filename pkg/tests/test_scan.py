import numpy as np
import pytest

from ovcengine.core import KeySchema, code_offset, code_value, is_duplicate
from ovcengine.metrics import MetricsCtx
from ovcengine.oracle import recompute_codes
from ovcengine.scan import FormatError, GenSpec, RleTable, generate, read_rows, rows_as_tuples, scan_with_codes, write_rows

from helpers import TABLE1, TABLE1_OFFSETS, SCHEMA4


def test_rle_scan_emits_table1_codes():
    table = RleTable.from_rows(np.array(TABLE1, dtype=np.uint32), 4)
    m = MetricsCtx()
    pairs = list(scan_with_codes(table, m))
    assert [r for r, _ in pairs] == TABLE1
    for (_, code), (off, val) in zip(pairs, TABLE1_OFFSETS):
        assert code_offset(code, SCHEMA4) == off
        if val is not None:
            assert code_value(code, SCHEMA4) == val
    assert m.column_comparisons == 0
    assert recompute_codes(pairs, SCHEMA4) == []


def test_single_run_table():
    rows = np.array([[7, 7]] * 5, dtype=np.uint32)
    table = RleTable.from_rows(rows, 2)
    pairs = list(scan_with_codes(table))
    schema = KeySchema(2)
    assert code_offset(pairs[0][1], schema) == 0
    assert all(is_duplicate(c, schema) for _, c in pairs[1:])


def test_random_sorted_roundtrip_and_codes():
    for seed in range(8):
        spec = GenSpec(400, 3, ratio=4, payload_cols=1, seed=seed)
        table_rows = generate(spec, sort=True)
        rle = RleTable.from_rows(table_rows, 3)
        assert (rle.to_rows() == table_rows).all()
        pairs = list(scan_with_codes(rle))
        assert recompute_codes(pairs, KeySchema(3)) == []
        assert [r for r, _ in pairs] == rows_as_tuples(table_rows)


def test_rle_rejects_unsorted():
    rows = np.array([[2, 1], [1, 5]], dtype=np.uint32)
    with pytest.raises(FormatError):
        RleTable.from_rows(rows, 2)


def test_nested_run_boundaries_split_lower_columns():
    # value 5 repeats across the column-0 boundary: its run must still split
    rows = np.array([[1, 5], [2, 5]], dtype=np.uint32)
    table = RleTable.from_rows(rows, 2)
    values, lengths = table.key_runs[1]
    assert list(values) == [5, 5] and list(lengths) == [1, 1]
    pairs = list(scan_with_codes(table))
    assert code_offset(pairs[1][1], KeySchema(2)) == 0


def test_rle_file_roundtrip_bit_exact(tmp_path):
    for seed in range(5):
        spec = GenSpec(200, 2, ratio=8, payload_cols=2, seed=seed)
        rle = RleTable.from_rows(generate(spec, sort=True), 2)
        p1, p2 = tmp_path / f"a{seed}.rle", tmp_path / f"b{seed}.rle"
        rle.to_file(p1)
        RleTable.from_file(p1).to_file(p2)
        assert p1.read_bytes() == p2.read_bytes()


def test_plain_file_roundtrip(tmp_path):
    table = generate(GenSpec(100, 2, ratio=1, payload_cols=1, seed=5))
    path = tmp_path / "t.rows"
    write_rows(path, table, 2)
    back, arity = read_rows(path)
    assert arity == 2
    assert (back == table).all()


def test_generator_determinism_and_ratio():
    spec = GenSpec(1000, 4, ratio=10, seed=77)
    a, b = generate(spec), generate(spec)
    assert (a == b).all()
    srt = generate(spec, sort=True)
    distinct = len(np.unique(srt, axis=0))
    assert abs(distinct - 100) <= 1
    all_distinct = generate(GenSpec(500, 4, ratio=1, seed=1), sort=True)
    assert len(np.unique(all_distinct, axis=0)) == 500


def test_generator_distinct_per_col_mode():
    spec = GenSpec(300, 2, distinct_per_col=(3, 5), seed=9)
    t = generate(spec)
    assert t[:, 0].max() < 3 and t[:, 1].max() < 5


def test_generator_empty():
    assert generate(GenSpec(0, 3, ratio=1, seed=0)).shape == (0, 3)


def test_bad_table_files(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOPE" + b"\x00" * 30)
    with pytest.raises(FormatError):
        read_rows(p)
    with pytest.raises(FormatError):
        RleTable.from_file(p)

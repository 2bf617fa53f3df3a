import random

import pytest

from ovcengine import core
from ovcengine.core import (
    DESCENDING,
    FenceInput,
    KeySchema,
    LATE_FENCE,
    VALID,
    boundary_threshold,
    code_offset,
    code_value,
    compare_form_codeword,
    derive_code,
    duplicate_code,
    encode_first,
    is_boundary,
    is_duplicate,
    make_code,
    max_combine,
    truncate_to_prefix,
)
from ovcengine.metrics import MetricsCtx

from helpers import TABLE1, TABLE1_OFFSETS, SCHEMA4

DESC4 = KeySchema(4, DESCENDING)
M32 = 0xFFFFFFFF


def chain_codes(rows, schema):
    out = []
    prev = None
    for r in rows:
        out.append(encode_first(r, schema) if prev is None else derive_code(prev, r, schema))
        prev = r
    return out


def test_table1_ascending_codes():
    codes = chain_codes(TABLE1, SCHEMA4)
    for row, code, (off, val) in zip(TABLE1, codes, TABLE1_OFFSETS):
        assert code_offset(code, SCHEMA4) == off
        if val is None:
            assert is_duplicate(code, SCHEMA4)
            assert code == VALID  # offset and value fields both zero
        else:
            assert code_value(code, SCHEMA4) == val


def test_table1_descending_codes():
    codes = chain_codes(TABLE1, DESC4)
    for code, (off, val) in zip(codes, TABLE1_OFFSETS):
        assert code_offset(code, DESC4) == off
        if val is None:
            assert is_duplicate(code, DESC4)
        else:
            assert code_value(code, DESC4) == val
            assert code & M32 == M32 - val  # complemented value field


def test_encode_first_zero_case():
    assert code_value(encode_first((0, 1, 2), KeySchema(3)), KeySchema(3)) == 0
    assert code_offset(encode_first((0, 1, 2), KeySchema(3)), KeySchema(3)) == 0


def test_compare_decision_table_cases():
    base = (3, 4, 2, 5)
    # case 1: offsets decide
    a, b = (3, 5, 8, 2), (3, 4, 6, 1)
    ca, cb = derive_code(base, a, SCHEMA4), derive_code(base, b, SCHEMA4)
    m = MetricsCtx()
    winner, loser_code = compare_form_codeword(a, ca, b, cb, SCHEMA4, (0, 1), m)
    assert winner == 1 and loser_code == ca
    assert m.column_comparisons == 0 and m.row_comparisons == 1

    # case 2: values inside the codes decide
    a, b = (3, 4, 3, 8), (3, 4, 9, 1)
    ca, cb = derive_code(base, a, SCHEMA4), derive_code(base, b, SCHEMA4)
    m = MetricsCtx()
    winner, loser_code = compare_form_codeword(a, ca, b, cb, SCHEMA4, (0, 1), m)
    assert winner == 0 and loser_code == cb
    assert m.column_comparisons == 0

    # case 3: column comparisons decide and the loser is re-coded
    a, b = (3, 7, 4, 7), (3, 7, 4, 9)
    ca, cb = derive_code(base, a, SCHEMA4), derive_code(base, b, SCHEMA4)
    assert ca == cb
    m = MetricsCtx()
    winner, loser_code = compare_form_codeword(a, ca, b, cb, SCHEMA4, (0, 1), m)
    assert winner == 0
    assert code_offset(loser_code, SCHEMA4) == 3
    assert code_value(loser_code, SCHEMA4) == 9
    assert m.column_comparisons == 2 and m.row_comparisons == 1


def test_compare_full_tie_uses_input_index():
    a = (1, 2, 3, 4)
    ca = derive_code((1, 2, 3, 3), a, SCHEMA4)
    m = MetricsCtx()
    winner, loser_code = compare_form_codeword(a, ca, a, ca, SCHEMA4, (7, 3), m)
    assert winner == 1  # lower input index wins
    assert is_duplicate(loser_code, SCHEMA4)


def test_compare_fences_decide_for_free():
    a = (1, 2, 3, 4)
    ca = encode_first(a, SCHEMA4)
    m = MetricsCtx()
    winner, loser_code = compare_form_codeword(a, ca, None, LATE_FENCE, SCHEMA4, (0, 1), m)
    assert winner == 0 and loser_code == LATE_FENCE
    assert m.row_comparisons == 0 and m.column_comparisons == 0


def test_max_combine_table1_filter_value():
    codes = chain_codes(TABLE1, SCHEMA4)
    acc = codes[1]
    for c in codes[2:]:
        acc = max_combine(acc, c, SCHEMA4)
    assert code_offset(acc, SCHEMA4) == 1 and code_value(acc, SCHEMA4) == 9

    assert max_combine(codes[2], codes[2], SCHEMA4) == codes[2]
    assert max_combine(duplicate_code(SCHEMA4), codes[5], SCHEMA4) == codes[5]
    with pytest.raises(FenceInput):
        max_combine(LATE_FENCE, codes[0], SCHEMA4)


def test_truncate_to_prefix():
    codes = chain_codes(TABLE1, SCHEMA4)
    two = KeySchema(2)
    # offset 3 beyond a 2-column prefix: collapses to the short duplicate
    assert is_duplicate(truncate_to_prefix(codes[1], 2, SCHEMA4, TABLE1[1]), two)
    # offset 1 survives: same offset and value at the shorter arity
    t = truncate_to_prefix(codes[2], 2, SCHEMA4, TABLE1[2])
    assert t == derive_code(TABLE1[1][:2], TABLE1[2][:2], two)
    # full-length prefix is the identity
    for c in codes:
        assert truncate_to_prefix(c, 4, SCHEMA4) == c


def test_is_boundary_table1_prefix2():
    codes = chain_codes(TABLE1, SCHEMA4)
    flags = [is_boundary(c, 2, SCHEMA4) for c in codes]
    assert flags == [True, False, True, True, False, False, False]
    # one unsigned comparison against the precomputed threshold
    t = boundary_threshold(2, SCHEMA4)
    assert [c >= t for c in codes] == flags
    assert not is_boundary(duplicate_code(SCHEMA4), 1, SCHEMA4)
    assert is_boundary(encode_first(TABLE1[0], SCHEMA4), 1, SCHEMA4)


def test_is_duplicate():
    codes = chain_codes(TABLE1, SCHEMA4)
    assert is_duplicate(codes[4], SCHEMA4)
    assert not is_duplicate(codes[0], SCHEMA4)
    with pytest.raises(FenceInput):
        is_duplicate(0, SCHEMA4)  # early fence


def test_strict_mode_order_violation():
    core.STRICT = True
    try:
        with pytest.raises(core.OrderViolation):
            derive_code((2, 2), (1, 5), KeySchema(2))
    finally:
        core.STRICT = False


@pytest.mark.parametrize("direction", ["ascending", "descending"])
def test_theorem_on_random_triples(direction):
    rng = random.Random(42)
    for _ in range(2000):
        arity = rng.randint(1, 8)
        schema = KeySchema(arity, direction)
        domain = rng.choice([2, 3, 16])
        rows = sorted(tuple(rng.randrange(domain) for _ in range(arity)) for _ in range(3))
        a, b, c = rows
        ab = derive_code(a, b, schema)
        bc = derive_code(b, c, schema)
        ac = derive_code(a, c, schema)
        assert max_combine(ab, bc, schema) == ac


def test_unequal_code_corollary():
    # when codes decide alone, the loser's code relative to the winner is
    # exactly what the oracle derives
    rng = random.Random(55)
    for _ in range(5000):
        arity = rng.randint(1, 6)
        schema = KeySchema(arity)
        base, a, b = sorted(tuple(rng.randrange(5) for _ in range(arity)) for _ in range(3))
        ca, cb = derive_code(base, a, schema), derive_code(base, b, schema)
        if ca == cb:
            continue
        m = MetricsCtx()
        winner, loser_code = compare_form_codeword(a, ca, b, cb, schema, (0, 1), m)
        assert m.column_comparisons == 0
        win_row, lose_row = (a, b) if winner == 0 else (b, a)
        assert loser_code == derive_code(win_row, lose_row, schema)


def test_equal_code_corollary():
    # when codes tie, the loser's re-derived offset is strictly larger
    rng = random.Random(56)
    seen = 0
    while seen < 2000:
        arity = rng.randint(2, 6)
        schema = KeySchema(arity)
        base, a, b = sorted(tuple(rng.randrange(3) for _ in range(arity)) for _ in range(3))
        ca, cb = derive_code(base, a, schema), derive_code(base, b, schema)
        if ca != cb or a == b:
            continue
        seen += 1
        winner, loser_code = compare_form_codeword(a, ca, b, cb, schema, (0, 1))
        win_row, lose_row = (a, b) if winner == 0 else (b, a)
        assert loser_code == derive_code(win_row, lose_row, schema)
        assert code_offset(loser_code, schema) > code_offset(ca, schema)


def test_proposition_no_equal_consecutive_codes():
    rng = random.Random(7)
    for _ in range(300):
        arity = rng.randint(1, 6)
        schema = KeySchema(arity)
        rows = sorted(tuple(rng.randrange(4) for _ in range(arity)) for _ in range(50))
        prev_row = None
        prev_code = None
        for r in rows:
            code = encode_first(r, schema) if prev_row is None else derive_code(prev_row, r, schema)
            if prev_code is not None and code == prev_code:
                assert is_duplicate(code, schema), (prev_row, r)
            prev_row, prev_code = r, code


def test_packed_order_agrees_with_row_order():
    rng = random.Random(13)
    for _ in range(3000):
        arity = rng.randint(1, 6)
        schema = KeySchema(arity)
        rows = sorted(tuple(rng.randrange(6) for _ in range(arity)) for _ in range(3))
        base, a, b = rows
        ca, cb = derive_code(base, a, schema), derive_code(base, b, schema)
        if ca != cb:
            assert ca < cb
            assert a < b


def test_roundtrip_derive_boundary_duplicate():
    rng = random.Random(99)
    for _ in range(100000):
        arity = rng.randint(1, 6)
        schema = KeySchema(arity)
        base = tuple(rng.randrange(4) for _ in range(arity))
        row = tuple(rng.randrange(4) for _ in range(arity))
        if row < base:
            base, row = row, base
        code = derive_code(base, row, schema)
        shared = 0
        while shared < arity and base[shared] == row[shared]:
            shared += 1
        assert code_offset(code, schema) == shared
        assert is_duplicate(code, schema) == (shared == arity)
        for plen in range(1, arity + 1):
            assert is_boundary(code, plen, schema) == (shared < plen)


def test_fences_order_around_valid_codes():
    c = encode_first((1, 2), KeySchema(2))
    assert 0 < c < LATE_FENCE  # early fence < valid < late fence
    assert core.EARLY_FENCE < core.VALID < core.NEXT_RUN < core.LATE_FENCE


def test_schema_validation():
    with pytest.raises(ValueError):
        KeySchema(0)
    with pytest.raises(ValueError):
        KeySchema(2, "sideways")
    with pytest.raises(ValueError):
        boundary_threshold(3, KeySchema(2))
    assert make_code(2, 0, KeySchema(2)) == duplicate_code(KeySchema(2))

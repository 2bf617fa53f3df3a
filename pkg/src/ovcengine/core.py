"""Offset-value code kernel: bit layout, derivation, comparison, combination.

An offset-value code (OVC) is an order-preserving 64-bit surrogate for a
key relative to a base key earlier in the sort sequence.  Layout, high bits
to low bits:

    bits 63..62  sentinel: 0 early fence, 1 valid (current run),
                 2 valid (next run), 3 late fence
    bits 61..32  offset field (ascending: arity - offset; descending: offset)
    bits 31..0   value field (ascending: the column value at the offset;
                 descending: the bitwise complement of that value)

The offset of a code is the length of the maximal shared key prefix between
the base and the coded row; the value is the coded row's column right after
that prefix.  An offset equal to the arity marks a duplicate key and has an
empty value field.

With this packing, two valid ascending codes relative to the same base
compare like the rows they stand for: whenever the codes differ, the
numerically smaller code belongs to the earlier row, and fences sort below
and above all valid codes with the same raw comparison.  Descending codes
mirror the order (the larger code is the earlier row, and chained codes
combine with min instead of max); they encode the same ascending-by-value
chains and exist for descending consumers.  Everything above the kernel
operates on ascending codes only.
"""

from __future__ import annotations

from dataclasses import dataclass

Row = tuple  # rows are tuples of unsigned 32-bit ints; key = leading `arity` columns

VALUE_MASK = 0xFFFF_FFFF
OFFSET_SHIFT = 32
OFFSET_MASK = (1 << 30) - 1
SENTINEL_SHIFT = 62
SENTINEL_MASK = 3 << SENTINEL_SHIFT

EARLY_FENCE = 0
VALID = 1 << SENTINEL_SHIFT
NEXT_RUN = 2 << SENTINEL_SHIFT
LATE_FENCE = 3 << SENTINEL_SHIFT

ASCENDING = "ascending"
DESCENDING = "descending"

MAX_ARITY = OFFSET_MASK

# Oracle mode: when True, derive_code / compare_form_codeword verify the
# caller-supplied ordering and base invariants and raise on violations.
STRICT = False


class OvcError(Exception):
    """Base error for coding and stream-contract violations."""


class OrderViolation(OvcError):
    """A row regressed behind its base in the sort order."""


class BaseMismatch(OvcError):
    """A supplied code provably disagrees with the row it describes."""


class FenceInput(OvcError):
    """A fence code reached an operation defined only for valid codes."""


@dataclass(frozen=True)
class KeySchema:
    """Sort key description: the leading `arity` columns, one code polarity."""

    arity: int
    direction: str = ASCENDING

    def __post_init__(self):
        if not 1 <= self.arity <= MAX_ARITY:
            raise ValueError(f"arity must be in [1, 2^30), got {self.arity}")
        if self.direction not in (ASCENDING, DESCENDING):
            raise ValueError(f"unknown direction {self.direction!r}")

    @property
    def descending(self) -> bool:
        return self.direction == DESCENDING


def code_sentinel(code: int) -> int:
    return code >> SENTINEL_SHIFT


def is_fence(code: int) -> bool:
    s = code >> SENTINEL_SHIFT
    return s == 0 or s == 3


def make_code(offset: int, value: int, schema: KeySchema, sentinel_bits: int = VALID) -> int:
    """Pack (offset, value) relative to `schema`; offset == arity packs a duplicate."""
    if offset >= schema.arity:
        return duplicate_code(schema, sentinel_bits)
    if schema.direction == ASCENDING:
        return sentinel_bits | ((schema.arity - offset) << OFFSET_SHIFT) | value
    return sentinel_bits | (offset << OFFSET_SHIFT) | (VALUE_MASK ^ value)


def duplicate_code(schema: KeySchema, sentinel_bits: int = VALID) -> int:
    """The code of a full duplicate: offset = arity, empty value field."""
    if schema.direction == ASCENDING:
        return sentinel_bits
    return sentinel_bits | (schema.arity << OFFSET_SHIFT)


def code_offset(code: int, schema: KeySchema) -> int:
    field = (code >> OFFSET_SHIFT) & OFFSET_MASK
    if schema.direction == ASCENDING:
        return schema.arity - field
    return field


def code_value(code: int, schema: KeySchema) -> int:
    """Column value stored in a non-duplicate valid code."""
    if schema.direction == ASCENDING:
        return code & VALUE_MASK
    return VALUE_MASK ^ (code & VALUE_MASK)


def encode_first(row: Row, schema: KeySchema) -> int:
    """Code of a stream's first row: offset 0, value = first key column."""
    if schema.direction == ASCENDING:
        return VALID | (schema.arity << OFFSET_SHIFT) | row[0]
    return VALID | (VALUE_MASK ^ row[0])


def derive_code(base: Row, row: Row, schema: KeySchema) -> int:
    """Code of `row` relative to `base`, by direct prefix comparison.

    `base` must not sort after `row`; with STRICT set this is verified and
    an OrderViolation raised otherwise.
    """
    arity = schema.arity
    off = 0
    while off < arity and base[off] == row[off]:
        off += 1
    if off == arity:
        return duplicate_code(schema)
    if STRICT and row[off] < base[off]:
        raise OrderViolation(f"row {row!r} sorts before base {base!r}")
    if schema.direction == ASCENDING:
        return VALID | ((arity - off) << OFFSET_SHIFT) | row[off]
    return VALID | (off << OFFSET_SHIFT) | (VALUE_MASK ^ row[off])


def _fence_decision(code_a: int, code_b: int, tiebreak: tuple[int, int]):
    sa = code_a >> SENTINEL_SHIFT
    sb = code_b >> SENTINEL_SHIFT
    if sa == sb:  # both early or both late fences
        winner = 0 if tiebreak[0] <= tiebreak[1] else 1
    elif sa == 0 or sb == 3:
        winner = 0
    else:
        winner = 1
    return winner, code_b if winner == 0 else code_a


def compare_form_codeword(
    row_a: Row,
    code_a: int,
    row_b: Row,
    code_b: int,
    schema: KeySchema,
    tiebreak: tuple[int, int] = (0, 1),
    metrics=None,
) -> tuple[int, int]:
    """Decide which row sorts earlier and form the loser's new code.

    Both codes must be relative to the same base key.  Returns
    (winner, loser_code) with winner 0 for A and 1 for B.  When the codes
    differ, they decide alone and the loser's code is unchanged; equal codes
    trigger column comparisons starting right after the shared offset, and
    the loser is re-coded relative to the winner.  Fences and run-assignment
    sentinels decide without any comparison being charged.
    """
    if is_fence(code_a) or is_fence(code_b):
        return _fence_decision(code_a, code_b, tiebreak)

    if (code_a ^ code_b) & SENTINEL_MASK:
        # current vs next run: run assignment decides, nothing is charged
        winner = 0 if code_a < code_b else 1
        return winner, code_b if winner == 0 else code_a

    if STRICT:
        _check_base_consistency(row_a, code_a, schema)
        _check_base_consistency(row_b, code_b, schema)

    arity = schema.arity
    if code_a != code_b:
        if metrics is not None:
            metrics.row_comparisons += 1
            metrics.code_decisions += 1
        if schema.direction == ASCENDING:
            winner = 0 if code_a < code_b else 1
        else:
            winner = 0 if code_a > code_b else 1
        return winner, code_b if winner == 0 else code_a

    # Equal codes: values at the shared offset match, compare from offset+1.
    off = code_offset(code_a, schema)
    j = off + 1
    while j < arity and row_a[j] == row_b[j]:
        j += 1
    sentinel_bits = code_a & SENTINEL_MASK
    if j < arity:
        compared = j - off
        winner = 0 if row_a[j] < row_b[j] else 1
        loser_row = row_b if winner == 0 else row_a
        loser_code = make_code(j, loser_row[j], schema, sentinel_bits)
    else:
        compared = max(arity - off - 1, 0)
        winner = 0 if tiebreak[0] <= tiebreak[1] else 1
        loser_code = duplicate_code(schema, sentinel_bits)
    if metrics is not None:
        metrics.row_comparisons += 1
        metrics.column_comparisons += compared
    return winner, loser_code


def _check_base_consistency(row: Row, code: int, schema: KeySchema) -> None:
    off = code_offset(code, schema)
    if off > schema.arity:
        raise BaseMismatch(f"offset {off} beyond arity {schema.arity}")
    if off < schema.arity and code_value(code, schema) != row[off]:
        raise BaseMismatch(
            f"code value {code_value(code, schema)} != row[{off}] = {row[off]}"
        )


def max_combine(code_a: int, code_b: int, schema: KeySchema) -> int:
    """Combine codes of consecutive links of one chain into the spanning code.

    Ascending coding takes the numerically larger packed code, descending the
    smaller.  Duplicate codes are the identity element.
    """
    if is_fence(code_a) or is_fence(code_b):
        raise FenceInput("cannot combine fence codes")
    if schema.direction == ASCENDING:
        return code_a if code_a > code_b else code_b
    return code_a if code_a < code_b else code_b


def truncate_to_prefix(code: int, prefix_len: int, schema: KeySchema, row: Row | None = None) -> int:
    """Re-express a code against the leading `prefix_len` key columns.

    Offsets below the prefix keep their position and value; offsets at or
    beyond it collapse to the duplicate code of the shorter key.
    """
    if not 1 <= prefix_len <= schema.arity:
        raise ValueError(f"prefix_len {prefix_len} outside [1, {schema.arity}]")
    if is_fence(code):
        raise FenceInput("cannot truncate a fence code")
    off = code_offset(code, schema)
    sentinel_bits = code & SENTINEL_MASK
    if off >= prefix_len:
        if schema.direction == ASCENDING:
            return sentinel_bits
        return sentinel_bits | (prefix_len << OFFSET_SHIFT)
    if STRICT and row is not None and code_value(code, schema) != row[off]:
        raise BaseMismatch("code value disagrees with row at its offset")
    if schema.direction == ASCENDING:
        return code - ((schema.arity - prefix_len) << OFFSET_SHIFT)
    return code


def boundary_threshold(prefix_len: int, schema: KeySchema) -> int:
    """Ascending packed-code threshold T with: offset < prefix_len  <=>  code >= T."""
    if schema.direction != ASCENDING:
        raise ValueError("boundary thresholds are defined for ascending codes")
    if not 1 <= prefix_len <= schema.arity:
        raise ValueError(f"prefix_len {prefix_len} outside [1, {schema.arity}]")
    return VALID | ((schema.arity - prefix_len + 1) << OFFSET_SHIFT)


def is_boundary(code: int, prefix_len: int, schema: KeySchema) -> bool:
    """True iff the code's offset is smaller than the prefix length."""
    if is_fence(code):
        raise FenceInput("boundary test on a fence code")
    if not 1 <= prefix_len <= schema.arity:
        raise ValueError(f"prefix_len {prefix_len} outside [1, {schema.arity}]")
    field = (code >> OFFSET_SHIFT) & OFFSET_MASK
    if schema.direction == ASCENDING:
        return field > schema.arity - prefix_len
    return field < prefix_len


def is_duplicate(code: int, schema: KeySchema) -> bool:
    """True iff the code's offset equals the arity (a full duplicate key)."""
    if is_fence(code):
        raise FenceInput("duplicate test on a fence code")
    field = (code >> OFFSET_SHIFT) & OFFSET_MASK
    if schema.direction == ASCENDING:
        return field == 0
    return field == schema.arity

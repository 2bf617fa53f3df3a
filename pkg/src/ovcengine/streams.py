"""The inter-operator contract: pull streams of (row, code) pairs."""

from __future__ import annotations

from .core import KeySchema, derive_code, encode_first


class CodedStream:
    """A single-pass iterator of (row, code) pairs with a declared sort key.

    Rows are nondecreasing in the schema's key order, the codes chain each
    row to its predecessor, and no fence ever escapes to a consumer.
    """

    __slots__ = ("schema", "_it")

    def __init__(self, schema: KeySchema, iterable):
        self.schema = schema
        self._it = iter(iterable)

    @property
    def arity(self) -> int:
        return self.schema.arity

    def __iter__(self):
        return self._it

    def __next__(self):
        return next(self._it)


def from_sorted_rows(rows, schema: KeySchema, metrics=None) -> CodedStream:
    """Code an already-sorted row sequence by chaining consecutive derivations.

    Column comparisons spent on the derivations are charged to `metrics`;
    this is the expensive baseline path that coded operators avoid.
    """

    def gen():
        prev = None
        for row in rows:
            if prev is None:
                code = encode_first(row, schema)
            else:
                code = derive_code(prev, row, schema)
                if metrics is not None:
                    field = (code >> 32) & ((1 << 30) - 1)
                    arity = schema.arity
                    offset = arity - field if not schema.descending else field
                    # one comparison per shared column plus the deciding one
                    metrics.column_comparisons += min(offset + 1, arity)
            prev = row
            yield row, code

    return CodedStream(schema, gen())


def materialize(stream: CodedStream) -> list:
    """Drain a stream into a list of (row, code) pairs."""
    return list(stream)

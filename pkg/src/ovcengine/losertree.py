"""Tree-of-losers priority queue over coded inputs.

The tree embeds a balanced binary tournament in an array: internal nodes sit
at slots 1..P-1, slot 0 holds the overall winner, and input i competes at
leaf P+i.  Each node stores only (code, input index); rows stay in the input
cursors' buffers.  Along the overall winner's leaf-to-root path every stored
code is relative to the winner's key, so a pop needs exactly one leaf-to-root
pass of log2(P) node visits and packed-code comparisons decide everything
except equal codes, which fall back to column comparisons starting past the
shared prefix.

Fan-ins that are not powers of two are padded with permanently exhausted
inputs; fences decide by sentinel bits alone and are never charged as row or
column comparisons.  Ascending key schemas only.
"""

from __future__ import annotations

from .core import (
    ASCENDING,
    KeySchema,
    LATE_FENCE,
    NEXT_RUN,
    OFFSET_MASK,
    OFFSET_SHIFT,
    SENTINEL_MASK,
    SENTINEL_SHIFT,
    VALID,
)


class LoserTree:
    """F-way merge with offset-value coded comparisons and fence handling."""

    __slots__ = (
        "schema",
        "metrics",
        "fan_in",
        "_size",
        "_codes",
        "_idx",
        "_rows",
        "_cursors",
        "_successor_fn",
    )

    def __init__(self, inputs, schema: KeySchema, metrics=None, *, _seed_items=None, _successor_fn=None):
        """Build the tree over `inputs`, a sequence of (row, code) cursors.

        Empty and absent inputs carry late fences.  The internal seed/successor
        hooks serve run generation, where every leaf starts with one row.
        """
        if schema.direction != ASCENDING:
            raise ValueError("loser trees operate on ascending codes only")
        self.schema = schema
        self.metrics = metrics
        self._successor_fn = _successor_fn

        if _seed_items is not None:
            items = list(_seed_items)
            self._cursors = None
        else:
            self._cursors = [iter(c) for c in inputs]
            items = [next(c, None) for c in self._cursors]

        fan_in = len(items)
        self.fan_in = fan_in
        size = 2
        while size < fan_in:
            size *= 2
        self._size = size

        rows = [None] * size
        leaf_codes = [LATE_FENCE] * size
        for i, item in enumerate(items):
            if item is not None:
                rows[i] = item[0]
                leaf_codes[i] = item[1]
        self._rows = rows
        self._build(leaf_codes)

    def _build(self, leaf_codes):
        """Play the initial tournament; nodes keep losers, slot 0 the winner."""
        size = self._size
        arity = self.schema.arity
        metrics = self.metrics
        rows = self._rows

        codes = [0] * size
        idxs = [0] * size
        win_code = [0] * size  # winner emerging from internal node n
        win_idx = [0] * size
        # children of node n are nodes 2n/2n+1; slots >= size address leaves
        for n in range(size - 1, 0, -1):
            ai = 2 * n
            bi = ai + 1
            if ai < size:
                a_code, a_idx = win_code[ai], win_idx[ai]
                b_code, b_idx = win_code[bi], win_idx[bi]
            else:
                a_code, a_idx = leaf_codes[ai - size], ai - size
                b_code, b_idx = leaf_codes[bi - size], bi - size
            a_won, loser_code, loser_idx = self._match(
                a_code, a_idx, b_code, b_idx, arity, rows, metrics
            )
            codes[n] = loser_code
            idxs[n] = loser_idx
            if a_won:
                win_code[n], win_idx[n] = a_code, a_idx
            else:
                win_code[n], win_idx[n] = b_code, b_idx
        codes[0] = win_code[1]
        idxs[0] = win_idx[1]
        self._codes = codes
        self._idx = idxs

    @staticmethod
    def _match(a_code, a_idx, b_code, b_idx, arity, rows, metrics):
        """One tournament match; returns (a_won, loser_code, loser_index)."""
        if a_code != b_code:
            if (a_code | b_code) < LATE_FENCE and not ((a_code ^ b_code) >> SENTINEL_SHIFT):
                if metrics is not None:
                    metrics.row_comparisons += 1
                    metrics.code_decisions += 1
            if a_code < b_code:
                return True, b_code, b_idx
            return False, a_code, a_idx
        if a_code >= LATE_FENCE:  # two fences: keep deterministic order
            if a_idx <= b_idx:
                return True, b_code, b_idx
            return False, a_code, a_idx
        # equal valid codes: compare columns past the shared offset
        row_a = rows[a_idx]
        row_b = rows[b_idx]
        off = arity - ((a_code >> OFFSET_SHIFT) & OFFSET_MASK)
        j = off + 1
        while j < arity and row_a[j] == row_b[j]:
            j += 1
        sentinel_bits = a_code & SENTINEL_MASK
        if j < arity:
            compared = j - off
            a_won = row_a[j] < row_b[j]
            loser_row = row_b if a_won else row_a
            loser_code = sentinel_bits | ((arity - j) << OFFSET_SHIFT) | loser_row[j]
        else:
            compared = arity - off - 1 if off < arity else 0
            a_won = a_idx <= b_idx
            loser_code = sentinel_bits
        if metrics is not None:
            metrics.row_comparisons += 1
            metrics.column_comparisons += compared
        if a_won:
            return True, loser_code, b_idx
        return False, loser_code, a_idx

    @property
    def root_code(self) -> int:
        return self._codes[0]

    @property
    def exhausted(self) -> bool:
        return self._codes[0] >= LATE_FENCE

    def pop(self):
        """Emit the current winner and bubble its successor to the root.

        Returns (row, code) with the code relative to the previously emitted
        winner, or None when all inputs are exhausted.
        """
        codes = self._codes
        wcode = codes[0]
        if wcode >= LATE_FENCE:
            return None
        idxs = self._idx
        rows = self._rows
        widx = idxs[0]
        out = (rows[widx], wcode)

        # fetch the winner's successor from the same input; replacement
        # selection codes it relative to the winner it replaces
        if self._cursors is not None:
            nxt = next(self._cursors[widx], None)
        elif self._successor_fn is not None:
            nxt = self._successor_fn(out[0])
        else:
            nxt = None
        if nxt is None:
            ccode = LATE_FENCE
            rows[widx] = None
        else:
            rows[widx] = nxt[0]
            ccode = nxt[1]
        cidx = widx

        arity = self.schema.arity
        rc = 0
        cc = 0
        cd = 0
        n = (self._size + widx) >> 1
        while n:
            scode = codes[n]
            if scode != ccode:
                if (scode | ccode) < LATE_FENCE and not ((scode ^ ccode) >> SENTINEL_SHIFT):
                    rc += 1
                    cd += 1
                if scode < ccode:
                    sidx = idxs[n]
                    codes[n] = ccode
                    idxs[n] = cidx
                    ccode = scode
                    cidx = sidx
            elif ccode >= LATE_FENCE:
                sidx = idxs[n]
                if sidx < cidx:  # deterministic among exhausted slots
                    codes[n] = ccode
                    idxs[n] = cidx
                    ccode = scode
                    cidx = sidx
            else:
                # equal valid codes: columns decide, loser is re-coded
                sidx = idxs[n]
                row_c = rows[cidx]
                row_s = rows[sidx]
                off = arity - ((ccode >> OFFSET_SHIFT) & OFFSET_MASK)
                j = off + 1
                while j < arity and row_c[j] == row_s[j]:
                    j += 1
                sentinel_bits = ccode & SENTINEL_MASK
                rc += 1
                if j < arity:
                    cc += j - off
                    if row_c[j] < row_s[j]:
                        codes[n] = sentinel_bits | ((arity - j) << OFFSET_SHIFT) | row_s[j]
                        # idxs[n] stays sidx
                    else:
                        codes[n] = sentinel_bits | ((arity - j) << OFFSET_SHIFT) | row_c[j]
                        idxs[n] = cidx
                        ccode = scode
                        cidx = sidx
                else:
                    if off < arity:
                        cc += arity - off - 1
                    if cidx <= sidx:
                        codes[n] = sentinel_bits
                        # idxs[n] stays sidx
                    else:
                        codes[n] = sentinel_bits
                        idxs[n] = cidx
                        ccode = scode
                        cidx = sidx
            n >>= 1

        codes[0] = ccode
        idxs[0] = cidx
        metrics = self.metrics
        if metrics is not None and (rc or cc):
            metrics.row_comparisons += rc
            metrics.column_comparisons += cc
            metrics.code_decisions += cd
        return out

    def __iter__(self):
        while True:
            item = self.pop()
            if item is None:
                return
            yield item

    def flip_next_run(self) -> None:
        """Demote every next-run entry to the (new) current run."""
        codes = self._codes
        for i, code in enumerate(codes):
            if code >> SENTINEL_SHIFT == 2:
                codes[i] = code - (NEXT_RUN - VALID)


def tree_from_rows(rows, schema: KeySchema, metrics=None) -> LoserTree:
    """Tournament over single-row runs: run generation's in-memory sort."""
    from .core import encode_first

    seed = [(row, encode_first(row, schema)) for row in rows]
    return LoserTree((), schema, metrics, _seed_items=seed)

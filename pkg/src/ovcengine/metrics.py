"""Comparison and spill counters shared by every operator.

Counting rules:

* ``row_comparisons``    one per comparison of two valid rows, whether the
                         packed codes or column values decided it.  Fence and
                         run-assignment decisions are free and never counted.
* ``column_comparisons`` one per column value pair actually compared; zero
                         whenever packed codes decide.
* ``code_decisions``     decisions taken from packed codes alone: unequal-code
                         comparisons plus boundary/duplicate tests in streams.
* ``rows_spilled`` / ``bytes_spilled``  rows and bytes written to temporary
                         storage by any spilling operator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

COUNTER_NAMES = (
    "row_comparisons",
    "column_comparisons",
    "code_decisions",
    "rows_spilled",
    "bytes_spilled",
)


@dataclass
class MetricsCtx:
    row_comparisons: int = 0
    column_comparisons: int = 0
    code_decisions: int = 0
    rows_spilled: int = 0
    bytes_spilled: int = 0

    def merge(self, other: "MetricsCtx") -> None:
        """Fold another context's counters into this one."""
        self.row_comparisons += other.row_comparisons
        self.column_comparisons += other.column_comparisons
        self.code_decisions += other.code_decisions
        self.rows_spilled += other.rows_spilled
        self.bytes_spilled += other.bytes_spilled

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in COUNTER_NAMES}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

"""Sort-based query execution on offset-value coded streams.

Sorted streams carry a 64-bit order-preserving code per row; operators
consume the codes to skip column comparisons and derive their outputs' codes
from the inputs' codes alone.  The package bundles the coding kernel, a
tree-of-losers priority queue, an external merge sort, order-preserving
relational operators, run-length encoded scans, a hash-based baseline, the
brute-force validation oracle, and a benchmark CLI.
"""

from .core import (
    ASCENDING,
    DESCENDING,
    BaseMismatch,
    FenceInput,
    KeySchema,
    OrderViolation,
    OvcError,
    Row,
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
from .extsort import RunFile, SortConfig, SpillIo, generate_runs, merge_runs, merge_schedule, sort
from .hashbase import HashOpConfig, hash_aggregate, hash_join
from .losertree import LoserTree, tree_from_rows
from .metrics import MetricsCtx
from .operators import (
    KeyOrderBroken,
    NULL_VALUE,
    dedup,
    exchange_merge,
    exchange_split,
    except_distinct,
    group_aggregate,
    intersect_distinct,
    lookup_join,
    merge_join,
    project,
    segment,
)
from .operators import filter as filter_rows
from .oracle import Violation, recompute_codes, stirling_lower_bound
from .scan import FormatError, GenSpec, RleTable, generate, read_rows, rows_as_tuples, scan_with_codes, write_rows
from .streams import CodedStream, from_sorted_rows, materialize

__version__ = "0.1.0"

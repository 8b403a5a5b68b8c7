"""Incremental evaluation of monoid-comprehension queries over growing bags."""

from incrq.core import Bag, bag_equals
from incrq.errors import (
    BoxConflict,
    DeletionError,
    DSLSyntaxError,
    EvalError,
    IncrqError,
    NotIncrementalizable,
)
from incrq.evaluator.interp import evaluate
from incrq.runtime import (
    compile_query,
    explain,
    ingest_batch,
    ingest_deletion,
    init_state,
)
from incrq.workbench.dsl import parse_plan, to_dsl

__all__ = [
    "Bag", "bag_equals", "BoxConflict", "DeletionError", "DSLSyntaxError", "EvalError",
    "IncrqError", "NotIncrementalizable", "evaluate", "compile_query", "explain",
    "ingest_batch", "ingest_deletion", "init_state", "parse_plan", "to_dsl",
]

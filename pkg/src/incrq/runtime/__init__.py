"""Incremental execution: plans, state, batch and deletion ingestion, iteration."""

from incrq.core.monoids import diffusion, diminisher
from incrq.runtime.answer import AnswerView, answer_shape
from incrq.runtime.engine import (
    JOIN_VIOLATION,
    MetricsRow,
    State,
    eval_h,
    ingest_batch,
    ingest_deletion,
    init_state,
    make_cogroup_hook,
)
from incrq.runtime.iterate import bootstrap, run_iterative
from incrq.runtime.plan import LOOP_SOURCE, IncrementalPlan, compile_one_shot, compile_query, explain
from incrq.runtime.state import StateStore

__all__ = [
    "AnswerView",
    "IncrementalPlan",
    "JOIN_VIOLATION",
    "LOOP_SOURCE",
    "MetricsRow",
    "State",
    "StateStore",
    "answer_shape",
    "bootstrap",
    "compile_one_shot",
    "compile_query",
    "diffusion",
    "diminisher",
    "eval_h",
    "explain",
    "ingest_batch",
    "ingest_deletion",
    "init_state",
    "make_cogroup_hook",
    "run_iterative",
]

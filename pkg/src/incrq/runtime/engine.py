"""State lifecycle: initialization, batch ingestion and deletions."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

from incrq.core.monoids import EXACT_KEYS, ApproxKeys, KeyMatcher
from incrq.core.values import EMPTY_BAG, Bag
from incrq.errors import BoxConflict, DeletionError, EvalError
from incrq.evaluator import terms as T
from incrq.evaluator.interp import EvalContext, evaluate, group_pairs
from incrq.runtime.answer import AnswerView
from incrq.runtime.plan import LOOP_SOURCE, IncrementalPlan
from incrq.runtime.state import StateStore

log = logging.getLogger("incrq.runtime")

JOIN_VIOLATION = "one-to-many join violated by batch"


@dataclass
class MetricsRow:
    epoch: int
    batch_size: int
    h_tuples: int
    state_size: int
    merge_pairs: int
    wall_ms: float
    mode: str
    partitions: int  # distinct state keys touched by the merge

    FIELDS = ("epoch", "batch_size", "h_tuples", "state_size", "merge_pairs", "wall_ms", "mode", "partitions")

    def as_row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class State:
    """Everything a session carries between batches."""

    plan: IncrementalPlan
    store: StateStore
    view: AnswerView
    invariant_data: dict = field(default_factory=dict)
    cogroup_index: dict = field(default_factory=dict)  # coGroup path -> key -> left group
    shadow: dict | None = None  # per-source multiset of live stream data (strict deletes)
    epoch: int = 0
    tuples_processed: int = 0
    metrics: list = field(default_factory=list)
    trace: list = field(default_factory=list)  # iterative: outer keys of each ΔT of the last batch

    @property
    def value(self) -> Any:
        return self.store.to_bag()

    @property
    def merger(self):
        return self.store.merger

    def answer(self) -> Any:
        return self.view.value()


def key_matcher(plan: IncrementalPlan) -> KeyMatcher:
    if plan.float_key_epsilon is None:
        return EXACT_KEYS
    return ApproxKeys(plan.float_key_epsilon)


# ---------------------------------------------------------------------------
# coGroup index


def make_cogroup_hook(index: dict, deleting: bool = False):
    """coGroup that remembers each key's left group across batches.

    The left side of a compiled coGroup is merged with the invariant monoid,
    so a key's left group must arrive whole in one batch. Later batches that
    bring only right-side values for the key are joined with the stored group.
    """

    def hook(path: tuple, left: Bag, right: Bag) -> Bag:
        stored = index.setdefault(path, {})
        gl = group_pairs(left, "coGroup")
        gr = group_pairs(right, "coGroup")
        out: dict = {}
        for k, group in gl.items():
            if deleting:
                raise DeletionError("deletions may not remove values from the invariant side of a join")
            new_left = Bag._trusted(group)
            seen = stored.get(k)
            if seen is None:
                stored[k] = new_left
            elif seen != new_left:
                raise BoxConflict(seen, new_left, JOIN_VIOLATION)
            r = gr.get(k)
            out[(k, (new_left, Bag._trusted(r) if r is not None else EMPTY_BAG))] = 1
        for k, group in gr.items():
            if k in gl:
                continue
            seen = stored.get(k)
            if seen is None:
                seen = EMPTY_BAG
                if not deleting:
                    stored[k] = seen
            out[(k, (seen, Bag._trusted(group)))] = 1
        return Bag._trusted(out)

    return hook


# ---------------------------------------------------------------------------
# evaluating h


def _stream_total(plan: IncrementalPlan, data: Mapping[int, Bag]) -> int:
    return sum(len(data.get(i, EMPTY_BAG)) for i in plan.stream_sources)


def _bind(plan: IncrementalPlan, state: State, data: Mapping[int, Any]) -> dict:
    sources: dict = dict(state.invariant_data)
    for i in plan.stream_sources:
        value = data.get(i, EMPTY_BAG)
        if not isinstance(value, Bag):
            raise EvalError(f"source {i} must be bound to a bag, got {type(value).__name__}")
        sources[i] = value
    for i, value in data.items():
        if i not in plan.stream_sources and i not in plan.invariant_sources and i != LOOP_SOURCE:
            raise EvalError(f"source {i} is not used by the plan")
        if i == LOOP_SOURCE:
            sources[i] = value
    return sources


def _h_reads(plan: IncrementalPlan) -> dict:
    reads: dict = {}
    for _, node in T.walk(plan.h):
        if isinstance(node, T.Source) and node.index in plan.stream_sources:
            reads[node.index] = reads.get(node.index, 0) + 1
    return reads


def eval_h(
    plan: IncrementalPlan,
    state: State,
    data: Mapping[int, Any],
    env: Mapping[str, Any] | None = None,
    deleting: bool = False,
) -> tuple[Any, int]:
    """Evaluate ``h`` on ``data`` only; returns the result and stream tuples read."""
    sources = _bind(plan, state, data)
    ctx = EvalContext(sources, cogroup_hook=make_cogroup_hook(state.cogroup_index, deleting))
    result = evaluate(plan.h, env=env, context=ctx)
    read = sum(c for i, c in ctx.source_reads.items() if i in plan.stream_sources)
    # the incremental work bound: every stream source is read once per occurrence in h
    bound = sum(k * len(sources[i]) for i, k in _h_reads(plan).items())
    if read > bound:
        raise AssertionError(f"h read {read} stream tuples, more than the batch allows ({bound})")
    return result, read


# ---------------------------------------------------------------------------
# lifecycle


def _empty_state(plan: IncrementalPlan, invariant_data: Mapping[int, Bag]) -> State:
    missing = [i for i in plan.invariant_sources if i not in invariant_data]
    if missing:
        raise EvalError(f"invariant sources must be bound at initialization: {sorted(missing)}")
    store = StateStore(plan.merger, key_matcher(plan))
    view = AnswerView(plan.answer, store)
    shadow = {i: {} for i in plan.stream_sources} if plan.checks == "strict" else None
    return State(plan, store, view, dict(invariant_data), shadow=shadow)


def init_state(plan: IncrementalPlan, data: Mapping[int, Bag] | None = None) -> State:
    """Zero state, or ``h`` of the initial data (a full iteration for iterative plans)."""
    data = dict(data or {})
    invariant = {i: data.pop(i) for i in list(data) if i in plan.invariant_sources}
    state = _empty_state(plan, invariant)
    started = time.perf_counter()
    if plan.mode == "iterative":
        from incrq.runtime.iterate import bootstrap

        h_tuples, pairs = bootstrap(plan, state, data)
    elif _stream_total(plan, data) == 0:
        h_tuples, pairs = 0, 0
    else:
        result, h_tuples = eval_h(plan, state, data)
        pairs = state.store.merge(result, state.view.on_change)
    _record_shadow(state, data, +1)
    state.tuples_processed += h_tuples
    _log_metrics(state, data, h_tuples, pairs, started, "init", touched=len(state.store))
    return state


def ingest_batch(plan: IncrementalPlan, state: State, delta: Mapping[int, Bag]) -> tuple[State, Any]:
    """Merge ``h(Δ)`` into the state and return the state with the new answer."""
    if plan.mode == "iterative":
        from incrq.runtime.iterate import run_iterative

        return run_iterative(plan, state, delta)
    started = time.perf_counter()
    result, h_tuples = eval_h(plan, state, delta)
    touched: set = set()
    pairs = state.store.merge(result, _tracking(state, touched))
    _record_shadow(state, delta, +1)
    state.epoch += 1
    state.tuples_processed += h_tuples
    answer = state.answer()
    _log_metrics(state, delta, h_tuples, pairs, started, "insert", touched=len(touched))
    return state, answer


def ingest_deletion(plan: IncrementalPlan, state: State, delta: Mapping[int, Bag]) -> tuple[State, Any]:
    """Remove previously inserted data with the merger's diminisher."""
    if plan.mode == "iterative":
        raise DeletionError("iterative plans do not support deletions")
    started = time.perf_counter()
    if state.shadow is not None:
        _check_subset(state, delta)
    result, h_tuples = eval_h(plan, state, delta, deleting=True)
    touched: set = set()
    pairs = state.store.diminish(result, _tracking(state, touched))
    _record_shadow(state, delta, -1)
    state.epoch += 1
    state.tuples_processed += h_tuples
    answer = state.answer()
    _warn_negative(answer)
    _log_metrics(state, delta, h_tuples, pairs, started, "delete", touched=len(touched))
    return state, answer


def _tracking(state: State, touched: set):
    on_change = state.view.on_change

    def callback(key: Any, old: Any, new: Any) -> None:
        touched.add(key)
        on_change(key, old, new)

    return callback


# ---------------------------------------------------------------------------
# strict deletions


def _record_shadow(state: State, data: Mapping[int, Bag], sign: int) -> None:
    if state.shadow is None:
        return
    for i, counts in state.shadow.items():
        for item, c in data.get(i, EMPTY_BAG).items():
            n = counts.get(item, 0) + sign * c
            if n > 0:
                counts[item] = n
            else:
                counts.pop(item, None)


def _check_subset(state: State, delta: Mapping[int, Bag]) -> None:
    assert state.shadow is not None
    for i, bag in delta.items():
        live = state.shadow.get(i, {})
        for item, c in bag.items():
            if live.get(item, 0) < c:
                raise DeletionError(f"deletion batch for source {i} is not a subset of the stream: {item!r}")


def _warn_negative(answer: Any) -> None:
    if not isinstance(answer, Bag):
        return
    for item in answer.distinct():
        if _has_negative(item):
            log.warning("negative aggregate in answer after deletion: %r", item)
            return


def _has_negative(v: Any) -> bool:
    if isinstance(v, tuple):
        return any(_has_negative(x) for x in v)
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0


# ---------------------------------------------------------------------------
# metrics


def _log_metrics(state: State, data: Mapping[int, Any], h_tuples: int, pairs: int, started: float, mode: str, touched: int) -> None:
    row = MetricsRow(
        epoch=state.epoch,
        batch_size=_stream_total(state.plan, data),
        h_tuples=h_tuples,
        state_size=len(state.store),
        merge_pairs=pairs,
        wall_ms=(time.perf_counter() - started) * 1000.0,
        mode=mode,
        partitions=touched,
    )
    state.metrics.append(row)
    log.debug("epoch %d: %s", row.epoch, row)


def zero_answer(plan: IncrementalPlan) -> Any:
    return AnswerView(plan.answer, StateStore(plan.merger)).value()


__all__ = [
    "JOIN_VIOLATION",
    "MetricsRow",
    "State",
    "eval_h",
    "init_state",
    "ingest_batch",
    "ingest_deletion",
    "key_matcher",
    "make_cogroup_hook",
    "zero_answer",
]

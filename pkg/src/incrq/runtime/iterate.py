"""The approximate incremental loop for ``repeat`` queries.

Each batch re-runs the step only on what changed: the new data seeds a loop
value, every step merges ``h`` of that value into the state with the diffusion
(a right-outer merge, so untouched state entries drop out), and the answer of
the diffused part becomes the next loop value. The state is merged with the
last diffused part at the end.
"""

from __future__ import annotations

import time
from typing import Any, Mapping

from incrq.core.monoids import DownRight, merge
from incrq.core.values import EMPTY_BAG, Bag
from incrq.errors import EvalError
from incrq.evaluator.interp import eval_function, evaluate
from incrq.runtime.engine import State, _log_metrics, _record_shadow, _tracking, eval_h
from incrq.runtime.plan import LOOP_SOURCE, IncrementalPlan


def _initial_value(plan: IncrementalPlan, state: State, data: Mapping[int, Bag]) -> Any:
    assert plan.init is not None
    sources = dict(state.invariant_data)
    for i in plan.stream_sources:
        sources[i] = data.get(i, EMPTY_BAG)
    return evaluate(plan.init, sources)


def _step(plan: IncrementalPlan, state: State, x: Any, data: Mapping[int, Bag]) -> tuple[Any, int]:
    """``h(x, data)``"""
    if plan.loop_role == "source":
        if not isinstance(x, Bag):
            raise EvalError(f"loop value must be a bag, got {type(x).__name__}")
        return eval_h(plan, state, {**data, LOOP_SOURCE: x})
    return eval_h(plan, state, data, env={plan.loop_var: x})


def _outer_keys(delta: Any) -> set:
    keys: set = set()
    if isinstance(delta, Bag):
        for item in delta.distinct():
            lineage = item[0]
            keys.add(lineage[0] if isinstance(lineage, tuple) and len(lineage) == 2 else lineage)
    return keys


def bootstrap(plan: IncrementalPlan, state: State, data: Mapping[int, Bag]) -> tuple[int, int]:
    """Seed the state with a full batch iteration over the initial data.

    ``x = g(S)``; ``n − 1`` times ``x = a(h(x, S))``; then the state is ``h(x, S)``.
    """
    x = _initial_value(plan, state, data)
    read = 0
    for _ in range(plan.iterations - 1):
        t, r = _step(plan, state, x, data)
        read += r
        x = eval_function(plan.answer, t)
    t, r = _step(plan, state, x, data)
    read += r
    pairs = state.store.merge(t, state.view.on_change)
    return read, pairs


def run_iterative(plan: IncrementalPlan, state: State, delta: Mapping[int, Bag]) -> tuple[State, Any]:
    """One batch of the approximate loop; records the outer keys of every diffused part."""
    started = time.perf_counter()
    form = plan.diffusion
    x = _initial_value(plan, state, delta)
    read = 0
    trace: list[set] = []
    diffused: Any = None
    for _ in range(plan.iterations):
        t, r = _step(plan, state, x, delta)
        read += r
        if isinstance(form, DownRight) and state.store.kind == "keyed":
            diffused = state.store.diffuse(t, form.inner)
        else:
            diffused = merge(form, state.store.to_bag(), t, state.store.keys)
        trace.append(_outer_keys(diffused))
        x = eval_function(plan.answer, diffused)
    touched: set = set()
    pairs = state.store.merge(diffused, _tracking(state, touched))
    _record_shadow(state, delta, +1)
    state.trace = trace
    state.epoch += 1
    state.tuples_processed += read
    answer = state.answer()
    _log_metrics(state, delta, read, pairs, started, "iterate", touched=len(touched))
    return state, answer

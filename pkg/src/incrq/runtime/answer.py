"""Answer values kept up to date as the state changes.

Most answer functions have one of two shapes:

* ``λs. map(F, π₂(s))``: every state element contributes ``F`` of its value;
* ``λs. map(F, π₂(reduce(⇑⊕, strip_lineage(s))))``: state entries sharing an
  outer key are folded with ``⊕`` first.

For those, :class:`AnswerView` updates only what a merge touched. Any other
answer is evaluated on the whole state.
"""

from __future__ import annotations

from typing import Any, Callable

from incrq.core.monoids import Lifted, merge
from incrq.core.values import Bag
from incrq.evaluator import terms as T
from incrq.evaluator.interp import eval_function, evaluate
from incrq.runtime.state import StateStore


def answer_shape(answer: T.Term) -> tuple[str, T.Term | None]:
    """``("values" | "grouped" | "full", F)`` for an answer function term."""
    if not isinstance(answer, T.Lambda) or not isinstance(answer.param, str):
        return "full", None
    state = answer.param
    body = answer.body
    fn: T.Term | None = None
    if isinstance(body, T.Call) and body.name == "map" and len(body.args) == 2:
        fn, body = body.args
        if state in T.free_vars(fn):
            return "full", None
    if not (isinstance(body, T.Proj) and body.index == 1):
        return "full", None
    inner = body.expr
    if isinstance(inner, T.Var) and inner.name == state:
        return "values", fn
    if (
        isinstance(inner, T.Reduce)
        and isinstance(inner.monoid, Lifted)
        and isinstance(inner.input, T.Call)
        and inner.input.name == "strip_lineage"
        and inner.input.args == (T.Var(state),)
    ):
        return "grouped", fn
    return "full", None


def _identity(v: Any) -> Any:
    return v


class AnswerView:
    """Answer of a plan, maintained alongside a :class:`StateStore`."""

    def __init__(self, answer: T.Lambda, store: StateStore):
        self.answer_term = answer
        self.store = store
        shape, fn = answer_shape(answer)
        if shape == "grouped" and store.kind != "keyed":
            shape = "full"
        if shape == "values" and store.kind == "value":
            shape = "full"
        self.shape = shape
        self.fn: Callable[[Any], Any] = evaluate(fn) if fn is not None else _identity
        if shape == "grouped":
            reducer = answer.body.args[1].expr if isinstance(answer.body, T.Call) else answer.body.expr
            self.inner = reducer.monoid.inner
        self._counts: dict = {}
        self._groups: dict = {}  # outer key -> {lineage key: None}
        self._contrib: dict = {}  # outer key -> answer element
        self._dirty: set = set()
        self._cached: Any = None
        self.rebuild()

    # -- full recomputation ---------------------------------------------

    def rebuild(self) -> None:
        self._counts = {}
        self._groups = {}
        self._contrib = {}
        self._dirty = set()
        self._cached = None
        if self.shape == "values":
            if self.store.kind == "counts":
                for item, c in self.store.entries.items():
                    self._add(self.fn(item[1]), c)
            else:
                for k, v in self.store.entries.items():
                    self._add(self.fn(v), 1)
        elif self.shape == "grouped":
            for k in self.store.entries:
                self._groups.setdefault(_outer(k), {})[k] = None
            self._dirty = set(self._groups)
            self._refresh()

    # -- incremental maintenance ----------------------------------------

    def on_change(self, key: Any, old: Any, new: Any) -> None:
        """Callback for :meth:`StateStore.merge` / :meth:`StateStore.diminish`."""
        self._cached = None
        if self.shape == "values":
            if self.store.kind == "counts":
                delta = (new or 0) - (old or 0)
                if delta:
                    self._add(self.fn(key[1]), delta)
            else:
                if old is not None:
                    self._add(self.fn(old), -1)
                if new is not None:
                    self._add(self.fn(new), 1)
        elif self.shape == "grouped":
            outer = _outer(key)
            group = self._groups.setdefault(outer, {})
            if new is None:
                group.pop(key, None)
            else:
                group[key] = None
            self._dirty.add(outer)

    def _refresh(self) -> None:
        entries = self.store.entries
        for outer in self._dirty:
            previous = self._contrib.pop(outer, _NONE)
            if previous is not _NONE:
                self._add(previous, -1)
            group = self._groups.get(outer)
            if not group:
                self._groups.pop(outer, None)
                continue
            folded: Any = _NONE
            for k in group:
                v = entries[k]
                folded = v if folded is _NONE else merge(self.inner, folded, v)
            element = self.fn(folded)
            self._contrib[outer] = element
            self._add(element, 1)
        self._dirty = set()

    def _add(self, element: Any, c: int) -> None:
        n = self._counts.get(element, 0) + c
        if n > 0:
            self._counts[element] = n
        else:
            self._counts.pop(element, None)

    def value(self) -> Any:
        if self.shape == "full":
            if self._cached is None:
                self._cached = eval_function(self.answer_term, self.store.to_bag())
            return self._cached
        if self._dirty:
            self._refresh()
        if self._cached is None:
            self._cached = Bag._trusted(dict(self._counts))
        return self._cached


_NONE = object()


def _outer(lineage_key: Any) -> Any:
    return lineage_key[0] if isinstance(lineage_key, tuple) and len(lineage_key) == 2 else lineage_key

"""Mutable keyed state storage and an incrementally maintained answer.

A :class:`StateStore` holds the same value a ``Bag`` state would, but keeps it
in a dictionary so that merging a batch result costs time proportional to the
batch result rather than to the whole state. :meth:`StateStore.to_bag` gives
the equivalent immutable bag.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Iterable

from incrq.core.monoids import (
    EXACT_KEYS,
    DownLeft,
    KeyMatcher,
    Lifted,
    MergeForm,
    Union,
    diminisher,
    merge,
    monoid_zero,
)
from incrq.core.values import Bag
from incrq.errors import EvalError

log = logging.getLogger("incrq.state")


def _pair(item: Any) -> tuple:
    if not isinstance(item, tuple) or len(item) != 2:
        raise EvalError(f"state expects key-value pairs, got {item!r}")
    return item


class StateStore:
    """Merger-aware mutable state.

    * lifted mergers keep ``key -> value`` (keys are unique in a lifted state);
    * the bag union merger keeps ``element -> multiplicity``;
    * anything else keeps a single value and defers to :func:`merge`.
    """

    def __init__(self, merger: MergeForm, keys: KeyMatcher = EXACT_KEYS):
        self.merger = merger
        self.keys = keys
        self._cached: Bag | None = None
        if isinstance(merger, Lifted):
            self.kind = "keyed"
            self.entries: dict = {}
        elif isinstance(merger, Union):
            self.kind = "counts"
            self.entries = {}
        else:
            self.kind = "value"
            self.value: Any = monoid_zero(merger)

    # -- construction ---------------------------------------------------

    @classmethod
    def from_value(cls, merger: MergeForm, value: Any, keys: KeyMatcher = EXACT_KEYS) -> "StateStore":
        store = cls(merger, keys)
        store.merge(value)
        return store

    def copy(self) -> "StateStore":
        other = StateStore(self.merger, self.keys)
        if self.kind == "value":
            other.value = self.value
        else:
            other.entries = dict(self.entries)
        other._cached = self._cached
        return other

    # -- reads ----------------------------------------------------------

    def __len__(self) -> int:
        if self.kind == "keyed":
            return len(self.entries)
        if self.kind == "counts":
            return sum(self.entries.values())
        return len(self.value) if isinstance(self.value, Bag) else 1

    def keys_view(self) -> Iterable[Any]:
        return self.entries.keys() if self.kind != "value" else ()

    def get(self, key: Any, default: Any = None) -> Any:
        return self.entries.get(key, default)

    def to_bag(self) -> Any:
        """The state as an immutable value (cached until the next change)."""
        if self.kind == "value":
            return self.value
        if self._cached is None:
            if self.kind == "keyed":
                self._cached = Bag._trusted({(k, v): 1 for k, v in self.entries.items()})
            else:
                self._cached = Bag._trusted(dict(self.entries))
        return self._cached

    # -- writes ---------------------------------------------------------

    def merge(self, delta: Any, on_change: Callable[[Any, Any, Any], None] | None = None) -> int:
        """``state ⊗= delta``; returns the number of merged pairs.

        ``on_change(key, old, new)`` is called for every touched entry (``old``
        or ``new`` is ``None`` when the entry did not or no longer exists).
        """
        if self.kind == "value":
            self.value = merge(self.merger, self.value, delta, self.keys)
            return 1
        if not isinstance(delta, Bag):
            raise EvalError(f"state merge expects a bag, got {delta!r}")
        self._cached = None
        if self.kind == "counts":
            pairs = 0
            entries = self.entries
            for item, c in delta.items():
                old = entries.get(item, 0)
                entries[item] = old + c
                pairs += c
                if on_change is not None:
                    on_change(item, old, old + c)
            return pairs
        inner = self.merger.inner  # type: ignore[attr-defined]
        pairs = 0
        for item, c in delta.items():
            k, v = _pair(item)
            for _ in range(c):
                pairs += 1
                match = self._find(k)
                if match is _MISSING:
                    self.entries[k] = v
                    if on_change is not None:
                        on_change(k, None, v)
                    continue
                exact = k in self.entries
                old = self.entries[k] if exact else self.entries.pop(match)
                new = merge(inner, old, v, self.keys)
                # approximate matches take the newer key
                self.entries[k] = new
                if on_change is not None:
                    if exact:
                        on_change(k, old, new)
                    else:
                        on_change(match, old, None)
                        on_change(k, None, new)
        return pairs

    def diminish(self, delta: Any, on_change: Callable[[Any, Any, Any], None] | None = None) -> int:
        """``state ⊘= delta`` with the diminisher of the merger."""
        form = diminisher(self.merger)
        if self.kind == "value":
            self.value = merge(form, self.value, delta, self.keys)
            return 1
        if not isinstance(delta, Bag):
            raise EvalError(f"state deletion expects a bag, got {delta!r}")
        self._cached = None
        if self.kind == "counts":
            pairs = 0
            deficit = 0
            entries = self.entries
            for item, c in delta.items():
                old = entries.get(item, 0)
                pairs += c
                if old > c:
                    entries[item] = old - c
                else:
                    deficit += c - old
                    entries.pop(item, None)
                if on_change is not None:
                    on_change(item, old, max(old - c, 0))
            if deficit:
                log.warning("deletion removed %d elements that were not present", deficit)
            return pairs
        assert isinstance(form, DownLeft)
        inner = form.inner
        pairs = 0
        for item, c in delta.items():
            k, v = _pair(item)
            for _ in range(c):
                pairs += 1
                match = self._find(k)
                if match is _MISSING:
                    log.warning("deletion for key %r that is not in the state", k)
                    continue
                old = self.entries[match]
                if old == v:
                    del self.entries[match]
                    new = None
                else:
                    new = merge(inner, old, v, self.keys)
                    self.entries[match] = new
                if on_change is not None:
                    on_change(match, old, new)
        return pairs

    def diffuse(self, delta: Bag, inner: MergeForm) -> Bag:
        """Right-outer merge ``state ⊗̂ delta`` without changing the state."""
        out: dict = {}
        for item, c in delta.items():
            k, v = _pair(item)
            match = self._find(k)
            value = v if match is _MISSING else merge(inner, self.entries[match], v, self.keys)
            pair = (k, value)
            out[pair] = out.get(pair, 0) + c
        return Bag._trusted(out)

    def _find(self, k: Any) -> Any:
        if k in self.entries:
            return k
        if self.keys.approximate:
            for existing in self.entries:
                if self.keys.same(existing, k):
                    return existing
        return _MISSING


_MISSING = object()

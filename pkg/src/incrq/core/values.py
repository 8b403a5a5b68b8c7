"""Runtime values: atoms, tuples and counted bags.

Atoms are plain Python ``int``, ``float``, ``str`` and ``bool``; the unit value
is the empty tuple ``()``. Tuples are Python tuples (named tuples are accepted
and compare structurally). Bags are immutable counted multisets.

Hashing inside bags uses Python equality, so ``1``, ``1.0`` and ``True`` share
a slot. The type-aware comparisons live in :func:`canonical_key` and
:func:`bag_equals`.
"""

from __future__ import annotations

import json
import math
from typing import Any, Iterable, Iterator, Mapping

from incrq.errors import EvalError

UNIT = ()

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class Bag:
    """Immutable multiset with element multiplicities.

    Iteration yields each element as many times as it occurs. Use
    :meth:`items` to walk ``(element, count)`` pairs instead.
    """

    __slots__ = ("_counts", "_hash", "_size", "_index")

    def __init__(self, items: Iterable[Any] = ()):
        counts: dict[Any, int] = {}
        get = counts.get
        for item in items:
            counts[item] = get(item, 0) + 1
        self._counts = counts
        self._hash: int | None = None
        self._size: int | None = None
        self._index: dict | None = None

    @classmethod
    def from_counts(cls, counts: Mapping[Any, int]) -> "Bag":
        """Build a bag from ``element -> multiplicity``; non-positive counts are dropped."""
        bag = cls.__new__(cls)
        bag._counts = {k: c for k, c in counts.items() if c > 0}
        bag._hash = None
        bag._size = None
        bag._index = None
        return bag

    @classmethod
    def _trusted(cls, counts: dict[Any, int]) -> "Bag":
        # caller guarantees every count is positive and gives up ownership
        bag = cls.__new__(cls)
        bag._counts = counts
        bag._hash = None
        bag._size = None
        bag._index = None
        return bag

    def items(self) -> Iterable[tuple[Any, int]]:
        return self._counts.items()

    def distinct(self) -> Iterable[Any]:
        return self._counts.keys()

    def count(self, item: Any) -> int:
        return self._counts.get(item, 0)

    def counts(self) -> dict[Any, int]:
        """A fresh mutable copy of the multiplicity map."""
        return dict(self._counts)

    def __iter__(self) -> Iterator[Any]:
        for item, c in self._counts.items():
            for _ in range(c):
                yield item

    def __len__(self) -> int:
        if self._size is None:
            self._size = sum(self._counts.values())
        return self._size

    def __bool__(self) -> bool:
        return bool(self._counts)

    def __contains__(self, item: Any) -> bool:
        return item in self._counts

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Bag):
            return NotImplemented
        return self._counts == other._counts

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))
        return self._hash

    def __repr__(self) -> str:
        return to_text(self)

    def union(self, other: "Bag") -> "Bag":
        if not other._counts:
            return self
        if not self._counts:
            return other
        merged = dict(self._counts)
        get = merged.get
        for item, c in other._counts.items():
            merged[item] = get(item, 0) + c
        return Bag._trusted(merged)

    def difference(self, other: "Bag") -> tuple["Bag", int]:
        """Multiset difference; returns the result and the total clamped deficit."""
        result = dict(self._counts)
        deficit = 0
        for item, c in other._counts.items():
            have = result.get(item, 0)
            if have > c:
                result[item] = have - c
            else:
                deficit += c - have
                result.pop(item, None)
        return Bag._trusted(result), deficit

    def keyed_index(self) -> dict:
        """Cached ``key -> value`` map for bags of pairs (first match wins)."""
        if self._index is None:
            index: dict = {}
            for item in self._counts:
                if isinstance(item, tuple) and len(item) >= 2:
                    index.setdefault(item[0], item[1])
            self._index = index
        return self._index


EMPTY_BAG = Bag()


def bag_of(*items: Any) -> Bag:
    return Bag(items)


def is_pair(v: Any) -> bool:
    return isinstance(v, tuple) and len(v) == 2


def check_int64(value: Any) -> Any:
    """Reject integers outside the signed 64-bit range."""
    if type(value) is int and not (INT64_MIN <= value <= INT64_MAX):
        raise OverflowError(f"integer overflow: {value} exceeds 64-bit range")
    return value


_TAG_UNIT, _TAG_BOOL, _TAG_INT, _TAG_FLOAT, _TAG_STR, _TAG_TUPLE, _TAG_BAG = range(7)


def type_tag(v: Any) -> int:
    if isinstance(v, bool):
        return _TAG_BOOL
    if isinstance(v, int):
        return _TAG_INT
    if isinstance(v, float):
        return _TAG_FLOAT
    if isinstance(v, str):
        return _TAG_STR
    if isinstance(v, tuple):
        return _TAG_UNIT if len(v) == 0 else _TAG_TUPLE
    if isinstance(v, Bag):
        return _TAG_BAG
    raise EvalError(f"not a value: {v!r}")


def canonical_key(v: Any) -> tuple:
    """Total order key: type tag first, then structure."""
    tag = type_tag(v)
    if tag == _TAG_UNIT:
        return (tag,)
    if tag in (_TAG_BOOL, _TAG_INT, _TAG_STR):
        return (tag, v)
    if tag == _TAG_FLOAT:
        # NaN sorts last so the order stays total
        return (tag, math.isnan(v), 0.0 if math.isnan(v) else v)
    if tag == _TAG_TUPLE:
        return (tag, len(v), tuple(canonical_key(x) for x in v))
    return (tag, tuple(sorted((canonical_key(x), c) for x, c in v.items())))


def canonical_items(bag: Bag) -> list[Any]:
    """Bag elements with multiplicity, in canonical order."""
    ordered = sorted(bag.items(), key=lambda ic: canonical_key(ic[0]))
    out: list[Any] = []
    for item, c in ordered:
        out.extend([item] * c)
    return out


def to_text(v: Any) -> str:
    """Canonical text form: literals, ``(a,b)`` tuples and ``{a,b}`` bags."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, tuple):
        return "(" + ",".join(to_text(x) for x in v) + ")"
    if isinstance(v, Bag):
        return "{" + ",".join(to_text(x) for x in canonical_items(v)) + "}"
    raise EvalError(f"not a value: {v!r}")


def _atoms_equal(a: Any, b: Any, tol: float) -> bool:
    ta, tb = type_tag(a), type_tag(b)
    if ta != tb:
        return False
    if ta == _TAG_FLOAT:
        if math.isnan(a) or math.isnan(b):
            return math.isnan(a) and math.isnan(b)
        return a == b or abs(a - b) <= tol
    return a == b


def bag_equals(a: Any, b: Any, float_tol: float = 0.0) -> bool:
    """Structural equality with multiset semantics for bags.

    Floats compare within ``float_tol``; every other atom compares exactly and
    atoms of different types are never equal.
    """
    if float_tol < 0:
        raise ValueError("float_tol must be non-negative")
    return _values_equal(a, b, float_tol)


def _values_equal(a: Any, b: Any, tol: float) -> bool:
    if isinstance(a, Bag) or isinstance(b, Bag):
        if not (isinstance(a, Bag) and isinstance(b, Bag)):
            return False
        return _bags_equal(a, b, tol)
    if isinstance(a, tuple) or isinstance(b, tuple):
        if not (isinstance(a, tuple) and isinstance(b, tuple)) or len(a) != len(b):
            return False
        return all(_values_equal(x, y, tol) for x, y in zip(a, b))
    return _atoms_equal(a, b, tol)


def _bags_equal(a: Bag, b: Bag, tol: float) -> bool:
    if len(a) != len(b):
        return False
    left = canonical_items(a)
    right = canonical_items(b)
    if all(_values_equal(x, y, tol) for x, y in zip(left, right)):
        return True
    if tol == 0.0:
        return False
    # tolerance can reorder near-equal elements; fall back to greedy matching
    unmatched = list(right)
    for x in left:
        for i, y in enumerate(unmatched):
            if _values_equal(x, y, tol):
                unmatched.pop(i)
                break
        else:
            return False
    return True

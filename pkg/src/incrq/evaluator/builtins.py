"""Builtin functions callable from terms via ``Call(name, args)``."""

from __future__ import annotations

import math
from typing import Any, Callable

from incrq.core.values import EMPTY_BAG, Bag, canonical_key
from incrq.errors import EvalError


def _as_bag(v: Any, name: str) -> Bag:
    if not isinstance(v, Bag):
        raise EvalError(f"{name} expects a bag, got {v!r}")
    return v


def strip_lineage(x: Any) -> Bag:
    """``((k, lineage), a) -> (k, a)``: keep only the outermost key."""
    out: dict = {}
    for item, c in _as_bag(x, "strip_lineage").items():
        try:
            (k, _), a = item
        except (TypeError, ValueError):
            raise EvalError(f"strip_lineage expects ((key, lineage), value) pairs, got {item!r}") from None
        pair = (k, a)
        out[pair] = out.get(pair, 0) + c
    return Bag._trusted(out)


def elem(x: Any) -> Any:
    bag = _as_bag(x, "elem")
    if len(bag) != 1:
        raise EvalError(f"malformed state: expected a single element, found {len(bag)}")
    return next(iter(bag.distinct()))


def argmin(fn: Callable[[Any], Any], x: Any) -> Any:
    """Element minimizing ``fn``; ties go to the canonically smallest element."""
    bag = _as_bag(x, "argmin")
    if not bag:
        raise EvalError("argmin of an empty bag")
    return min(bag.distinct(), key=lambda v: (fn(v), canonical_key(v)))


def bag_map(fn: Callable[[Any], Any], x: Any) -> Bag:
    out: dict = {}
    for v, c in _as_bag(x, "map").items():
        w = fn(v)
        out[w] = out.get(w, 0) + c
    return Bag._trusted(out)


def lookup(x: Any, key: Any, default: Any = None) -> Any:
    """Value paired with ``key`` in a bag of pairs, or ``default``."""
    index = _as_bag(x, "lookup").keyed_index()
    if key in index:
        return index[key]
    if default is None:
        raise EvalError(f"lookup: key {key!r} not found")
    return default


def size(x: Any) -> int:
    return len(_as_bag(x, "size"))


def _sqrt(v: Any) -> float:
    if v < 0:
        raise EvalError(f"sqrt of negative number {v!r}")
    return math.sqrt(v)


def _float(v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(f"float expects a number, got {v!r}")
    return float(v)


def _int(v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(f"int expects a number, got {v!r}")
    return int(v)


def _flatten(x: Any) -> Bag:
    out: Bag = EMPTY_BAG
    for v, c in _as_bag(x, "flatten").items():
        inner = _as_bag(v, "flatten")
        for _ in range(c):
            out = out.union(inner)
    return out


BUILTINS: dict[str, Callable[..., Any]] = {
    "strip_lineage": strip_lineage,
    "elem": elem,
    "argmin": argmin,
    "map": bag_map,
    "lookup": lookup,
    "size": size,
    "flatten": _flatten,
    "sqrt": _sqrt,
    "abs": abs,
    "float": _float,
    "int": _int,
    "min": min,
    "max": max,
}

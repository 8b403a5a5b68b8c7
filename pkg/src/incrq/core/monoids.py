"""Monoids and derived merge forms.

A merge form is anything :func:`merge` knows how to apply to two values. The
monoids (``Union``, ``Sum``, ``Prod``, ``And``, ``Or``, ``Box``, ``Lifted``,
``Product``) are merge forms with an identity. ``DownRight`` and ``DownLeft``
are the outer-join variants used for iteration and deletions, and ``Diff`` /
``BagDiff`` undo ``Sum`` / ``Union``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable

from incrq.core.values import EMPTY_BAG, Bag, check_int64, type_tag
from incrq.errors import BoxConflict, DeletionError, MonoidError

log = logging.getLogger("incrq.monoids")


class MergeForm:
    """Base for every binary merge operation."""

    __slots__ = ()


class Monoid(MergeForm):
    """Merge form that also has an identity (except ``Box``)."""

    __slots__ = ()


@dataclass(frozen=True)
class Union(Monoid):
    def __str__(self) -> str:
        return "⊎"


@dataclass(frozen=True)
class Sum(Monoid):
    def __str__(self) -> str:
        return "+"


@dataclass(frozen=True)
class Prod(Monoid):
    def __str__(self) -> str:
        return "*"


@dataclass(frozen=True)
class And(Monoid):
    def __str__(self) -> str:
        return "and"


@dataclass(frozen=True)
class Or(Monoid):
    def __str__(self) -> str:
        return "or"


@dataclass(frozen=True)
class Box(Monoid):
    def __str__(self) -> str:
        return "□"


@dataclass(frozen=True)
class Lifted(Monoid):
    """Full outer join of keyed bags that merges same-key values with ``inner``."""

    inner: MergeForm

    def __str__(self) -> str:
        return f"⇑{_wrap(self.inner)}"


@dataclass(frozen=True, init=False)
class Product(Monoid):
    """Componentwise merge of tuples; ``parts[i]`` merges component ``i``."""

    parts: tuple

    def __init__(self, *parts: MergeForm):
        if len(parts) == 1 and isinstance(parts[0], tuple):
            parts = parts[0]
        if len(parts) < 2:
            raise MonoidError("a product monoid needs at least two components")
        object.__setattr__(self, "parts", tuple(parts))

    @property
    def left(self) -> MergeForm:
        return self.parts[0]

    @property
    def right(self) -> MergeForm:
        return self.parts[1] if len(self.parts) == 2 else Product(*self.parts[1:])

    def __str__(self) -> str:
        return "(" + "×".join(_wrap(p) for p in self.parts) + ")"


@dataclass(frozen=True)
class Diff(MergeForm):
    """Numeric subtraction, the inverse of ``Sum``."""

    def __str__(self) -> str:
        return "−"


@dataclass(frozen=True)
class BagDiff(MergeForm):
    """Multiset difference, the inverse of ``Union``."""

    def __str__(self) -> str:
        return "∖"


@dataclass(frozen=True)
class DownRight(MergeForm):
    """Right-outer join: merged matches plus right-only pairs."""

    inner: MergeForm

    def __str__(self) -> str:
        return f"⇓→{_wrap(self.inner)}"


@dataclass(frozen=True)
class DownLeft(MergeForm):
    """Left-outer join that drops matches whose values are equal."""

    inner: MergeForm

    def __str__(self) -> str:
        return f"⇓←{_wrap(self.inner)}"


@dataclass(frozen=True, init=False)
class ProductForm(MergeForm):
    """Componentwise tuple merge for forms that are not monoids."""

    parts: tuple

    def __init__(self, *parts: MergeForm):
        if len(parts) == 1 and isinstance(parts[0], tuple):
            parts = parts[0]
        object.__setattr__(self, "parts", tuple(parts))

    def __str__(self) -> str:
        return "(" + "×".join(_wrap(p) for p in self.parts) + ")"


def _wrap(m: MergeForm) -> str:
    text = str(m)
    return text if len(text) <= 2 or text.startswith("(") else f"({text})"


UNION = Union()
SUM = Sum()
PROD = Prod()
AND = And()
OR = Or()
BOX = Box()
DIFF = Diff()
BAG_DIFF = BagDiff()


# ---------------------------------------------------------------------------
# key matching


class KeyMatcher:
    """Exact structural key equality (floats compared bit for bit)."""

    approximate = False

    def same(self, a: Any, b: Any) -> bool:
        return a == b


class ApproxKeys(KeyMatcher):
    """Keys match when every float component differs by at most ``epsilon``."""

    approximate = True

    def __init__(self, epsilon: float):
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        self.epsilon = epsilon

    def same(self, a: Any, b: Any) -> bool:
        return _approx_equal(a, b, self.epsilon)


def _approx_equal(a: Any, b: Any, eps: float) -> bool:
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_approx_equal(x, y, eps) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            if isinstance(a, bool) or isinstance(b, bool):
                return a == b
            return abs(a - b) <= eps
        return False
    return a == b


EXACT_KEYS = KeyMatcher()


# ---------------------------------------------------------------------------
# zero and merge


def monoid_zero(m: MergeForm) -> Any:
    """Identity element of ``m``."""
    if isinstance(m, (Union, Lifted)):
        return EMPTY_BAG
    if isinstance(m, Sum):
        return 0
    if isinstance(m, Prod):
        return 1
    if isinstance(m, And):
        return True
    if isinstance(m, Or):
        return False
    if isinstance(m, Product):
        return tuple(monoid_zero(p) for p in m.parts)
    if isinstance(m, Box):
        raise MonoidError("no identity for invariant monoid")
    raise MonoidError(f"{m} is not a monoid and has no identity")


def _number(v: Any, form: MergeForm) -> Any:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"{form} expects numbers, got {v!r}")
    return v


def _boolean(v: Any, form: MergeForm) -> bool:
    if not isinstance(v, bool):
        raise TypeError(f"{form} expects booleans, got {v!r}")
    return v


def _bag(v: Any, form: MergeForm) -> Bag:
    if not isinstance(v, Bag):
        raise TypeError(f"{form} expects a bag, got {v!r}")
    return v


def _tuple(v: Any, n: int, form: MergeForm) -> tuple:
    if not isinstance(v, tuple) or len(v) != n:
        raise TypeError(f"{form} expects a {n}-tuple, got {v!r}")
    return v


def monoid_merge(m: MergeForm, a: Any, b: Any, keys: KeyMatcher = EXACT_KEYS) -> Any:
    """Merge ``a`` and ``b`` with ``m``; ``keys`` controls lifted key matching."""
    return merge(m, a, b, keys)


def merge(form: MergeForm, a: Any, b: Any, keys: KeyMatcher = EXACT_KEYS) -> Any:
    if isinstance(form, Sum):
        return check_int64(_number(a, form) + _number(b, form))
    if isinstance(form, Union):
        return _bag(a, form).union(_bag(b, form))
    if isinstance(form, Lifted):
        return _keyed_merge(form.inner, a, b, "full", keys)
    if isinstance(form, Product):
        n = len(form.parts)
        _tuple(a, n, form)
        _tuple(b, n, form)
        return tuple(merge(p, x, y) for p, x, y in zip(form.parts, a, b))
    if isinstance(form, Box):
        if a == b and type_tag(a) == type_tag(b):
            return a
        raise BoxConflict(a, b)
    if isinstance(form, Prod):
        return check_int64(_number(a, form) * _number(b, form))
    if isinstance(form, And):
        return _boolean(a, form) and _boolean(b, form)
    if isinstance(form, Or):
        return _boolean(a, form) or _boolean(b, form)
    if isinstance(form, Diff):
        result = check_int64(_number(a, form) - _number(b, form))
        if a >= 0 and result < 0:
            log.warning("negative aggregate after deletion: %r - %r", a, b)
        return result
    if isinstance(form, BagDiff):
        result, deficit = _bag(a, form).difference(_bag(b, form))
        if deficit:
            log.warning("deletion removed %d elements that were not present", deficit)
        return result
    if isinstance(form, DownRight):
        return _keyed_merge(form.inner, a, b, "right", keys)
    if isinstance(form, DownLeft):
        return _keyed_merge(form.inner, a, b, "left", keys)
    if isinstance(form, ProductForm):
        n = len(form.parts)
        _tuple(a, n, form)
        _tuple(b, n, form)
        return tuple(merge(p, x, y) for p, x, y in zip(form.parts, a, b))
    raise MonoidError(f"unknown merge form {form!r}")


def merge_down_right(inner: MergeForm, x: Bag, y: Bag, keys: KeyMatcher = EXACT_KEYS) -> Bag:
    """Matched keys merged with ``inner``; right-only pairs kept; left-only dropped."""
    return _keyed_merge(inner, x, y, "right", keys)


def merge_down_left(inner: MergeForm, x: Bag, y: Bag, keys: KeyMatcher = EXACT_KEYS) -> Bag:
    """Matched unequal values merged with ``inner``; equal matches dropped; left-only kept."""
    return _keyed_merge(inner, x, y, "left", keys)


def _group_by_key(bag: Bag, form: MergeForm) -> tuple[dict, bool]:
    groups: dict[Any, list] = {}
    unique = True
    for item, c in _bag(bag, form).items():
        if not isinstance(item, tuple) or len(item) != 2:
            raise TypeError(f"{form} expects key-value pairs, got {item!r}")
        k = item[0]
        slot = groups.get(k)
        if slot is None:
            groups[k] = [(item[1], c)]
            if c > 1:
                unique = False
        else:
            slot.append((item[1], c))
            unique = False
    return groups, unique


def _keyed_merge(inner: MergeForm, x: Any, y: Any, mode: str, keys: KeyMatcher) -> Bag:
    form: MergeForm = {"full": Lifted, "right": DownRight, "left": DownLeft}[mode](inner)
    gx, _ = _group_by_key(x, form)
    gy, _ = _group_by_key(y, form)
    out: dict[Any, int] = {}

    def emit(k: Any, v: Any, c: int) -> None:
        pair = (k, v)
        out[pair] = out.get(pair, 0) + c

    if keys.approximate:
        match = _approximate_matches(gx, gy, keys)
    else:
        match = {k: k for k in gy if k in gx}

    matched_x = set(match.values())
    for ky, xs_key in match.items():
        for va, ca in gx[xs_key]:
            for vb, cb in gy[ky]:
                if mode == "left" and va == vb:
                    continue
                # approximate matches take the newer (right-hand) key
                emit(ky, merge(inner, va, vb, keys), ca * cb)
    if mode in ("full", "left"):
        for k, vals in gx.items():
            if k not in matched_x:
                for v, c in vals:
                    emit(k, v, c)
    if mode in ("full", "right"):
        for k, vals in gy.items():
            if k not in match:
                for v, c in vals:
                    emit(k, v, c)
    return Bag._trusted(out)


def _approximate_matches(gx: dict, gy: dict, keys: KeyMatcher) -> dict:
    taken: set = set()
    match: dict = {}
    xkeys = list(gx)
    for ky in gy:
        if ky in gx and ky not in taken:
            match[ky] = ky
            taken.add(ky)
            continue
        for kx in xkeys:
            if kx not in taken and keys.same(kx, ky):
                match[ky] = kx
                taken.add(kx)
                break
    return match


def reduce_values(m: MergeForm, items: Any) -> Any:
    """Fold a bag with ``m``; the empty bag folds to the identity."""
    bag = _bag(items, m)
    if isinstance(m, Lifted):
        return _reduce_lifted(m, bag)
    if isinstance(m, Sum):
        total = 0
        for v, c in bag.items():
            total = check_int64(total + _number(v, m) * c)
        return total
    if isinstance(m, Union):
        acc: dict[Any, int] = {}
        for v, c in bag.items():
            for w, d in _bag(v, m).items():
                acc[w] = acc.get(w, 0) + c * d
        return Bag._trusted(acc)
    if not bag:
        return monoid_zero(m)
    acc_value: Any = None
    first = True
    for v, c in bag.items():
        for _ in range(c):
            if first:
                acc_value, first = v, False
            else:
                acc_value = merge(m, acc_value, v)
    return acc_value


def _reduce_lifted(m: Lifted, bag: Bag) -> Bag:
    # each pair is read as the singleton keyed bag {pair}
    acc: dict[Any, Any] = {}
    for pair, c in bag.items():
        if not isinstance(pair, tuple) or len(pair) != 2:
            raise TypeError(f"{m} expects key-value pairs, got {pair!r}")
        k, v = pair
        for _ in range(c):
            if k in acc:
                acc[k] = merge(m.inner, acc[k], v)
            else:
                acc[k] = v
    out: dict[Any, int] = {}
    for k, v in acc.items():
        out[(k, v)] = out.get((k, v), 0) + 1
    return Bag._trusted(out)


# ---------------------------------------------------------------------------
# derived forms


def diffusion(m: MergeForm) -> MergeForm:
    """Right-outer variant of a merger used inside iterations."""
    if isinstance(m, Lifted):
        return DownRight(diffusion(m.inner))
    if isinstance(m, Product):
        return ProductForm(*(diffusion(p) for p in m.parts))
    return m


def diminisher(m: MergeForm) -> MergeForm:
    """Merge form that removes a previously merged contribution."""
    if isinstance(m, Union):
        return BAG_DIFF
    if isinstance(m, Sum):
        return DIFF
    if isinstance(m, Box):
        return BOX
    if isinstance(m, Product):
        return ProductForm(*(diminisher(p) for p in m.parts))
    if isinstance(m, Lifted):
        return DownLeft(diminisher(m.inner))
    raise DeletionError(f"query does not support deletions (no inverse for {m})")


def is_monoid(m: MergeForm) -> bool:
    return isinstance(m, Monoid)


MergeFn = Callable[[Any, Any], Any]

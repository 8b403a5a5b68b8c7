"""Normalization of algebra terms.

The normalized grammar is::

    q ::= reduce(m, c) | c
    c ::= cMap(f, e)
    e ::= groupBy(c) | coGroup(c, c) | source

Cascaded cMaps are fused first, then identity cMaps are inserted wherever a
groupBy/coGroup input or the root lacks one. A ``Var`` standing for a bag is
accepted wherever a source is (loop variables of ``repeat`` bodies), and a
``repeat`` at the root is normalized componentwise.
"""

from __future__ import annotations

from incrq.errors import TermError
from incrq.evaluator import terms as T
from incrq.evaluator.pretty import pretty

__all__ = ["fuse_cmaps", "is_normalized", "normalize", "check_function_bodies"]


def check_function_bodies(term: T.Term) -> None:
    """Reject sources referenced from inside a function body, and transformed nodes."""
    _check(term, (), in_lambda=False)


def _check(t: T.Term, path: tuple, in_lambda: bool) -> None:
    if isinstance(t, T.TRANSFORMED_NODES):
        raise TermError(f"{type(t).__name__} is not allowed in a query", path, pretty(t))
    if isinstance(t, T.Source) and in_lambda:
        raise TermError("function body references a source", path, pretty(t))
    if isinstance(t, T.Repeat):
        # the step body is an algebra term over the loop variable
        if not isinstance(t.fn, T.Lambda):
            raise TermError("repeat step must be a lambda", path + ("fn",), pretty(t.fn))
        _check(t.fn.body, path + ("fn", "body"), in_lambda)
        _check(t.init, path + ("init",), in_lambda)
        return
    for label, child in t.children():
        _check(child, path + (label,), in_lambda or isinstance(t, T.Lambda))


# ---------------------------------------------------------------------------
# cMap fusion


def fuse_cmaps(term: T.Term) -> T.Term:
    """Fuse every ``cMap(f, cMap(g, X))`` at the algebra level, innermost first."""
    fresh = T.FreshNames(T.used_names(term), prefix="v")
    return _fuse(term, fresh)


def _fuse(t: T.Term, fresh: T.FreshNames) -> T.Term:
    if isinstance(t, T.CMap):
        inner = _fuse(t.input, fresh)
        if isinstance(inner, T.CMap):
            return T.CMap(_compose(t.fn, inner.fn, fresh), inner.input)
        return t if inner is t.input else T.CMap(t.fn, inner)
    if isinstance(t, T.GroupBy):
        inner = _fuse(t.input, fresh)
        return t if inner is t.input else T.GroupBy(inner)
    if isinstance(t, T.CoGroup):
        left, right = _fuse(t.left, fresh), _fuse(t.right, fresh)
        return t if (left is t.left and right is t.right) else T.CoGroup(left, right)
    if isinstance(t, T.Reduce):
        inner = _fuse(t.input, fresh)
        return t if inner is t.input else T.Reduce(t.monoid, inner)
    if isinstance(t, T.Repeat) and isinstance(t.fn, T.Lambda):
        body = _fuse(t.fn.body, fresh)
        init = _fuse(t.init, fresh)
        if body is t.fn.body and init is t.init:
            return t
        return T.Repeat(T.Lambda(t.fn.param, body), t.count, init)
    return t


def _compose(f: T.Term, g: T.Term, fresh: T.FreshNames) -> T.Lambda:
    """``λx. cMap(f, g(x))``, reusing g's own parameter when that is capture-free."""
    if isinstance(g, T.Lambda) and not (set(T.pattern_names(g.param)) & T.free_vars(f)):
        return T.Lambda(g.param, T.CMap(f, g.body))
    v = fresh()
    return T.Lambda(v, T.CMap(f, T.Apply(g, T.Var(v))))


# ---------------------------------------------------------------------------
# grammar


def normalize(term: T.Term) -> T.Term:
    """Fuse cascaded cMaps and insert identity cMaps so the result fits the grammar."""
    check_function_bodies(term)
    fused = fuse_cmaps(term)
    names = T.FreshNames(T.used_names(fused), prefix="x")
    if isinstance(fused, T.Repeat):
        return _norm_repeat(fused, names, ())
    return _norm_q(fused, names, ())


def _norm_repeat(t: T.Repeat, names: T.FreshNames, path: tuple) -> T.Repeat:
    step = t.fn
    assert isinstance(step, T.Lambda)
    body = _norm_q(step.body, names, path + ("fn", "body"))
    init = t.init
    if _is_algebra(init):
        init = _norm_q(init, names, path + ("init",))
    if body == step.body and init == t.init:
        return t
    return T.Repeat(T.Lambda(step.param, body), t.count, init)


def _is_algebra(t: T.Term) -> bool:
    return isinstance(t, (T.Source, T.CMap, T.GroupBy, T.CoGroup, T.Reduce))


def _norm_q(t: T.Term, names: T.FreshNames, path: tuple) -> T.Term:
    if isinstance(t, T.Reduce):
        inner = _norm_c(t.input, names, path + ("input",))
        return t if inner is t.input else T.Reduce(t.monoid, inner)
    return _norm_c(t, names, path)


def _identity(names: T.FreshNames) -> T.Lambda:
    return T.identity_fn(names())


def _norm_c(t: T.Term, names: T.FreshNames, path: tuple) -> T.Term:
    if isinstance(t, T.CMap):
        inner = _norm_e(t.input, names, path + ("input",))
        return t if inner is t.input else T.CMap(t.fn, inner)
    return T.CMap(_identity(names), _norm_e(t, names, path))


def _norm_e(t: T.Term, names: T.FreshNames, path: tuple) -> T.Term:
    if isinstance(t, (T.Source, T.Var)):
        return t
    if isinstance(t, T.GroupBy):
        inner = _norm_c(t.input, names, path + ("input",))
        return t if inner is t.input else T.GroupBy(inner)
    if isinstance(t, T.CoGroup):
        left = _norm_c(t.left, names, path + ("left",))
        right = _norm_c(t.right, names, path + ("right",))
        return t if (left is t.left and right is t.right) else T.CoGroup(left, right)
    raise TermError("term is not expressible in the normalized grammar", path, pretty(t))


def is_normalized(term: T.Term) -> bool:
    """Structural check of the normalized grammar (``repeat`` checked componentwise)."""
    if isinstance(term, T.Repeat):
        return isinstance(term.fn, T.Lambda) and _is_q(term.fn.body)
    return _is_q(term)


def _is_q(t: T.Term) -> bool:
    if isinstance(t, T.Reduce):
        return _is_c(t.input)
    return _is_c(t)


def _is_c(t: T.Term) -> bool:
    return isinstance(t, T.CMap) and _is_e(t.input)


def _is_e(t: T.Term) -> bool:
    if isinstance(t, (T.Source, T.Var)):
        return True
    if isinstance(t, T.GroupBy):
        return _is_c(t.input)
    if isinstance(t, T.CoGroup):
        return _is_c(t.left) and _is_c(t.right)
    return False

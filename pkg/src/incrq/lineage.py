"""Lineage annotation of normalized queries, plus merger and answer derivation.

``annotate`` rewrites a normalized query so every output value carries the
tree of groupBy/coGroup keys that produced it, encoded as nested tuples
``()``, ``(k, θ)`` and ``(k, (θx, θy))``. The annotated term is a homomorphism
whenever its map bodies are; ``merger_monoid`` and ``answer_function`` then give
the state merge and the function that turns a state back into the query result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from incrq.core.monoids import UNION, Lifted, MergeForm, Union
from incrq.errors import TermError
from incrq.evaluator import terms as T
from incrq.evaluator.pretty import pretty
from incrq.normalizer import is_normalized

UNIT_LINEAGE = T.Const(())


@dataclass(frozen=True)
class CompiledQuery:
    """A query split into homomorphism ``h``, merge monoid and answer function."""

    h: T.Term
    merger: MergeForm
    answer: T.Lambda
    original: T.Term
    wrapper: T.Lambda | None = None
    notes: tuple = field(default_factory=tuple)


def _is_stream(t: T.Term) -> bool:
    return isinstance(t, (T.Source, T.Var))


def _fresh_for(*terms: T.Term) -> T.FreshNames:
    names: set[str] = set()
    for t in terms:
        names |= T.used_names(t)
    return T.FreshNames(names, prefix="a")


def unit_tagged(f: T.Term) -> T.Lambda:
    """``λa. cMap(λb.{((), b)}, f(a))``: tag every output of ``f`` with the empty lineage."""
    fresh = _fresh_for(f)
    b = fresh("b")
    tag = T.Lambda(b, T.Singleton(T.TupleE((UNIT_LINEAGE, T.Var(b)))))
    if isinstance(f, T.Lambda):
        return T.Lambda(f.param, T.CMap(tag, f.body))
    a = fresh("a")
    return T.Lambda(a, T.CMap(tag, T.Apply(f, T.Var(a))))


def annotate(q: T.Term) -> T.Term:
    """Rewrite a normalized query to propagate its lineage."""
    if not is_normalized(q) or isinstance(q, T.Repeat):
        raise TermError("annotate expects a normalized query", (), pretty(q))
    return _ann_q(q)


def _ann_q(q: T.Term) -> T.Term:
    if isinstance(q, T.Reduce):
        c = q.input
        assert isinstance(c, T.CMap)
        if _is_stream(c.input):
            # the total lands under the empty lineage; see answer_function for the empty case
            return T.Reduce(Lifted(q.monoid), T.CMap(unit_tagged(c.fn), c.input))
        return T.Reduce(Lifted(q.monoid), T.SMap1(c.fn, _ann_e(c.input)))
    assert isinstance(q, T.CMap)
    if _is_stream(q.input):
        return T.CMap(unit_tagged(q.fn), q.input)
    return T.SMap1(q.fn, _ann_e(q.input))


def _ann_e(e: T.Term) -> T.Term:
    if isinstance(e, T.GroupBy):
        return T.GroupBy(T.Swap(_ann_c(e.input)))
    if isinstance(e, T.CoGroup):
        return T.Mix(T.CoGroup(_ann_c(e.left), _ann_c(e.right)))
    raise TermError("unexpected term in grouping position", (), pretty(e))


def _ann_c(c: T.Term) -> T.Term:
    assert isinstance(c, T.CMap)
    if _is_stream(c.input):
        return T.SMap3(c.fn, c.input)
    return T.SMap2(c.fn, _ann_e(c.input))


# ---------------------------------------------------------------------------
# query shape


def query_case(q: T.Term) -> str:
    """``"source"``, ``"reduce"`` or ``"deep"``: which answer equation applies."""
    if isinstance(q, T.Reduce):
        return "reduce"
    if isinstance(q, T.CMap) and _is_stream(q.input):
        return "source"
    if isinstance(q, T.CMap):
        return "deep"
    return "other"


def merger_monoid(q: T.Term, h_monoid: MergeForm) -> MergeForm:
    """Merge monoid of the annotated query, checked against the query shape."""
    case = query_case(q)
    if case == "reduce":
        assert isinstance(q, T.Reduce)
        expected = Lifted(q.monoid)
        if h_monoid != expected:
            raise TermError(f"reduce-headed query should merge with {expected}, inferred {h_monoid}")
        return expected
    if case == "source":
        if not isinstance(h_monoid, Union):
            raise TermError(f"source map should merge with ⊎, inferred {h_monoid}")
        return UNION
    if case == "deep":
        if not isinstance(h_monoid, (Lifted, Union)):
            raise TermError(f"annotated query should merge with a lifted monoid, inferred {h_monoid}")
        return h_monoid
    raise TermError("query shape has no merger", (), pretty(q))


def _map_call(fn: T.Term, bag: T.Term) -> T.Term:
    return T.Call("map", (fn, bag))


def answer_function(
    q: T.Term,
    merger: MergeForm,
    wrapper: T.Lambda | None = None,
    inner_merger: MergeForm | None = None,
) -> T.Lambda:
    """Function from a state to the query result.

    ``wrapper`` is the non-homomorphic remainder pulled out by factoring; it is
    applied to every value after the lineage has been folded away.
    ``inner_merger`` is set when that remainder had to cross a reduce head: the
    state then holds the pre-wrapper values, which are first merged by their
    outermost key, unwrapped, and only then reduced.
    """
    x = "state"
    if wrapper is not None:
        x = _fresh_for(wrapper)("state")
    state = T.Var(x)
    case = query_case(q)
    if case == "source":
        body: T.Term = T.Proj(state, 1)
        if wrapper is not None:
            body = _map_call(wrapper, body)
        return T.Lambda(x, body)
    if case == "reduce":
        assert isinstance(q, T.Reduce)
        if wrapper is not None:
            if inner_merger is None:
                raise TermError("a remainder crossing a reduce needs the inner merger")
            grouped = T.Proj(T.Reduce(inner_merger, T.Call("strip_lineage", (state,))), 1)
            return T.Lambda(x, T.Reduce(q.monoid, _map_call(wrapper, grouped)))
        return T.Lambda(x, T.Reduce(q.monoid, T.Proj(state, 1)))
    if case == "deep":
        if isinstance(merger, Union):
            body = T.Proj(state, 1)
        else:
            body = T.Proj(T.Reduce(merger, T.Call("strip_lineage", (state,))), 1)
        if wrapper is not None:
            body = _map_call(wrapper, body)
        return T.Lambda(x, body)
    assert isinstance(merger, Lifted)
    return T.Lambda(x, T.Proj(T.Call("elem", (T.Reduce(merger, state),)), 1))

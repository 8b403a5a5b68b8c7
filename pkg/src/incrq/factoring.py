"""Pull non-homomorphic computation out of an annotated term.

A failing ``sMap1`` body ``{e}`` is rewritten so the map emits only the largest
inferable pieces of ``e`` and a ``kMap`` rebuilds ``e`` from them. kMaps are
then pushed towards the root and the root chain is detached into a wrapper
function that the answer applies after folding away the lineage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from incrq.core.monoids import BOX, Lifted, MergeForm, Product
from incrq.errors import NotIncrementalizable
from incrq.evaluator import terms as T
from incrq.evaluator.pretty import pretty
from incrq.inference import Failure, Inferred, bind_pattern, infer

__all__ = ["FactoredTerm", "Extraction", "factor", "kmap_measure", "pull_kmaps", "split_non_hom", "extract"]

_MAX_ROUNDS = 16


@dataclass(frozen=True)
class FactoredTerm:
    """``hom`` is inference-clean; ``wrapper`` (if any) maps each result value."""

    hom: T.Term
    wrapper: T.Lambda | None = None
    crossed_reduce: bool = False
    inner_merger: MergeForm | None = None
    decisions: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class Extraction:
    emit: T.Term | None  # what the homomorphic map now computes
    pattern: T.Pattern | None  # how the wrapper binds it
    template: T.Term  # how the wrapper rebuilds the original expression


# ---------------------------------------------------------------------------
# splitting


def extract(e: T.Term, rho: Mapping, fresh: T.FreshNames) -> Extraction:
    """Replace the largest inferable subterms of ``e`` by fresh variables."""
    return _Extractor(fresh).run(e, dict(rho))


class _Extractor:
    def __init__(self, fresh: T.FreshNames):
        self.fresh = fresh

    def run(self, e: T.Term, rho: dict) -> Extraction:
        if not T.free_vars(e):
            return Extraction(None, None, e)
        if isinstance(e, T.Lambda):
            # functions are never emitted; their bodies may still hold pieces
            inner = dict(rho)
            for name in T.pattern_names(e.param):
                inner.pop(name, None)
            body = self.run(e.body, inner)
            return Extraction(body.emit, body.pattern, T.Lambda(e.param, body.template))
        if isinstance(infer(rho, e), Inferred):
            v = self.fresh("x")
            return Extraction(e, v, T.Var(v))
        if isinstance(e, T.TupleE):
            subs = [self.run(item, rho) for item in e.items]
            emits = [s for s in subs if s.emit is not None]
            template = T.TupleE(tuple(s.template for s in subs))
            return _combine(emits, template)
        # any other failing node: collect its children's pieces left to right
        parts: list[Extraction] = []
        rebuilt: dict[str, T.Term] = {}
        for label, child in e.children():
            sub = self.run(child, rho)
            rebuilt[label] = sub.template
            if sub.emit is not None:
                parts.append(sub)
        parts, renames = _dedupe(parts)
        template = T.rebuild(e, rebuilt)
        if renames:
            template = _rename_vars(template, renames)
        return _combine(parts, template)


def _dedupe(parts: list[Extraction]) -> tuple[list[Extraction], dict[str, str]]:
    kept: list[Extraction] = []
    renames: dict[str, str] = {}
    for p in parts:
        twin = next((k for k in kept if k.emit == p.emit and isinstance(k.pattern, str)), None)
        if twin is not None and isinstance(p.pattern, str):
            renames[p.pattern] = twin.pattern  # type: ignore[assignment]
        else:
            kept.append(p)
    return kept, renames


def _rename_vars(t: T.Term, renames: dict[str, str]) -> T.Term:
    if isinstance(t, T.Var):
        return T.Var(renames.get(t.name, t.name))
    rebuilt = {label: _rename_vars(child, renames) for label, child in t.children()}
    return T.rebuild(t, rebuilt) if rebuilt else t


def _combine(parts: list[Extraction], template: T.Term) -> Extraction:
    if not parts:
        return Extraction(None, None, template)
    if len(parts) == 1:
        return Extraction(parts[0].emit, parts[0].pattern, template)
    return Extraction(
        T.TupleE(tuple(p.emit for p in parts)),
        tuple(p.pattern for p in parts),
        template,
    )


def split_non_hom(term: T.Term, rho: Mapping, path: tuple = ()) -> T.Term:
    """Split the map at ``path`` (an ``sMap1`` with a failing body) into kMap over sMap1."""
    node = _at(term, path)
    if not isinstance(node, T.SMap1):
        raise NotIncrementalizable(
            f"query not incrementalizable: {type(node).__name__} body is not a homomorphism", path, pretty(node)
        )
    f = node.fn
    if not isinstance(f, T.Lambda) or not isinstance(f.body, T.Singleton):
        raise NotIncrementalizable("query not incrementalizable: map body is not a singleton", path, pretty(node))
    input_monoid = infer(rho, node.input)
    if not isinstance(input_monoid, Inferred) or not isinstance(input_monoid.monoid, Lifted):
        raise NotIncrementalizable("query not incrementalizable: map input has no lifted monoid", path, pretty(node))
    body_rho = bind_pattern(dict(rho), f.param, _key_value(input_monoid.monoid))
    fresh = T.FreshNames(T.used_names(term), prefix="x")
    ex = extract(f.body.expr, body_rho, fresh)
    if ex.emit is None:
        raise NotIncrementalizable(
            "query not incrementalizable: no homomorphic subterm to extract", path + ("fn", "body"), pretty(f.body)
        )
    hom = T.SMap1(T.Lambda(f.param, T.Singleton(ex.emit)), node.input)
    kmap = T.KMap(T.Lambda(ex.pattern, ex.template), hom)
    return _replace(term, path, kmap)


def _key_value(m: Lifted) -> Product:
    return Product(BOX, m.inner)


def _at(t: T.Term, path: tuple) -> T.Term:
    for label in path:
        t = dict(t.children())[label]
    return t


def _replace(t: T.Term, path: tuple, new: T.Term) -> T.Term:
    if not path:
        return new
    kids = dict(t.children())
    kids[path[0]] = _replace(kids[path[0]], path[1:], new)
    return T.rebuild(t, kids)


# ---------------------------------------------------------------------------
# pulling


def _compose(f: T.Term, g: T.Term, fresh: T.FreshNames) -> T.Lambda:
    x = fresh("x")
    return T.Lambda(x, T.Apply(f, T.Apply(g, T.Var(x))))


def _absorb(g: T.Term, f: T.Term, fresh: T.FreshNames) -> T.Lambda:
    """``λ(k,v). g(k, f(v))``"""
    k, v = fresh("k"), fresh("v")
    return T.Lambda((k, v), T.Apply(g, T.TupleE((T.Var(k), T.Apply(f, T.Var(v))))))


def _map_over(f: T.Term, fresh: T.FreshNames) -> T.Lambda:
    s = fresh("s")
    return T.Lambda(s, T.Call("map", (f, T.Var(s))))


def pull_kmaps(term: T.Term) -> T.Term:
    """Apply the kMap pull rules bottom-up until none applies."""
    fresh = T.FreshNames(T.used_names(term), prefix="p")
    current = term
    while True:
        nxt = _pull(current, fresh)
        if nxt == current:
            return current
        current = nxt


def _pull(t: T.Term, fresh: T.FreshNames) -> T.Term:
    if not isinstance(t, T.ALGEBRA_NODES) or isinstance(t, (T.Source, T.Repeat)):
        return t
    kids = {label: (_pull(c, fresh) if label != "fn" else c) for label, c in t.children()}
    t = T.rebuild(t, kids) if kids else t
    if isinstance(t, T.KMap) and isinstance(t.input, T.KMap):
        return T.KMap(_compose(t.fn, t.input.fn, fresh), t.input.input)
    if isinstance(t, (T.SMap1, T.SMap2)) and isinstance(t.input, T.KMap):
        return type(t)(_absorb(t.fn, t.input.fn, fresh), t.input.input)
    if isinstance(t, T.GroupBy) and isinstance(t.input, T.KMap):
        return T.KMap(_map_over(t.input.fn, fresh), T.GroupBy(t.input.input))
    if isinstance(t, T.CoGroup) and (isinstance(t.left, T.KMap) or isinstance(t.right, T.KMap)):
        left, fx = (t.left.input, t.left.fn) if isinstance(t.left, T.KMap) else (t.left, None)
        right, fy = (t.right.input, t.right.fn) if isinstance(t.right, T.KMap) else (t.right, None)
        xs, ys = fresh("xs"), fresh("ys")
        lx: T.Term = T.Call("map", (fx, T.Var(xs))) if fx is not None else T.Var(xs)
        ly: T.Term = T.Call("map", (fy, T.Var(ys))) if fy is not None else T.Var(ys)
        return T.KMap(T.Lambda((xs, ys), T.TupleE((lx, ly))), T.CoGroup(left, right))
    return t


def kmap_measure(term: T.Term) -> int:
    """Sum over kMap nodes of their algebra-node depth plus one per kMap."""
    total = 0
    for path, node in T.walk(term):
        if isinstance(node, T.KMap):
            total += 1 + sum(1 for label in path if label in ("input", "left", "right"))
    return total


def detach_root(term: T.Term) -> tuple[T.Term, T.Lambda | None, bool]:
    """Strip the root kMap chain (possibly under a reduce); returns (hom, wrapper, crossed)."""
    fresh = T.FreshNames(T.used_names(term), prefix="w")
    crossed = False
    reduce_head: T.Reduce | None = None
    body = term
    if isinstance(body, T.Reduce) and isinstance(body.input, T.KMap):
        reduce_head, body, crossed = body, body.input, True
    wrapper: T.Term | None = None
    while isinstance(body, T.KMap):
        wrapper = body.fn if wrapper is None else _compose(wrapper, body.fn, fresh)
        body = body.input
    if wrapper is not None and not isinstance(wrapper, T.Lambda):
        v = fresh("w")
        wrapper = T.Lambda(v, T.Apply(wrapper, T.Var(v)))
    if reduce_head is not None:
        return body, wrapper, crossed  # caller re-wraps with the inner merger
    return body, wrapper, False


# ---------------------------------------------------------------------------
# driver


def factor(term: T.Term, rho: Mapping) -> FactoredTerm:
    """Split failing map bodies and pull the remainder out until ``term`` infers."""
    current = term
    decisions: list[str] = []
    for _ in range(_MAX_ROUNDS):
        probe, wrapper, crossed = detach_root(current)
        result = infer(rho, probe)
        if isinstance(result, Inferred) and not crossed:
            return FactoredTerm(probe, wrapper, False, None, tuple(decisions))
        if isinstance(result, Inferred) and crossed:
            assert isinstance(result.monoid, Lifted)
            inner = result.monoid
            decisions.append(f"remainder crosses the reduce head; state merges with {inner}")
            return FactoredTerm(T.Reduce(inner, probe), wrapper, True, inner, tuple(decisions))
        assert isinstance(result, Failure)
        target = _enclosing_map(current, _lift_path(current, probe, result.location))
        if target is None:
            raise NotIncrementalizable(f"query not incrementalizable: {result.reason}", result.location, result.subterm)
        decisions.append(f"split {'/'.join(target) or '<root>'}: {result.reason} in {result.subterm}")
        current = pull_kmaps(split_non_hom(current, rho, target))
    raise NotIncrementalizable("query not incrementalizable: factoring did not converge", (), pretty(term))


def _lift_path(full: T.Term, probe: T.Term, path: tuple) -> tuple:
    """Translate a path inside the detached probe back to a path inside ``full``."""
    prefix: list[str] = []
    node = full
    while node is not probe:
        if isinstance(node, (T.Reduce, T.KMap)):
            prefix.append("input")
            node = node.input
        else:
            break
    return tuple(prefix) + tuple(path)


def _enclosing_map(term: T.Term, path: tuple) -> tuple | None:
    """Path of the innermost algebra map whose function contains ``path``."""
    best = None
    node = term
    for i, label in enumerate(path):
        if isinstance(node, (T.SMap1, T.SMap2, T.SMap3, T.CMap)) and label == "fn":
            best = path[:i]
            break
        kids = dict(node.children())
        if label not in kids:
            break
        node = kids[label]
    return best

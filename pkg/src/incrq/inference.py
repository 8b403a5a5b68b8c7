"""Monoid inference: certify a term as a homomorphism and name its merge monoid.

The judgment is syntax directed with one rule per constructor, tried after the
invariance short-circuit: a term whose free names are all bound to ``□`` is
itself ``□``. Environments map variable names and ``("source", i)`` keys to
monoids; an unbound name is a failure, never a default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from incrq.core.monoids import BOX, UNION, Box, Lifted, MergeForm, Product, Union
from incrq.errors import InferenceError
from incrq.evaluator import terms as T
from incrq.evaluator.pretty import pretty

MonoidEnv = Mapping[object, MergeForm]


@dataclass(frozen=True)
class Inferred:
    monoid: MergeForm

    @property
    def ok(self) -> bool:
        return True


@dataclass(frozen=True)
class Failure:
    location: tuple
    reason: str
    subterm: str

    @property
    def ok(self) -> bool:
        return False

    def __str__(self) -> str:
        where = "/".join(self.location) or "<root>"
        return f"{self.reason} at {where}: {self.subterm}"


InferenceResult = Inferred | Failure


class _Fail(Exception):
    def __init__(self, path: tuple, reason: str, term: T.Term):
        self.path = path
        self.reason = reason
        self.term = term


def source_env(sources, monoid: MergeForm = UNION, **names: MergeForm) -> dict:
    """Environment binding every source index in ``sources`` to ``monoid``."""
    env: dict = {("source", i): monoid for i in sources}
    env.update(names)
    return env


def infer(rho: MonoidEnv, term: T.Term, *, unrestricted_cogroup: bool = False) -> InferenceResult:
    try:
        return Inferred(_Infer(unrestricted_cogroup).run(term, dict(rho), ()))
    except _Fail as f:
        return Failure(f.path, f.reason, pretty(f.term))


def infer_monoid(rho: MonoidEnv, term: T.Term, *, unrestricted_cogroup: bool = False) -> MergeForm:
    """Like :func:`infer` but raises :class:`InferenceError` on failure."""
    result = infer(rho, term, unrestricted_cogroup=unrestricted_cogroup)
    if isinstance(result, Failure):
        raise InferenceError(result.reason, result.location, result.subterm)
    return result.monoid


def is_inferable(rho: MonoidEnv, term: T.Term) -> bool:
    return isinstance(infer(rho, term), Inferred)


def bind_pattern(rho: dict, pattern: T.Pattern, m: MergeForm, path: tuple = (), term: T.Term | None = None) -> dict:
    """Extend ``rho`` by matching a lambda pattern against a monoid."""
    out = dict(rho)
    _bind(out, pattern, m, path, term)
    return out


def _bind(rho: dict, p: T.Pattern, m: MergeForm, path: tuple, term: T.Term | None) -> None:
    if isinstance(p, str):
        rho[p] = m
        return
    if isinstance(m, Box):
        for name in T.pattern_names(p):
            rho[name] = BOX
        return
    if isinstance(m, Product) and len(m.parts) == len(p):
        for sub, part in zip(p, m.parts):
            _bind(rho, sub, part, path, term)
        return
    raise _Fail(path, f"cannot match pattern against monoid {m}", term if term is not None else T.Var("?"))


def _product_view(m: MergeForm, n: int) -> tuple | None:
    if isinstance(m, Product):
        if len(m.parts) == n:
            return m.parts
        if n == 2:
            return (m.parts[0], m.right)
    return None


class _Infer:
    def __init__(self, unrestricted_cogroup: bool):
        self.unrestricted = unrestricted_cogroup

    def run(self, t: T.Term, rho: dict, path: tuple) -> MergeForm:
        fv = T.free_vars(t)
        for name in fv:
            if name not in rho:
                label = f"S{name[1]}" if isinstance(name, tuple) else name
                raise _Fail(path, f"unbound name {label}", t)
        if all(isinstance(rho[name], Box) for name in fv):
            return BOX
        method = getattr(self, "_" + type(t).__name__, None)
        if method is None:
            raise _Fail(path, f"no inference rule for {type(t).__name__}", t)
        return method(t, rho, path)

    # -- leaves

    def _Var(self, t: T.Var, rho, path):
        return rho[t.name]

    def _Source(self, t: T.Source, rho, path):
        return rho[("source", t.index)]

    # -- helpers

    def _closed_function(self, f: T.Term, rho: dict, path: tuple, what: str) -> None:
        for name in T.free_vars(f):
            if not isinstance(rho[name], Box):
                label = f"S{name[1]}" if isinstance(name, tuple) else name
                raise _Fail(path, f"{what} function depends on changing value {label}", f)

    def _lambda(self, f: T.Term, path: tuple, what: str) -> T.Lambda:
        if not isinstance(f, T.Lambda):
            raise _Fail(path, f"{what} needs a lambda argument", f)
        return f

    # -- algebra

    def _Reduce(self, t: T.Reduce, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if isinstance(m, Union):
            return t.monoid
        if isinstance(m, Lifted) and m == t.monoid:
            return m
        raise _Fail(path, f"reduce input must be ⊎, found {m}", t)

    def _BagUnion(self, t: T.BagUnion, rho, path):
        left = self.run(t.left, rho, path + ("left",))
        right = self.run(t.right, rho, path + ("right",))
        if isinstance(left, Union) and isinstance(right, Union):
            return UNION
        raise _Fail(path, f"bag union needs ⊎ operands, found {left} and {right}", t)

    def _CMap(self, t: T.CMap, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if isinstance(m, Union):
            self._closed_function(t.fn, rho, path + ("fn",), "cMap")
            return UNION
        f = self._lambda(t.fn, path + ("fn",), "cMap")
        if isinstance(m, Box):
            body_rho = bind_pattern(rho, f.param, BOX)
            body = self.run(f.body, body_rho, path + ("fn", "body"))
            if isinstance(body, Union):
                return UNION
            raise _Fail(path + ("fn", "body"), f"cMap over an invariant bag needs a ⊎ body, found {body}", f.body)
        if isinstance(m, Lifted):
            body_rho = bind_pattern(rho, f.param, Product(BOX, m.inner), path + ("fn",), f)
            body = self.run(f.body, body_rho, path + ("fn", "body"))
            if isinstance(body, Lifted):
                return body
            raise _Fail(path + ("fn", "body"), f"cMap over a keyed bag needs a lifted body, found {body}", f.body)
        raise _Fail(path, f"cMap input has no bag monoid ({m})", t)

    def _GroupBy(self, t: T.GroupBy, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if isinstance(m, Union):
            return Lifted(UNION)
        raise _Fail(path, f"groupBy input must be ⊎, found {m}", t)

    def _CoGroup(self, t: T.CoGroup, rho, path):
        left = self.run(t.left, rho, path + ("left",))
        right = self.run(t.right, rho, path + ("right",))
        if self.unrestricted:
            if isinstance(left, Union) and isinstance(right, Union):
                return Lifted(Product(UNION, UNION))
            raise _Fail(path, f"coGroup inputs must be ⊎, found {left} and {right}", t)
        if isinstance(left, (Union, Box)) and isinstance(right, Union):
            return Lifted(Product(BOX, UNION))
        raise _Fail(path, f"coGroup needs a ⊎ right input and a ⊎ or invariant left input, found {left} and {right}", t)

    def _Repeat(self, t, rho, path):
        raise _Fail(path, "repeat is not a homomorphism (handled by the iterative planner)", t)

    # -- transformed terms

    def _SMap1(self, t: T.SMap1, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if not isinstance(m, Lifted):
            raise _Fail(path, f"sMap1 input must be a lifted monoid, found {m}", t)
        f = self._lambda(t.fn, path + ("fn",), "sMap1")
        body_rho = bind_pattern(rho, f.param, Product(BOX, m.inner), path + ("fn",), f)
        body = f.body
        if isinstance(body, T.Singleton):
            inner = self.run(body.expr, body_rho, path + ("fn", "body", "elem"))
            return Lifted(inner)
        bm = self.run(body, body_rho, path + ("fn", "body"))
        if isinstance(bm, Union):
            return UNION
        if isinstance(bm, Lifted):
            return bm
        raise _Fail(path + ("fn", "body"), f"sMap1 body is not a homomorphism ({bm})", body)

    def _SMap2(self, t: T.SMap2, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if not isinstance(m, Lifted):
            raise _Fail(path, f"sMap2 input must be a lifted monoid, found {m}", t)
        f = self._lambda(t.fn, path + ("fn",), "sMap2")
        body_rho = bind_pattern(rho, f.param, Product(BOX, m.inner), path + ("fn",), f)
        bm = self.run(f.body, body_rho, path + ("fn", "body"))
        if isinstance(bm, Union):
            return UNION
        raise _Fail(path + ("fn", "body"), f"sMap2 body must be ⊎, found {bm}", f.body)

    def _SMap3(self, t: T.SMap3, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if not isinstance(m, Union):
            raise _Fail(path, f"sMap3 input must be ⊎, found {m}", t)
        self._closed_function(t.fn, rho, path + ("fn",), "sMap3")
        return UNION

    def _Swap(self, t: T.Swap, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if isinstance(m, Union):
            return UNION
        raise _Fail(path, f"swap input must be ⊎, found {m}", t)

    def _Mix(self, t: T.Mix, rho, path):
        m = self.run(t.input, rho, path + ("input",))
        if isinstance(m, Lifted):
            parts = _product_view(m.inner, 2)
            if parts and all(isinstance(p, (Union, Box)) for p in parts):
                return m
        raise _Fail(path, f"mix input must be a lifted pair of bag monoids, found {m}", t)

    def _KMap(self, t, rho, path):
        raise _Fail(path, "kMap is not a homomorphism", t)

    # -- function language

    def _TupleE(self, t: T.TupleE, rho, path):
        if len(t.items) < 2:
            raise _Fail(path, "tuples of arity < 2 have no product monoid", t)
        parts = [self.run(x, rho, path + (f"item{i}",)) for i, x in enumerate(t.items)]
        return Product(*parts)

    def _Proj(self, t: T.Proj, rho, path):
        m = self.run(t.expr, rho, path + ("expr",))
        if isinstance(m, Product):
            if t.index < len(m.parts):
                return m.parts[t.index]
        if isinstance(m, Union):
            return UNION
        raise _Fail(path, f"cannot project component {t.index + 1} of {m}", t)

    def _Apply(self, t: T.Apply, rho, path):
        if not isinstance(t.fn, T.Lambda):
            raise _Fail(path, "application of a non-literal function", t)
        m = self.run(t.arg, rho, path + ("arg",))
        body_rho = bind_pattern(rho, t.fn.param, m, path + ("fn",), t.fn)
        return self.run(t.fn.body, body_rho, path + ("fn", "body"))

    def _If(self, t: T.If, rho, path):
        cond = self.run(t.cond, rho, path + ("cond",))
        if not isinstance(cond, Box):
            raise _Fail(path + ("cond",), "condition depends on changing values", t.cond)
        a = self.run(t.then, rho, path + ("then",))
        b = self.run(t.orelse, rho, path + ("else",))
        if a == b:
            return a
        raise _Fail(path, f"branches disagree ({a} vs {b})", t)

    def _Singleton(self, t: T.Singleton, rho, path):
        e = t.expr
        if isinstance(e, T.TupleE) and len(e.items) == 2:
            key = self.run(e.items[0], rho, path + ("elem", "item0"))
            if isinstance(key, Box):
                return Lifted(self.run(e.items[1], rho, path + ("elem", "item1")))
            raise _Fail(path + ("elem", "item0"), "singleton key must be invariant", e.items[0])
        raise _Fail(path, "singleton of a changing value is not a homomorphism", t)

    def _Call(self, t: T.Call, rho, path):
        if t.name == "map" and len(t.args) == 2:
            m = self.run(t.args[1], rho, path + ("arg1",))
            if isinstance(m, Union):
                self._closed_function(t.args[0], rho, path + ("arg0",), "map")
                return UNION
        raise _Fail(path, f"{t.name} is not a homomorphism", t)

    def _BinOp(self, t: T.BinOp, rho, path):
        raise _Fail(path, f"operator {t.op} is not a homomorphism", t)

    def _UnaryOp(self, t: T.UnaryOp, rho, path):
        raise _Fail(path, f"operator {t.op} is not a homomorphism", t)

    def _Field(self, t: T.Field, rho, path):
        raise _Fail(path, "field access on a changing value is not a homomorphism", t)

    def _Lambda(self, t: T.Lambda, rho, path):
        raise _Fail(path, "a function over changing values has no monoid", t)

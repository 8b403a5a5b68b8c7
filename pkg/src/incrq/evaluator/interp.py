"""Batch evaluation of terms.

Terms are compiled once into nested Python closures and cached; evaluation
then runs the closures against an environment dict. This is the reference
semantics every incremental result is checked against.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from incrq.core.monoids import reduce_values
from incrq.core.values import EMPTY_BAG, Bag, canonical_key, check_int64
from incrq.errors import EvalError
from incrq.evaluator import terms as T

Env = dict
Compiled = Callable[[Env, "EvalContext"], Any]
CoGroupHook = Callable[[tuple, Bag, Bag], Bag]


@dataclass
class EvalContext:
    """Per-evaluation state: bound sources, tuple counters and an optional coGroup hook."""

    sources: Mapping[int, Bag]
    source_reads: dict = field(default_factory=dict)
    cogroup_hook: CoGroupHook | None = None

    def tuples_read(self) -> int:
        return sum(self.source_reads.values())


class Closure:
    """Runtime value of a lambda."""

    __slots__ = ("call", "term")

    def __init__(self, call: Callable[[Any], Any], term: T.Term | None = None):
        self.call = call
        self.term = term

    def __call__(self, arg: Any) -> Any:
        return self.call(arg)

    def __repr__(self) -> str:
        return "<function>"


# ---------------------------------------------------------------------------
# public entry points


def evaluate(
    term: T.Term,
    sources: Mapping[int, Bag] | None = None,
    env: Mapping[str, Any] | None = None,
    *,
    context: EvalContext | None = None,
) -> Any:
    """Evaluate ``term`` with ``sources`` bound by index and ``env`` bound by name."""
    ctx = context or EvalContext(sources or {})
    return compile_term(term)(dict(env or {}), ctx)


def eval_function(f: T.Term, arg: Any, env: Mapping[str, Any] | None = None) -> Any:
    """Apply the function term ``f`` to ``arg``."""
    fn = evaluate(f, {}, env)
    if not callable(fn):
        raise EvalError(f"not a function: {fn!r}")
    return fn(arg)


_CACHE: "OrderedDict[int, tuple[T.Term, Compiled]]" = OrderedDict()
_CACHE_SIZE = 1024


def compile_term(term: T.Term, path: tuple = ()) -> Compiled:
    if path:
        return _compile(term, path)
    key = id(term)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is term:
        _CACHE.move_to_end(key)
        return hit[1]
    compiled = _compile(term, ())
    _CACHE[key] = (term, compiled)
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return compiled


# ---------------------------------------------------------------------------
# helpers


def _bag(v: Any, what: str) -> Bag:
    if not isinstance(v, Bag):
        raise EvalError(f"{what} expects a bag, got {_short(v)}")
    return v


def _pair(v: Any, what: str) -> tuple:
    if not isinstance(v, tuple) or len(v) != 2:
        raise EvalError(f"{what} expects key-value pairs, got {_short(v)}")
    return v


def _short(v: Any) -> str:
    text = repr(v)
    return text if len(text) < 80 else text[:77] + "..."


def _binder(p: T.Pattern) -> Callable[[Env, Any], None]:
    if isinstance(p, str):
        name = p

        def bind_name(env: Env, v: Any) -> None:
            env[name] = v

        return bind_name
    subs = [_binder(s) for s in p]
    n = len(subs)

    def bind_tuple(env: Env, v: Any) -> None:
        if not isinstance(v, tuple) or len(v) != n:
            raise EvalError(f"pattern mismatch: expected a {n}-tuple, got {_short(v)}")
        for sub, item in zip(subs, v):
            sub(env, item)

    return bind_tuple


def _add(out: dict, item: Any, c: int) -> None:
    out[item] = out.get(item, 0) + c


# ---------------------------------------------------------------------------
# compiler


def _compile(t: T.Term, path: tuple) -> Compiled:
    method = _COMPILERS.get(type(t))
    if method is None:
        raise EvalError(f"cannot evaluate {type(t).__name__}")
    return method(t, path)


def _c_var(t: T.Var, path):
    name = t.name

    def run(env, ctx):
        try:
            return env[name]
        except KeyError:
            raise EvalError(f"unbound variable {name!r}") from None

    return run


def _c_const(t: T.Const, path):
    value = t.value
    return lambda env, ctx: value


def _c_tuple(t: T.TupleE, path):
    items = [_compile(x, path + (f"item{i}",)) for i, x in enumerate(t.items)]
    if len(items) == 2:
        a, b = items
        return lambda env, ctx: (a(env, ctx), b(env, ctx))
    return lambda env, ctx: tuple(f(env, ctx) for f in items)


def _c_proj(t: T.Proj, path):
    inner = _compile(t.expr, path + ("expr",))
    i = t.index

    def project(v):
        if not isinstance(v, tuple) or len(v) <= i:
            raise EvalError(f"projection {i + 1} needs a tuple of arity ≥ {max(2, i + 1)}, got {_short(v)}")
        return v[i]

    def run(env, ctx):
        v = inner(env, ctx)
        if isinstance(v, Bag):
            out: dict = {}
            for item, c in v.items():
                _add(out, project(item), c)
            return Bag._trusted(out)
        return project(v)

    return run


def _c_field(t: T.Field, path):
    inner = _compile(t.expr, path + ("expr",))
    name = t.name

    def run(env, ctx):
        v = inner(env, ctx)
        try:
            return getattr(v, name)
        except AttributeError:
            raise EvalError(f"value {_short(v)} has no field {name!r}") from None

    return run


def _arith(op: str, a: Any, b: Any) -> Any:
    for v in (a, b):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            if op == "+" and isinstance(a, str) and isinstance(b, str):
                return a + b
            raise EvalError(f"arithmetic {op} on non-number {_short(v)}")
    if op == "+":
        return check_int64(a + b)
    if op == "-":
        return check_int64(a - b)
    if op == "*":
        return check_int64(a * b)
    if op == "/":
        if b == 0:
            raise EvalError("division by zero")
        return a / b
    if op == "%":
        if b == 0:
            raise EvalError("division by zero")
        return a % b
    raise EvalError(f"unknown operator {op}")


_COMPARE = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _c_binop(t: T.BinOp, path):
    left = _compile(t.left, path + ("left",))
    right = _compile(t.right, path + ("right",))
    op = t.op
    if op in T.ARITH_OPS:
        return lambda env, ctx: _arith(op, left(env, ctx), right(env, ctx))
    if op in _COMPARE:
        cmp = _COMPARE[op]

        def run_cmp(env, ctx):
            a, b = left(env, ctx), right(env, ctx)
            try:
                return cmp(a, b)
            except TypeError:
                # mixed types fall back to the canonical order
                return cmp(canonical_key(a), canonical_key(b))

        return run_cmp
    if op == "and":

        def run_and(env, ctx):
            a = left(env, ctx)
            if not isinstance(a, bool):
                raise EvalError(f"and expects booleans, got {_short(a)}")
            return right(env, ctx) if a else False

        return run_and
    if op == "or":

        def run_or(env, ctx):
            a = left(env, ctx)
            if not isinstance(a, bool):
                raise EvalError(f"or expects booleans, got {_short(a)}")
            return True if a else right(env, ctx)

        return run_or
    raise EvalError(f"unknown operator {op}")


def _c_unary(t: T.UnaryOp, path):
    inner = _compile(t.expr, path + ("expr",))
    if t.op == "not":

        def run_not(env, ctx):
            v = inner(env, ctx)
            if not isinstance(v, bool):
                raise EvalError(f"not expects a boolean, got {_short(v)}")
            return not v

        return run_not
    if t.op == "neg":
        return lambda env, ctx: _arith("-", 0, inner(env, ctx))
    raise EvalError(f"unknown unary operator {t.op}")


def _c_if(t: T.If, path):
    cond = _compile(t.cond, path + ("cond",))
    then = _compile(t.then, path + ("then",))
    orelse = _compile(t.orelse, path + ("else",))

    def run(env, ctx):
        c = cond(env, ctx)
        if not isinstance(c, bool):
            raise EvalError(f"if condition must be boolean, got {_short(c)}")
        return then(env, ctx) if c else orelse(env, ctx)

    return run


def _c_singleton(t: T.Singleton, path):
    inner = _compile(t.expr, path + ("elem",))
    return lambda env, ctx: Bag._trusted({inner(env, ctx): 1})


def _c_empty(t: T.EmptyBag, path):
    return lambda env, ctx: EMPTY_BAG


def _c_union(t: T.BagUnion, path):
    left = _compile(t.left, path + ("left",))
    right = _compile(t.right, path + ("right",))
    return lambda env, ctx: _bag(left(env, ctx), "bag union").union(_bag(right(env, ctx), "bag union"))


def _c_lambda(t: T.Lambda, path):
    body = _compile(t.body, path + ("body",))
    bind = _binder(t.param)

    def run(env, ctx):
        def call(arg):
            local = dict(env)
            bind(local, arg)
            return body(local, ctx)

        return Closure(call, t)

    return run


def _c_apply(t: T.Apply, path):
    fn = _compile(t.fn, path + ("fn",))
    arg = _compile(t.arg, path + ("arg",))

    def run(env, ctx):
        f = fn(env, ctx)
        if not callable(f):
            raise EvalError(f"cannot apply non-function {_short(f)}")
        return f(arg(env, ctx))

    return run


def _c_call(t: T.Call, path):
    from incrq.evaluator.builtins import BUILTINS

    impl = BUILTINS.get(t.name)
    if impl is None:
        raise EvalError(f"unknown builtin {t.name!r}")
    args = [_compile(a, path + (f"arg{i}",)) for i, a in enumerate(t.args)]
    return lambda env, ctx: impl(*(a(env, ctx) for a in args))


def _c_source(t: T.Source, path):
    index = t.index

    def run(env, ctx):
        try:
            value = ctx.sources[index]
        except KeyError:
            raise EvalError(f"unbound source {index}") from None
        ctx.source_reads[index] = ctx.source_reads.get(index, 0) + len(value)
        return value

    return run


def _c_cmap(t: T.CMap, path):
    fn = _compile(t.fn, path + ("fn",))
    src = _compile(t.input, path + ("input",))

    def run(env, ctx):
        f = fn(env, ctx)
        bag = _bag(src(env, ctx), "cMap")
        out: dict = {}
        get = out.get
        for v, c in bag.items():
            r = f(v)
            if not isinstance(r, Bag):
                raise EvalError(f"cMap function must return a bag, got {_short(r)}")
            for w, d in r._counts.items():
                out[w] = get(w, 0) + c * d
        return Bag._trusted(out)

    return run


def group_pairs(bag: Bag, what: str) -> dict:
    groups: dict = {}
    for item, c in bag.items():
        k, v = _pair(item, what)
        g = groups.get(k)
        if g is None:
            groups[k] = {v: c}
        else:
            g[v] = g.get(v, 0) + c
    return groups


def group_by(bag: Bag) -> Bag:
    groups = group_pairs(_bag(bag, "groupBy"), "groupBy")
    return Bag._trusted({(k, Bag._trusted(g)): 1 for k, g in groups.items()})


def co_group(left: Bag, right: Bag) -> Bag:
    gl = group_pairs(_bag(left, "coGroup"), "coGroup")
    gr = group_pairs(_bag(right, "coGroup"), "coGroup")
    out: dict = {}
    for k, g in gl.items():
        r = gr.get(k)
        out[(k, (Bag._trusted(g), Bag._trusted(r) if r is not None else EMPTY_BAG))] = 1
    for k, g in gr.items():
        if k not in gl:
            out[(k, (EMPTY_BAG, Bag._trusted(g)))] = 1
    return Bag._trusted(out)


def _c_groupby(t: T.GroupBy, path):
    src = _compile(t.input, path + ("input",))
    return lambda env, ctx: group_by(src(env, ctx))


def _c_cogroup(t: T.CoGroup, path):
    left = _compile(t.left, path + ("left",))
    right = _compile(t.right, path + ("right",))
    node_path = path

    def run(env, ctx):
        lv = _bag(left(env, ctx), "coGroup")
        rv = _bag(right(env, ctx), "coGroup")
        if ctx.cogroup_hook is not None:
            return ctx.cogroup_hook(node_path, lv, rv)
        return co_group(lv, rv)

    return run


def _c_reduce(t: T.Reduce, path):
    src = _compile(t.input, path + ("input",))
    m = t.monoid
    return lambda env, ctx: reduce_values(m, src(env, ctx))


def _c_repeat(t: T.Repeat, path):
    fn = _compile(t.fn, path + ("fn",))
    init = _compile(t.init, path + ("init",))
    n = t.count

    def run(env, ctx):
        f = fn(env, ctx)
        x = init(env, ctx)
        for _ in range(n):
            x = f(x)
        return x

    return run


def _lineage_key(lineage: Any, what: str) -> Any:
    if not isinstance(lineage, tuple) or len(lineage) != 2:
        raise EvalError(f"{what} expects a (key, lineage) pair, got {_short(lineage)}")
    return lineage[0]


def _c_smap1(t: T.SMap1, path):
    fn = _compile(t.fn, path + ("fn",))
    src = _compile(t.input, path + ("input",))

    def run(env, ctx):
        f = fn(env, ctx)
        out: dict = {}
        for item, c in _bag(src(env, ctx), "sMap1").items():
            lineage, a = _pair(item, "sMap1")
            k = _lineage_key(lineage, "sMap1")
            for b, d in _bag(f((k, a)), "sMap1 function").items():
                _add(out, (lineage, b), c * d)
        return Bag._trusted(out)

    return run


def _c_smap2(t: T.SMap2, path):
    fn = _compile(t.fn, path + ("fn",))
    src = _compile(t.input, path + ("input",))

    def run(env, ctx):
        f = fn(env, ctx)
        out: dict = {}
        for item, c in _bag(src(env, ctx), "sMap2").items():
            lineage, a = _pair(item, "sMap2")
            k = _lineage_key(lineage, "sMap2")
            for kb, d in _bag(f((k, a)), "sMap2 function").items():
                k2, b = _pair(kb, "sMap2 function")
                _add(out, (k2, (lineage, b)), c * d)
        return Bag._trusted(out)

    return run


def _c_smap3(t: T.SMap3, path):
    fn = _compile(t.fn, path + ("fn",))
    src = _compile(t.input, path + ("input",))

    def run(env, ctx):
        f = fn(env, ctx)
        out: dict = {}
        for a, c in _bag(src(env, ctx), "sMap3").items():
            for kb, d in _bag(f(a), "sMap3 function").items():
                k, b = _pair(kb, "sMap3 function")
                _add(out, (k, ((), b)), c * d)
        return Bag._trusted(out)

    return run


def _c_swap(t: T.Swap, path):
    src = _compile(t.input, path + ("input",))

    def run(env, ctx):
        out: dict = {}
        for item, c in _bag(src(env, ctx), "swap").items():
            k, rest = _pair(item, "swap")
            theta, v = _pair(rest, "swap")
            _add(out, ((k, theta), v), c)
        return Bag._trusted(out)

    return run


def _c_mix(t: T.Mix, path):
    src = _compile(t.input, path + ("input",))

    def run(env, ctx):
        out: dict = {}
        for item, c in _bag(src(env, ctx), "mix").items():
            k, groups = _pair(item, "mix")
            s1, s2 = _pair(groups, "mix")
            g1 = group_pairs(_bag(s1, "mix"), "mix")
            g2 = group_pairs(_bag(s2, "mix"), "mix")
            for tx, xs in g1.items():
                bx = Bag._trusted(xs)
                for ty, ys in g2.items():
                    _add(out, ((k, (tx, ty)), (bx, Bag._trusted(ys))), c)
        return Bag._trusted(out)

    return run


def _c_kmap(t: T.KMap, path):
    fn = _compile(t.fn, path + ("fn",))
    src = _compile(t.input, path + ("input",))

    def run(env, ctx):
        f = fn(env, ctx)
        out: dict = {}
        for item, c in _bag(src(env, ctx), "kMap").items():
            theta, v = _pair(item, "kMap")
            _add(out, (theta, f(v)), c)
        return Bag._trusted(out)

    return run


_COMPILERS: dict[type, Callable[[Any, tuple], Compiled]] = {
    T.Var: _c_var,
    T.Const: _c_const,
    T.TupleE: _c_tuple,
    T.Proj: _c_proj,
    T.Field: _c_field,
    T.BinOp: _c_binop,
    T.UnaryOp: _c_unary,
    T.If: _c_if,
    T.Singleton: _c_singleton,
    T.EmptyBag: _c_empty,
    T.BagUnion: _c_union,
    T.Lambda: _c_lambda,
    T.Apply: _c_apply,
    T.Call: _c_call,
    T.Source: _c_source,
    T.CMap: _c_cmap,
    T.GroupBy: _c_groupby,
    T.CoGroup: _c_cogroup,
    T.Reduce: _c_reduce,
    T.Repeat: _c_repeat,
    T.SMap1: _c_smap1,
    T.SMap2: _c_smap2,
    T.SMap3: _c_smap3,
    T.Swap: _c_swap,
    T.Mix: _c_mix,
    T.KMap: _c_kmap,
}

_ = math  # sqrt and friends live in builtins

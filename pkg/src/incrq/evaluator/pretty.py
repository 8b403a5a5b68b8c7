"""Human-readable rendering of terms, used by explain output and error messages."""

from __future__ import annotations

from incrq.core.values import Bag, to_text
from incrq.evaluator import terms as T

_PREC = {"or": 1, "and": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3, "+": 4, "-": 4, "*": 5, "/": 5, "%": 5}


def pattern_text(p: T.Pattern) -> str:
    if isinstance(p, str):
        return p
    return "(" + ",".join(pattern_text(x) for x in p) + ")"


def pretty(t: T.Term) -> str:
    return _p(t, 0)


def _p(t: T.Term, prec: int) -> str:
    if isinstance(t, T.Var):
        return t.name
    if isinstance(t, T.Const):
        v = t.value
        if isinstance(v, (bool, int, float, str, tuple, Bag)):
            return to_text(v)
        return repr(v)
    if isinstance(t, T.TupleE):
        return "(" + ", ".join(_p(x, 0) for x in t.items) + ")"
    if isinstance(t, T.Proj):
        return f"π{t.index + 1}({_p(t.expr, 0)})"
    if isinstance(t, T.Field):
        return f"{_p(t.expr, 9)}.{t.name}"
    if isinstance(t, T.BinOp):
        mine = _PREC.get(t.op, 0)
        text = f"{_p(t.left, mine)} {t.op} {_p(t.right, mine + 1)}"
        return f"({text})" if mine < prec else text
    if isinstance(t, T.UnaryOp):
        if t.op == "neg":
            return f"-{_p(t.expr, 9)}"
        return f"not {_p(t.expr, 9)}"
    if isinstance(t, T.If):
        text = f"if {_p(t.cond, 0)} then {_p(t.then, 0)} else {_p(t.orelse, 0)}"
        return f"({text})" if prec > 0 else text
    if isinstance(t, T.Singleton):
        return "{" + _p(t.expr, 0) + "}"
    if isinstance(t, T.EmptyBag):
        return "{}"
    if isinstance(t, T.BagUnion):
        text = f"{_p(t.left, 4)} ⊎ {_p(t.right, 5)}"
        return f"({text})" if prec > 4 else text
    if isinstance(t, T.Lambda):
        text = f"λ{pattern_text(t.param)}. {_p(t.body, 0)}"
        return f"({text})" if prec > 0 else text
    if isinstance(t, T.Apply):
        return f"{_p(t.fn, 9)}({_p(t.arg, 0)})"
    if isinstance(t, T.Call):
        name = "T" if t.name == "strip_lineage" else t.name
        return f"{name}(" + ", ".join(_p(a, 0) for a in t.args) + ")"
    if isinstance(t, T.Source):
        return f"S{t.index}"
    if isinstance(t, T.Reduce):
        return f"reduce({t.monoid}, {_p(t.input, 0)})"
    if isinstance(t, T.Repeat):
        return f"repeat({_p(t.fn, 0)}, {t.count}, {_p(t.init, 0)})"
    if isinstance(t, T.CoGroup):
        return f"coGroup({_p(t.left, 0)}, {_p(t.right, 0)})"
    names = {
        T.CMap: "cMap", T.GroupBy: "groupBy", T.SMap1: "sMap1", T.SMap2: "sMap2",
        T.SMap3: "sMap3", T.Swap: "swap", T.Mix: "mix", T.KMap: "kMap",
    }
    name = names.get(type(t))
    if name is None:
        return repr(t)
    return f"{name}(" + ", ".join(_p(c, 0) for _, c in t.children()) + ")"


def location_text(path: tuple) -> str:
    return "/".join(path) if path else "<root>"

"""Parenthesized prefix syntax for query terms.

Algebra forms::

    (source N)  (cmap FN E)  (groupby E)  (cogroup E1 E2)
    (reduce MONOID E)  (repeat (lambda (x) E) N E0)

Expression forms::

    (lambda (x) BODY)   (lambda ((k v)) BODY)   (lambda (k v) BODY)
    (bag e ...)  (tuple e ...)  (union a b)  (if c t e)  (apply f x)
    (fst e)  (snd e)  (nth I e)  (get e NAME)
    (+ a b) (- a b) (* a b) (/ a b) (% a b)  (== a b) (!= a b) (< a b) ...
    (and a b)  (or a b)  (not a)  (neg a)
    (quote VALUE)   ; a constant tuple or bag
    (size x) (flatten x) (argmin f xs) ...  ; any builtin by name

Monoids: ``sum``, ``prod``, ``union``, ``and``, ``or``, ``box``,
``(lift M)``, ``(product M1 M2 ...)``. ``;`` starts a comment.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any

from incrq.core.monoids import (
    AND,
    BOX,
    OR,
    PROD,
    SUM,
    UNION,
    And,
    Box,
    Lifted,
    MergeForm,
    Or,
    Prod,
    Product,
    Sum,
    Union,
)
from incrq.core.values import Bag, canonical_items
from incrq.errors import DSLSyntaxError
from incrq.evaluator import terms as T
from incrq.evaluator.builtins import BUILTINS

__all__ = ["parse_plan", "parse_monoid", "to_dsl"]

# ---------------------------------------------------------------------------
# reading s-expressions


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int
    quoted: bool = False


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int
    col: int


_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|"(?:[^"\\]|\\.)*"|[^\s()";]+')


def _tokens(text: str):
    pos = 0
    line, col = 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        tok = m.group(0)
        if not (tok[0].isspace() or tok[0] == ";"):
            yield tok, line, col
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    yield None, line, col


def read_sexprs(text: str) -> list:
    stack: list[tuple[list, int, int]] = []
    top: list = []
    for tok, line, col in _tokens(text):
        if tok is None:
            if stack:
                _, l0, c0 = stack[-1]
                raise DSLSyntaxError("unclosed parenthesis", l0, c0)
            return top
        if tok == "(":
            stack.append(([], line, col))
        elif tok == ")":
            if not stack:
                raise DSLSyntaxError("unexpected ')'", line, col)
            items, l0, c0 = stack.pop()
            node = SList(tuple(items), l0, c0)
            (stack[-1][0] if stack else top).append(node)
        else:
            quoted = tok.startswith('"')
            if quoted and (len(tok) < 2 or not tok.endswith('"')):
                raise DSLSyntaxError("unterminated string", line, col)
            (stack[-1][0] if stack else top).append(Atom(tok, line, col, quoted))
    return top


# ---------------------------------------------------------------------------
# building terms


def _err(node, message: str) -> DSLSyntaxError:
    return DSLSyntaxError(message, node.line, node.col)


def _number(text: str) -> int | float | None:
    try:
        return int(text)
    except ValueError:
        pass
    if re.fullmatch(r"[-+]?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][-+]?\d+|\d+\.\d*[eE][-+]?\d+|inf|nan)", text):
        return float(text)
    return None


_MONOIDS: dict[str, MergeForm] = {
    "sum": SUM,
    "+": SUM,
    "prod": PROD,
    "*": PROD,
    "union": UNION,
    "and": AND,
    "or": OR,
    "box": BOX,
}

_ARITH = {"+", "-", "*", "/", "%"}
_COMPARE = {"==": "==", "=": "==", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}
_KEYWORDS = {
    "source", "cmap", "groupby", "cogroup", "reduce", "repeat", "lambda", "bag", "tuple", "union",
    "if", "apply", "fst", "snd", "nth", "get", "and", "or", "not", "neg", "quote", "true", "false",
}


class _Builder:
    def __init__(self, sources: int | None):
        self.sources = sources

    # monoids
    def monoid(self, node) -> MergeForm:
        if isinstance(node, Atom):
            m = _MONOIDS.get(node.text)
            if m is None:
                raise _err(node, f"unknown monoid {node.text!r}")
            return m
        if not node.items or not isinstance(node.items[0], Atom):
            raise _err(node, "malformed monoid")
        head = node.items[0].text
        args = node.items[1:]
        if head == "lift":
            self._arity(node, 1)
            return Lifted(self.monoid(args[0]))
        if head == "product":
            if len(args) < 2:
                raise _err(node, "product needs at least two monoids")
            return Product(*(self.monoid(a) for a in args))
        raise _err(node.items[0], f"unknown monoid {head!r}")

    # patterns
    def pattern(self, node) -> T.Pattern:
        if isinstance(node, Atom):
            if node.quoted or _number(node.text) is not None or node.text in _KEYWORDS:
                raise _err(node, f"invalid variable name {node.text!r}")
            return node.text
        if len(node.items) < 2:
            raise _err(node, "a tuple pattern needs at least two components")
        return tuple(self.pattern(p) for p in node.items)

    def params(self, node) -> T.Pattern:
        if isinstance(node, Atom):
            return self.pattern(node)
        if not node.items:
            raise _err(node, "lambda needs a parameter")
        if len(node.items) == 1:
            return self.pattern(node.items[0])
        return tuple(self.pattern(p) for p in node.items)

    # constant values
    def value(self, node) -> Any:
        if isinstance(node, Atom):
            return self._atom_value(node)
        if not node.items:
            return ()
        head = node.items[0]
        if isinstance(head, Atom) and head.text == "tuple":
            return tuple(self.value(i) for i in node.items[1:])
        if isinstance(head, Atom) and head.text == "bag":
            return Bag(self.value(i) for i in node.items[1:])
        raise _err(node, "quoted values are atoms, (tuple ...) or (bag ...)")

    def _atom_value(self, node: Atom) -> Any:
        if node.quoted:
            try:
                return json.loads(node.text)
            except json.JSONDecodeError:
                raise _err(node, "malformed string literal") from None
        if node.text == "true":
            return True
        if node.text == "false":
            return False
        n = _number(node.text)
        if n is None:
            raise _err(node, f"expected a literal, found {node.text!r}")
        return n

    def _arity(self, node: SList, n: int) -> None:
        if len(node.items) - 1 != n:
            head = node.items[0].text if isinstance(node.items[0], Atom) else "form"
            raise _err(node, f"{head} expects {n} argument{'s' if n != 1 else ''}, got {len(node.items) - 1}")

    # terms
    def term(self, node, in_lambda: bool = False) -> T.Term:
        if isinstance(node, Atom):
            if node.quoted or node.text in ("true", "false") or _number(node.text) is not None:
                return T.Const(self._atom_value(node))
            if node.text in _KEYWORDS:
                raise _err(node, f"unexpected keyword {node.text!r}")
            return T.Var(node.text)
        if not node.items:
            return T.Const(())
        head = node.items[0]
        if not isinstance(head, Atom) or head.quoted:
            raise _err(node, "expected an operator name")
        name = head.text
        args = node.items[1:]
        sub = lambda n: self.term(n, in_lambda)  # noqa: E731
        if name == "source":
            self._arity(node, 1)
            if in_lambda:
                raise _err(node, "a function body may not reference a source")
            idx = _number(args[0].text) if isinstance(args[0], Atom) else None
            if not isinstance(idx, int) or idx < 0:
                raise _err(args[0], "source index must be a non-negative integer")
            if self.sources is not None and idx >= self.sources:
                raise _err(args[0], f"source index {idx} out of range (plan has {self.sources} sources)")
            return T.Source(idx)
        if name == "cmap":
            self._arity(node, 2)
            return T.CMap(sub(args[0]), sub(args[1]))
        if name == "groupby":
            self._arity(node, 1)
            return T.GroupBy(sub(args[0]))
        if name == "cogroup":
            self._arity(node, 2)
            return T.CoGroup(sub(args[0]), sub(args[1]))
        if name == "reduce":
            self._arity(node, 2)
            return T.Reduce(self.monoid(args[0]), sub(args[1]))
        if name == "repeat":
            self._arity(node, 3)
            step = args[0]
            if not (isinstance(step, SList) and step.items and isinstance(step.items[0], Atom) and step.items[0].text == "lambda"):
                raise _err(step, "repeat step must be a lambda")
            self._arity(step, 2)
            fn = T.Lambda(self.params(step.items[1]), self.term(step.items[2], in_lambda))
            count = _number(args[1].text) if isinstance(args[1], Atom) else None
            if not isinstance(count, int) or count < 0:
                raise _err(args[1], "repeat count must be a non-negative integer")
            return T.Repeat(fn, count, sub(args[2]))
        if name == "lambda":
            self._arity(node, 2)
            return T.Lambda(self.params(args[0]), self.term(args[1], True))
        if name == "bag":
            if not args:
                return T.EmptyBag()
            out: T.Term = T.Singleton(sub(args[0]))
            for a in args[1:]:
                out = T.BagUnion(out, T.Singleton(sub(a)))
            return out
        if name == "tuple":
            if len(args) < 2:
                raise _err(node, "tuple needs at least two components")
            return T.TupleE(tuple(sub(a) for a in args))
        if name == "union":
            self._arity(node, 2)
            return T.BagUnion(sub(args[0]), sub(args[1]))
        if name == "if":
            self._arity(node, 3)
            return T.If(sub(args[0]), sub(args[1]), sub(args[2]))
        if name == "apply":
            self._arity(node, 2)
            return T.Apply(sub(args[0]), sub(args[1]))
        if name in ("fst", "snd"):
            self._arity(node, 1)
            return T.Proj(sub(args[0]), 0 if name == "fst" else 1)
        if name == "nth":
            self._arity(node, 2)
            i = _number(args[0].text) if isinstance(args[0], Atom) else None
            if not isinstance(i, int) or i < 0:
                raise _err(args[0], "nth index must be a non-negative integer")
            return T.Proj(sub(args[1]), i)
        if name == "get":
            self._arity(node, 2)
            if not isinstance(args[1], Atom) or args[1].quoted:
                raise _err(args[1], "field name must be a symbol")
            return T.Field(sub(args[0]), args[1].text)
        if name == "quote":
            self._arity(node, 1)
            return T.Const(self.value(args[0]))
        if name in _ARITH:
            self._arity(node, 2)
            return T.BinOp(name, sub(args[0]), sub(args[1]))
        if name in _COMPARE:
            self._arity(node, 2)
            return T.BinOp(_COMPARE[name], sub(args[0]), sub(args[1]))
        if name in ("and", "or"):
            self._arity(node, 2)
            return T.BinOp(name, sub(args[0]), sub(args[1]))
        if name in ("not", "neg"):
            self._arity(node, 1)
            return T.UnaryOp(name, sub(args[0]))
        if name in BUILTINS:
            return T.Call(name, tuple(sub(a) for a in args))
        raise _err(head, f"unknown form {name!r}")


def parse_plan(text: str, sources: int | None = None) -> T.Term:
    """Parse one term; ``sources`` (if given) bounds the source indices."""
    forms = read_sexprs(text)
    if not forms:
        raise DSLSyntaxError("empty plan", 1, 1)
    if len(forms) > 1:
        extra = forms[1]
        raise _err(extra, "expected a single term")
    return _Builder(sources).term(forms[0])


def parse_monoid(text: str) -> MergeForm:
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise DSLSyntaxError("expected a single monoid", 1, 1)
    return _Builder(None).monoid(forms[0])


# ---------------------------------------------------------------------------
# printing


def _monoid_text(m: MergeForm) -> str:
    if isinstance(m, Sum):
        return "sum"
    if isinstance(m, Prod):
        return "prod"
    if isinstance(m, Union):
        return "union"
    if isinstance(m, And):
        return "and"
    if isinstance(m, Or):
        return "or"
    if isinstance(m, Box):
        return "box"
    if isinstance(m, Lifted):
        return f"(lift {_monoid_text(m.inner)})"
    if isinstance(m, Product):
        return "(product " + " ".join(_monoid_text(p) for p in m.parts) + ")"
    raise ValueError(f"{m} has no plan syntax")


def _pattern_text(p: T.Pattern) -> str:
    if isinstance(p, str):
        return p
    return "(" + " ".join(_pattern_text(x) for x in p) + ")"


def _value_text(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, tuple):
        if not v:
            return "()"
        return "(tuple " + " ".join(_value_text(x) for x in v) + ")"
    if isinstance(v, Bag):
        return "(bag " + " ".join(_value_text(x) for x in canonical_items(v)) + ")" if v else "(bag)"
    raise ValueError(f"value {v!r} has no plan syntax")


def to_dsl(t: T.Term) -> str:
    """Plan text that parses back to ``t``."""
    if isinstance(t, T.Var):
        return t.name
    if isinstance(t, T.Const):
        v = t.value
        if isinstance(v, (tuple, Bag)) and v != ():
            return f"(quote {_value_text(v)})"
        return _value_text(v)
    if isinstance(t, T.Source):
        return f"(source {t.index})"
    if isinstance(t, T.CMap):
        return f"(cmap {to_dsl(t.fn)} {to_dsl(t.input)})"
    if isinstance(t, T.GroupBy):
        return f"(groupby {to_dsl(t.input)})"
    if isinstance(t, T.CoGroup):
        return f"(cogroup {to_dsl(t.left)} {to_dsl(t.right)})"
    if isinstance(t, T.Reduce):
        return f"(reduce {_monoid_text(t.monoid)} {to_dsl(t.input)})"
    if isinstance(t, T.Repeat):
        return f"(repeat {to_dsl(t.fn)} {t.count} {to_dsl(t.init)})"
    if isinstance(t, T.Lambda):
        return f"(lambda ({_pattern_text(t.param)}) {to_dsl(t.body)})"
    if isinstance(t, T.Singleton):
        return f"(bag {to_dsl(t.expr)})"
    if isinstance(t, T.EmptyBag):
        return "(bag)"
    if isinstance(t, T.BagUnion):
        return f"(union {to_dsl(t.left)} {to_dsl(t.right)})"
    if isinstance(t, T.TupleE):
        return "(tuple " + " ".join(to_dsl(i) for i in t.items) + ")"
    if isinstance(t, T.If):
        return f"(if {to_dsl(t.cond)} {to_dsl(t.then)} {to_dsl(t.orelse)})"
    if isinstance(t, T.Apply):
        return f"(apply {to_dsl(t.fn)} {to_dsl(t.arg)})"
    if isinstance(t, T.Proj):
        return f"(nth {t.index} {to_dsl(t.expr)})"
    if isinstance(t, T.Field):
        return f"(get {to_dsl(t.expr)} {t.name})"
    if isinstance(t, T.BinOp):
        return f"({t.op} {to_dsl(t.left)} {to_dsl(t.right)})"
    if isinstance(t, T.UnaryOp):
        return f"({t.op} {to_dsl(t.expr)})"
    if isinstance(t, T.Call):
        return "(" + " ".join([t.name, *(to_dsl(a) for a in t.args)]) + ")"
    raise ValueError(f"{type(t).__name__} has no plan syntax")

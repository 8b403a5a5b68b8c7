"""Term syntax shared by queries, function bodies and answer functions.

Algebra operators and function-language expressions live in one tree: a
``CMap`` can appear inside a lambda body (as long as no ``Source`` is reachable
from it) and a lambda is an ordinary expression node.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator, Union as TypingUnion

from incrq.core.monoids import MergeForm

Pattern = TypingUnion[str, tuple]


class Term:
    """Base class of every syntax node."""

    __slots__ = ()

    def children(self) -> Iterator[tuple[str, "Term"]]:
        """``(label, child)`` pairs in left-to-right order."""
        return iter(())


# ---------------------------------------------------------------------------
# function language


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Const(Term):
    value: Any


@dataclass(frozen=True)
class TupleE(Term):
    items: tuple

    def children(self):
        for i, item in enumerate(self.items):
            yield f"item{i}", item


@dataclass(frozen=True)
class Proj(Term):
    """Positional projection (0-based). On a bag, projects every element."""

    expr: Term
    index: int

    def children(self):
        yield "expr", self.expr


@dataclass(frozen=True)
class Field(Term):
    """Named field of a record (a named tuple)."""

    expr: Term
    name: str

    def children(self):
        yield "expr", self.expr


ARITH_OPS = ("+", "-", "*", "/", "%")
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or")


@dataclass(frozen=True)
class BinOp(Term):
    op: str
    left: Term
    right: Term

    def children(self):
        yield "left", self.left
        yield "right", self.right


@dataclass(frozen=True)
class UnaryOp(Term):
    op: str  # "not" or "neg"
    expr: Term

    def children(self):
        yield "expr", self.expr


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    orelse: Term

    def children(self):
        yield "cond", self.cond
        yield "then", self.then
        yield "else", self.orelse


@dataclass(frozen=True)
class Singleton(Term):
    expr: Term

    def children(self):
        yield "elem", self.expr


@dataclass(frozen=True)
class EmptyBag(Term):
    pass


@dataclass(frozen=True)
class BagUnion(Term):
    left: Term
    right: Term

    def children(self):
        yield "left", self.left
        yield "right", self.right


@dataclass(frozen=True)
class Lambda(Term):
    param: Pattern
    body: Term

    def children(self):
        yield "body", self.body


@dataclass(frozen=True)
class Apply(Term):
    fn: Term
    arg: Term

    def children(self):
        yield "fn", self.fn
        yield "arg", self.arg


@dataclass(frozen=True)
class Call(Term):
    """Builtin function call (see ``incrq.evaluator.builtins``)."""

    name: str
    args: tuple

    def children(self):
        for i, a in enumerate(self.args):
            yield f"arg{i}", a


# ---------------------------------------------------------------------------
# algebra


@dataclass(frozen=True)
class Source(Term):
    index: int


@dataclass(frozen=True)
class CMap(Term):
    fn: Term
    input: Term

    def children(self):
        yield "fn", self.fn
        yield "input", self.input


@dataclass(frozen=True)
class GroupBy(Term):
    input: Term

    def children(self):
        yield "input", self.input


@dataclass(frozen=True)
class CoGroup(Term):
    left: Term
    right: Term

    def children(self):
        yield "left", self.left
        yield "right", self.right


@dataclass(frozen=True)
class Reduce(Term):
    monoid: MergeForm
    input: Term

    def children(self):
        yield "input", self.input


@dataclass(frozen=True)
class Repeat(Term):
    fn: Term  # Lambda over the loop variable; its body may read sources
    count: int
    init: Term

    def children(self):
        yield "fn", self.fn
        yield "init", self.init


@dataclass(frozen=True)
class SMap1(Term):
    fn: Term
    input: Term

    def children(self):
        yield "fn", self.fn
        yield "input", self.input


@dataclass(frozen=True)
class SMap2(Term):
    fn: Term
    input: Term

    def children(self):
        yield "fn", self.fn
        yield "input", self.input


@dataclass(frozen=True)
class SMap3(Term):
    fn: Term
    input: Term

    def children(self):
        yield "fn", self.fn
        yield "input", self.input


@dataclass(frozen=True)
class Swap(Term):
    input: Term

    def children(self):
        yield "input", self.input


@dataclass(frozen=True)
class Mix(Term):
    input: Term

    def children(self):
        yield "input", self.input


@dataclass(frozen=True)
class KMap(Term):
    fn: Term
    input: Term

    def children(self):
        yield "fn", self.fn
        yield "input", self.input


ALGEBRA_NODES = (Source, CMap, GroupBy, CoGroup, Reduce, Repeat, SMap1, SMap2, SMap3, Swap, Mix, KMap)
TRANSFORMED_NODES = (SMap1, SMap2, SMap3, Swap, Mix, KMap)


# ---------------------------------------------------------------------------
# helpers


def pattern_names(p: Pattern) -> list[str]:
    if isinstance(p, str):
        return [p]
    out: list[str] = []
    for sub in p:
        out.extend(pattern_names(sub))
    return out


def walk(term: Term, path: tuple = ()) -> Iterator[tuple[tuple, Term]]:
    """Pre-order traversal yielding ``(path, node)``."""
    yield path, term
    for label, child in term.children():
        yield from walk(child, path + (label,))


def free_vars(term: Term) -> frozenset:
    """Free variable names; sources appear as ``("source", i)``."""
    if isinstance(term, Var):
        return frozenset((term.name,))
    if isinstance(term, Source):
        return frozenset((("source", term.index),))
    if isinstance(term, Lambda):
        return free_vars(term.body) - frozenset(pattern_names(term.param))
    if isinstance(term, Repeat):
        inner = free_vars(term.fn)
        return inner | free_vars(term.init)
    out: frozenset = frozenset()
    for _, child in term.children():
        out |= free_vars(child)
    return out


def contains_source(term: Term) -> bool:
    return any(isinstance(node, Source) for _, node in walk(term))


def used_names(term: Term) -> set[str]:
    names: set[str] = set()
    for _, node in walk(term):
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Lambda):
            names.update(pattern_names(node.param))
    return names


class FreshNames:
    """Deterministic fresh-variable supply that avoids a given set of names."""

    def __init__(self, avoid: set[str], prefix: str = "v"):
        self.avoid = set(avoid)
        self.prefix = prefix
        self.counter = 0

    def __call__(self, hint: str | None = None) -> str:
        base = hint or self.prefix
        while True:
            name = f"{base}{self.counter}"
            self.counter += 1
            if name not in self.avoid:
                self.avoid.add(name)
                return name


def identity_fn(name: str = "x") -> Lambda:
    """``λx.{x}``"""
    return Lambda(name, Singleton(Var(name)))


def source_indices(term: Term) -> set[int]:
    return {node.index for _, node in walk(term) if isinstance(node, Source)}


def rebuild(t: Term, kids: dict[str, Term]) -> Term:
    """Copy ``t`` with its children replaced by label."""
    if not kids:
        return t
    if isinstance(t, TupleE):
        return TupleE(tuple(kids[f"item{i}"] for i in range(len(t.items))))
    if isinstance(t, Call):
        return Call(t.name, tuple(kids[f"arg{i}"] for i in range(len(t.args))))
    if isinstance(t, If):
        return If(kids["cond"], kids["then"], kids["else"])
    if isinstance(t, Singleton):
        return Singleton(kids["elem"])
    if isinstance(t, Lambda):
        return Lambda(t.param, kids["body"])
    if isinstance(t, Reduce):
        return Reduce(t.monoid, kids["input"])
    if isinstance(t, Repeat):
        return Repeat(kids["fn"], t.count, kids["init"])
    if isinstance(t, (Proj, Field)):
        return type(t)(kids["expr"], t.index if isinstance(t, Proj) else t.name)
    if isinstance(t, UnaryOp):
        return UnaryOp(t.op, kids["expr"])
    if isinstance(t, BinOp):
        return BinOp(t.op, kids["left"], kids["right"])
    # remaining nodes take their children positionally in declaration order
    return type(t)(*(kids[label] for label, _ in t.children()))

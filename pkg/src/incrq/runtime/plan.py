"""Compilation of a query into an incremental plan."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterable

from incrq.core.monoids import BOX, UNION, MergeForm, diffusion, diminisher
from incrq.errors import DeletionError, TermError
from incrq.evaluator import terms as T
from incrq.evaluator.pretty import pretty
from incrq.factoring import factor
from incrq.inference import Inferred, infer, infer_monoid
from incrq.lineage import CompiledQuery, annotate, answer_function, merger_monoid, query_case
from incrq.normalizer import normalize

log = logging.getLogger("incrq.plan")

LOOP_SOURCE = -1  # source index bound to the loop value inside iterative plans


@dataclass(frozen=True)
class IncrementalPlan:
    compiled: CompiledQuery
    mode: str = "one-shot"  # or "iterative"
    iterations: int = 0
    init: T.Term | None = None  # iterative: initial value term g
    loop_var: str | None = None
    loop_role: str | None = None  # "source" or "env"
    float_key_epsilon: float | None = None
    checks: str = "lax"  # or "strict"
    stream_sources: frozenset = frozenset()
    invariant_sources: frozenset = frozenset()

    @property
    def h(self) -> T.Term:
        return self.compiled.h

    @property
    def merger(self) -> MergeForm:
        return self.compiled.merger

    @property
    def answer(self) -> T.Lambda:
        return self.compiled.answer

    @property
    def diffusion(self) -> MergeForm:
        return diffusion(self.compiled.merger)

    def with_options(self, **kwargs) -> "IncrementalPlan":
        return replace(self, **kwargs)


def compile_query(
    q: T.Term,
    *,
    invariant_sources: Iterable[int] = (),
    float_key_epsilon: float | None = None,
    checks: str = "lax",
) -> IncrementalPlan:
    """normalize, annotate, factor if needed, infer, then derive merger and answer."""
    invariant = frozenset(invariant_sources)
    if isinstance(q, T.Repeat):
        return _compile_iterative(q, invariant, float_key_epsilon, checks)
    compiled = compile_one_shot(q, invariant)
    streams = frozenset(T.source_indices(q)) - invariant
    return IncrementalPlan(
        compiled,
        float_key_epsilon=float_key_epsilon,
        checks=checks,
        stream_sources=streams,
        invariant_sources=invariant,
    )


def _rho(term: T.Term, invariant: frozenset, extra: dict | None = None) -> dict:
    rho: dict = {}
    for i in T.source_indices(term):
        rho[("source", i)] = BOX if i in invariant else UNION
    rho.update(extra or {})
    return rho


def compile_one_shot(q: T.Term, invariant: frozenset = frozenset(), env_monoids: dict | None = None) -> CompiledQuery:
    normalized = normalize(q)
    annotated = annotate(normalized)
    rho = _rho(annotated, invariant, env_monoids)
    notes: list[str] = []
    first = infer(rho, annotated)
    wrapper = None
    inner_merger = None
    if isinstance(first, Inferred):
        hom = annotated
        hom_monoid = first.monoid
    else:
        notes.append(f"inference failed: {first}")
        factored = factor(annotated, rho)
        notes.extend(factored.decisions)
        hom, wrapper = factored.hom, factored.wrapper
        hom_monoid = infer_monoid(rho, hom)
        if factored.crossed_reduce:
            inner_merger = factored.inner_merger
            notes.append("answer applies the extracted remainder before the outer reduce")
    if inner_merger is not None:
        merger = inner_merger
    else:
        merger = merger_monoid(normalized, hom_monoid)
    answer = answer_function(normalized, merger, wrapper, inner_merger)
    notes.append(f"answer case: {query_case(normalized)}")
    return CompiledQuery(hom, merger, answer, normalized, wrapper, tuple(notes))


# ---------------------------------------------------------------------------
# iteration


def _stream_positions(t: T.Term, name: str) -> bool:
    """Whether ``Var(name)`` occurs where a source could (outside any function)."""
    if isinstance(t, T.Lambda):
        return False
    if isinstance(t, T.Var):
        return t.name == name
    return any(_stream_positions(c, name) for label, c in t.children() if label != "fn")


def _used_in_functions(t: T.Term, name: str) -> bool:
    for path, node in T.walk(t):
        if isinstance(node, T.Lambda) and name in T.free_vars(node):
            return True
    return False


def substitute_loop_source(t: T.Term, name: str) -> T.Term:
    """Replace stream-position occurrences of ``Var(name)`` with the loop source."""
    if isinstance(t, T.Var) and t.name == name:
        return T.Source(LOOP_SOURCE)
    if isinstance(t, T.Lambda) or not isinstance(t, T.ALGEBRA_NODES):
        return t
    kids = {label: (c if label == "fn" else substitute_loop_source(c, name)) for label, c in t.children()}
    return T.rebuild(t, kids) if kids else t


def _compile_iterative(q: T.Repeat, invariant: frozenset, eps: float | None, checks: str) -> IncrementalPlan:
    if not isinstance(q.fn, T.Lambda) or not isinstance(q.fn.param, str):
        raise TermError("repeat step must be a lambda over a single loop variable", ("fn",), pretty(q.fn))
    if q.count < 1:
        raise TermError("iterative plans need at least one iteration", (), pretty(q))
    normalized = normalize(q)
    assert isinstance(normalized, T.Repeat) and isinstance(normalized.fn, T.Lambda)
    x = normalized.fn.param
    body = normalized.fn.body
    as_stream = _stream_positions(body, x)
    in_functions = _used_in_functions(body, x)
    if as_stream and in_functions:
        raise TermError(f"loop variable {x} is used both as a stream and inside functions", ("fn",), pretty(q.fn))
    if as_stream:
        role = "source"
        body = substitute_loop_source(body, x)
        compiled = compile_one_shot(body, invariant)
    else:
        role = "env"
        compiled = compile_one_shot(body, invariant, {x: BOX})
    compiled = replace(compiled, original=normalized, notes=compiled.notes + (f"loop variable {x} acts as {role}",))
    streams = frozenset(T.source_indices(q)) - invariant
    return IncrementalPlan(
        compiled,
        mode="iterative",
        iterations=q.count,
        init=normalized.init,
        loop_var=x,
        loop_role=role,
        float_key_epsilon=eps,
        checks=checks,
        stream_sources=streams,
        invariant_sources=invariant,
    )


def explain(plan: IncrementalPlan) -> str:
    """Multi-line description of a compiled plan."""
    c = plan.compiled
    lines = [
        f"original: {pretty(c.original)}",
        f"h:        {pretty(c.h)}",
        f"merger:   {c.merger}",
        f"answer:   {pretty(c.answer)}",
    ]
    if c.wrapper is not None:
        lines.append(f"wrapper:  {pretty(c.wrapper)}")
    if plan.mode == "iterative":
        lines.append(f"mode:     iterative, n = {plan.iterations}, loop variable {plan.loop_var} ({plan.loop_role})")
        lines.append(f"diffusion: {plan.diffusion}")
        if plan.init is not None:
            lines.append(f"init:     {pretty(plan.init)}")
    if plan.float_key_epsilon is not None:
        lines.append(f"keys:     approximate, epsilon = {plan.float_key_epsilon}")
    try:
        lines.append(f"deletions: {diminisher(c.merger)}")
    except DeletionError as exc:
        lines.append(f"deletions: unsupported ({exc})")
    for note in c.notes:
        lines.append(f"note:     {note}")
    return "\n".join(lines)


"""The four benchmark queries and the datasets that drive them."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from incrq.core.monoids import SUM
from incrq.core.values import Bag
from incrq.evaluator import terms as T
from incrq.workbench import generators

# ---------------------------------------------------------------------------
# small term builders


def v(name: str) -> T.Var:
    return T.Var(name)


def c(value) -> T.Const:
    return T.Const(value)


def lam(param: T.Pattern, body: T.Term) -> T.Lambda:
    return T.Lambda(param, body)


def tup(*items: T.Term) -> T.TupleE:
    return T.TupleE(tuple(items))


def single(e: T.Term) -> T.Singleton:
    return T.Singleton(e)


def proj(e: T.Term, i: int) -> T.Proj:
    return T.Proj(e, i)


def op(symbol: str, left: T.Term, right: T.Term) -> T.BinOp:
    return T.BinOp(symbol, left, right)


def total(bag: T.Term) -> T.Reduce:
    return T.Reduce(SUM, bag)


def avg(bag: T.Term, name: str = "w") -> T.BinOp:
    """``reduce(+, s) / reduce(+, cMap(λw.{1}, s))``"""
    return op("/", total(bag), total(T.CMap(lam(name, single(c(1))), bag)))


# ---------------------------------------------------------------------------
# queries


def groupby_avg() -> T.Term:
    """Average value per key of a stream of ``(key, value)`` pairs."""
    pairs = T.CMap(lam(("x", "y"), single(tup(v("x"), v("y")))), T.Source(0))
    return T.CMap(lam(("k", "s"), single(tup(v("k"), avg(v("s"))))), T.GroupBy(pairs))


def join_groupby_avg() -> T.Term:
    """Join ``x = (A, B)`` with ``y = (C, D)`` on ``B = C``; average ``D`` per ``A``."""
    left = T.CMap(lam("x", single(tup(proj(v("x"), 1), v("x")))), T.Source(0))
    right = T.CMap(lam("y", single(tup(proj(v("y"), 0), v("y")))), T.Source(1))
    pair_up = T.CMap(
        lam("x", T.CMap(lam("y", single(tup(proj(v("x"), 0), proj(v("y"), 1)))), v("ys"))),
        v("xs"),
    )
    joined = T.CMap(lam(("j", ("xs", "ys")), pair_up), T.CoGroup(left, right))
    return T.CMap(lam(("k", "s"), single(tup(v("k"), avg(v("s"))))), T.GroupBy(joined))


KMEANS_START = ((1.0, 1.0), (1.0, 9.0), (9.0, 1.0), (9.0, 9.0))
KMEANS_EXPECTED = ((3.0, 3.0), (3.0, 7.0), (7.0, 3.0), (7.0, 7.0))


def _coordinate_avg(points: T.Term, i: int) -> T.BinOp:
    return op(
        "/",
        total(T.CMap(lam("p", single(proj(v("p"), i))), points)),
        total(T.CMap(lam("p", single(c(1))), points)),
    )


def kmeans(iterations: int = 10, start=KMEANS_START) -> T.Term:
    """Lloyd iterations over a stream of points, starting from fixed centroids."""

    def sq(e: T.Term) -> T.Term:
        return op("*", e, e)

    dist = lam(
        "cn",
        op("+", sq(op("-", proj(v("cn"), 0), proj(v("p"), 0))), sq(op("-", proj(v("cn"), 1), proj(v("p"), 1)))),
    )
    assign = T.CMap(
        lam("p", single(tup(T.Call("argmin", (dist, v("X"))), v("p")))),
        T.Source(0),
    )
    step = T.CMap(
        lam(("k", "ps"), single(tup(_coordinate_avg(v("ps"), 0), _coordinate_avg(v("ps"), 1)))),
        T.GroupBy(assign),
    )
    return T.Repeat(lam("X", step), iterations, c(Bag(start)))


DAMPING = 0.85


def pagerank(iterations: int = 10, damping: float = DAMPING) -> T.Term:
    """Unnormalized PageRank over rows ``(node, bag of out-neighbours)``."""
    rows = T.CMap(lam(("u", "adj"), single(tup(v("u"), v("adj")))), T.Source(0))
    contributions = T.CMap(
        lam(
            ("u", ("rank", "adj")),
            T.BagUnion(
                single(tup(v("u"), c(0.0))),
                T.CMap(lam("t", single(tup(v("t"), op("/", v("rank"), T.Call("size", (v("adj"),)))))), v("adj")),
            ),
        ),
        v("X"),
    )
    new_rank = op("+", c(round(1.0 - damping, 12)), op("*", c(damping), total(v("contribs"))))
    step = T.CMap(
        lam(("n", ("rows", "contribs")), single(tup(v("n"), tup(new_rank, T.Call("flatten", (v("rows"),)))))),
        T.CoGroup(rows, contributions),
    )
    init = T.CMap(lam(("u", "adj"), single(tup(v("u"), tup(c(1.0), v("adj"))))), T.Source(0))
    return T.Repeat(lam("X", step), iterations, init)


# ---------------------------------------------------------------------------
# datasets


Epochs = list  # list of {source index: Bag}, the first entry is the initial data


def groupby_avg_data(seed: int, initial: int = 10_000, batches: int = 9, batch_size: int = 1_000) -> Epochs:
    out = [{0: Bag(generators.pairs(initial, seed))}]
    for i in range(batches):
        out.append({0: Bag(generators.pairs(batch_size, seed * 1_000 + i + 1))})
    return out


def join_data(seed: int, initial: int = 2_000, batches: int = 9, batch_size: int = 200) -> Epochs:
    """One-to-many join data: ``B`` is unique among ``x`` rows and every ``y.C`` names a known ``B``."""
    rng = random.Random(seed)
    need = initial + batches * batch_size
    if need > generators.PAIR_MAX + 1:
        raise ValueError("not enough distinct join keys for the requested sizes")
    keys = rng.sample(range(generators.PAIR_MAX + 1), need)
    known: list[int] = []
    out: Epochs = []
    offset = 0
    for size in [initial] + [batch_size] * batches:
        fresh = keys[offset : offset + size]
        offset += size
        known.extend(fresh)
        xs = [(rng.randint(0, generators.PAIR_MAX), b) for b in fresh]
        ys = [(rng.choice(known), rng.randint(0, generators.PAIR_MAX)) for _ in range(size)]
        out.append({0: Bag(xs), 1: Bag(ys)})
    return out


def kmeans_data(seed: int, initial: int = 10_000, batches: int = 9, batch_size: int = 1_000) -> Epochs:
    out = [{0: Bag(generators.squares(initial, seed))}]
    for i in range(batches):
        out.append({0: Bag(generators.squares(batch_size, seed * 1_000 + i + 1))})
    return out


def adjacency_rows(edges: list[tuple[int, int]], nodes: range) -> Bag:
    adj: dict[int, list[int]] = {u: [] for u in nodes}
    for u, t in edges:
        adj[u].append(t)
    return Bag((u, Bag(ts)) for u, ts in adj.items())


@dataclass
class GraphEpochs:
    epochs: Epochs
    edges: list  # cumulative edge list per epoch
    new_nodes: list  # node ids introduced by each epoch


def pagerank_data(
    seed: int,
    nodes: int = 1_000,
    edges: int = 10_000,
    increments: int = 9,
    new_nodes: int = 100,
    new_edges: int = 200,
    dedup: bool = True,
) -> GraphEpochs:
    """R-MAT base graph plus increments of fresh nodes whose edges point anywhere."""
    base = generators.rmat(nodes, edges, seed, dedup=dedup)
    epochs: Epochs = [{0: adjacency_rows(base, range(nodes))}]
    cumulative = [list(base)]
    introduced = [list(range(nodes))]
    first = nodes
    for i in range(increments):
        extra = generators.graph_increment(first, new_nodes, new_edges, seed * 1_000 + i + 1)
        epochs.append({0: adjacency_rows(extra, range(first, first + new_nodes))})
        cumulative.append(cumulative[-1] + extra)
        introduced.append(list(range(first, first + new_nodes)))
        first += new_nodes
    return GraphEpochs(epochs, cumulative, introduced)


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class BenchmarkFixture:
    name: str
    build: Callable[..., T.Term]
    data: Callable[..., object]
    sources: int = 1
    invariant_for_direct_checks: tuple = ()  # sources held fixed when checking h directly
    epsilon: float | None = None
    params: dict = field(default_factory=dict)


FIXTURES: dict[str, BenchmarkFixture] = {
    "groupby-avg": BenchmarkFixture("groupby-avg", groupby_avg, groupby_avg_data),
    "join-groupby-avg": BenchmarkFixture(
        "join-groupby-avg", join_groupby_avg, join_data, sources=2, invariant_for_direct_checks=(0,)
    ),
    "kmeans": BenchmarkFixture("kmeans", kmeans, kmeans_data, epsilon=0.2, params={"iterations": 10}),
    "pagerank": BenchmarkFixture(
        "pagerank", pagerank, pagerank_data, invariant_for_direct_checks=(0,), params={"iterations": 10, "damping": DAMPING}
    ),
}


def get_fixture(name: str) -> BenchmarkFixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}") from None

"""End-to-end acceptance checks, one test per criterion.

Every test records a ``PASS``/``FAIL`` line in ``RESULTS``; the conftest
prints them after the run, and running this file directly prints them too.
"""

from __future__ import annotations

import functools
import itertools
import random
import statistics
import time

from typing import Callable

import oracles
from incrq.core import BOX, SUM, UNION, Bag, Lifted, Product, bag_equals, merge, monoid_merge
from incrq.errors import BoxConflict
from incrq.evaluator import terms as T
from incrq.evaluator.interp import evaluate
from incrq.runtime import compile_query, diffusion, diminisher, ingest_batch, ingest_deletion, init_state
from incrq.workbench import fixtures

RESULTS: list[str] = []

# pinned tolerances
FLOAT_TOL = 1e-9  # oracle equivalence on averages
DIVISION_TOL = 1e-12  # answer-after-h against the query, float division only
KMEANS_BATCH_TOL = 0.2  # L-infinity from the expected centres
KMEANS_INCREMENTAL_TOL = 0.1  # L-infinity between incremental and batch centroids
PAGERANK_L1_TOL = 0.25  # L1 between normalized incremental and batch rank vectors
SPEEDUP = 5.0  # batch epoch time / incremental epoch time, medians over epochs 2-10
STATE_TO_BATCH = 100  # minimum ratio of live data to batch size for the timing check


def criterion(number: int, title: str):
    """Run a check returning ``(ok, detail)`` and record its outcome."""

    def wrap(check):
        @functools.wraps(check)
        def run(*args, **kwargs):
            started = time.perf_counter()
            try:
                ok, detail = check(*args, **kwargs)
            except Exception as exc:
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            detail = f"{detail}; {time.perf_counter() - started:.1f} s"
            line = f"{'PASS' if ok else 'FAIL'}  {number:2d}. {title}  [{detail}]"
            RESULTS.append(line)
            print(line)
            assert ok, line

        return run

    return wrap


def _cumulative(epochs: list, upto: int) -> dict:
    out: dict = {}
    for epoch in epochs[: upto + 1]:
        for i, bag in epoch.items():
            out[i] = out.get(i, Bag()).union(bag)
    return out


def _oracle_run(name: str, plan, epochs: list) -> tuple[bool, str]:
    state = init_state(plan, epochs[0])
    worst = 0
    for k in range(len(epochs)):
        if k:
            state, _ = ingest_batch(plan, state, epochs[k])
        expected = evaluate(plan.compiled.original, _cumulative(epochs, k))
        if not bag_equals(state.answer(), expected, FLOAT_TOL):
            return False, f"{name} epoch {k} differs from recomputation"
        worst = max(worst, len(expected))
    return True, f"10 epochs, up to {worst} groups"


# ---------------------------------------------------------------------------
# 1-2: oracle equivalence on the grouped benchmarks


@criterion(1, "group-by average matches full recomputation after every epoch")
def test_groupby_avg_oracle():
    plan = compile_query(fixtures.groupby_avg())
    epochs = fixtures.groupby_avg_data(1)
    ok, detail = _oracle_run("groupby-avg", plan, epochs)
    # independent route: plain dictionaries over the raw pairs
    state = init_state(plan, _cumulative(epochs, len(epochs) - 1))
    direct = oracles.groupby_avg(list(_cumulative(epochs, len(epochs) - 1)[0]))
    return ok and oracles.as_dict(state.answer()) == direct, detail


@criterion(2, "join then group-by average matches full recomputation after every epoch")
def test_join_groupby_avg_oracle():
    plan = compile_query(fixtures.join_groupby_avg())
    epochs = fixtures.join_data(1)
    try:
        ok, detail = _oracle_run("join-groupby-avg", plan, epochs)
    except BoxConflict as exc:
        return False, f"one-to-many check fired: {exc}"
    everything = _cumulative(epochs, len(epochs) - 1)
    direct = oracles.join_groupby_avg(list(everything[0]), list(everything[1]))
    expected = evaluate(plan.compiled.original, everything)
    return ok and oracles.as_dict(expected) == direct, detail


# ---------------------------------------------------------------------------
# 3-4: the compiled h on small seeded inputs


def _small_case(name: str, rng: random.Random) -> tuple[list, Callable]:
    """Streamed items for one benchmark plus ``rebuild``.

    ``rebuild(items)`` turns a sub-list of the items into the arguments
    ``(data, loop_value)`` that h is evaluated on; everything else is held fixed.
    """
    if name == "groupby-avg":
        items = oracles.small_pairs(rng, rng.randrange(1, 300))
        return items, lambda xs: ({0: Bag(xs)}, None)
    if name == "join-groupby-avg":
        xs, ys = oracles.small_join(rng, rng.randrange(1, 200))
        return ys, lambda part: ({0: Bag(xs), 1: Bag(part)}, None)
    if name == "kmeans":
        items = oracles.small_points(rng, rng.randrange(1, 400))
        centroids = Bag({(float(rng.randrange(11)), float(rng.randrange(11))) for _ in range(4)})
        return items, lambda ps: ({0: Bag(ps)}, centroids)
    rows, loop = oracles.small_graph(rng, rng.randrange(1, 120))
    return list(loop), lambda part: ({0: rows}, Bag(part))


BENCHMARKS = sorted(fixtures.FIXTURES)
PLANS = {name: compile_query(fixtures.FIXTURES[name].build()) for name in BENCHMARKS}


@criterion(3, "compiled h is a homomorphism over the streamed inputs")
def test_h_is_a_homomorphism():
    for name in BENCHMARKS:
        plan = PLANS[name]
        for seed in range(100):
            rng = random.Random(seed)
            items, rebuild = _small_case(name, rng)
            left, right = oracles.split(rng, items)
            whole = oracles.eval_h(plan, *rebuild(items))
            parts = monoid_merge(plan.merger, oracles.eval_h(plan, *rebuild(left)), oracles.eval_h(plan, *rebuild(right)))
            if whole != parts:
                return False, f"{name} seed {seed}"
    return True, "4 benchmarks x 100 splits, exact"


@criterion(4, "answer applied to h reproduces the query")
def test_answer_after_h_is_the_query():
    for name in BENCHMARKS:
        plan = PLANS[name]
        for seed in range(100):
            rng = random.Random(1000 + seed)
            items, rebuild = _small_case(name, rng)
            data, loop_value = rebuild(items)
            got = oracles.answer_of(plan, oracles.eval_h(plan, data, loop_value))
            want = oracles.eval_original(plan, data, loop_value)
            if not bag_equals(got, want, DIVISION_TOL):
                return False, f"{name} seed {seed}"
    return True, f"4 benchmarks x 100 inputs, tol {DIVISION_TOL}"


# ---------------------------------------------------------------------------
# 5: algebra identities


def _random_pairs(rng: random.Random) -> list:
    return [(rng.randrange(6), rng.choice("ABCDEFG")) for _ in range(rng.randrange(30))]


@criterion(5, "group-by unnesting, coGroup reconstruction and coGroup with an empty side")
def test_algebra_identities():
    group_by, co_group = T.GroupBy(T.Source(0)), T.CoGroup(T.Source(0), T.Source(1))
    for seed in range(200):
        rng = random.Random(seed)
        xs, ys = _random_pairs(rng), _random_pairs(rng)
        grouped = evaluate(group_by, {0: Bag(xs)})
        if Bag((k, a) for k, g in grouped for a in g) != Bag(xs):
            return False, f"unnesting, seed {seed}"
        joined = evaluate(co_group, {0: Bag(xs), 1: Bag(ys)})
        if Bag((k, a) for k, (g, _) in joined for a in g) != Bag(xs) or Bag(
            (k, b) for k, (_, g) in joined for b in g
        ) != Bag(ys):
            return False, f"reconstruction, seed {seed}"
        one_sided = evaluate(co_group, {0: Bag(xs), 1: Bag()})
        if one_sided != Bag((k, (g, Bag())) for k, g in grouped):
            return False, f"empty side, seed {seed}"
    return True, "200 seeded bags each, exact"


# ---------------------------------------------------------------------------
# 6-7: merge laws


def _lifted_case(rng: random.Random, shape: str, nonzero: bool = False) -> Bag:
    keys = rng.sample(range(10), rng.randrange(0, 7))
    if shape == "union":
        return Bag((k, Bag(rng.randrange(4) for _ in range(rng.randrange(1 if nonzero else 0, 4)))) for k in keys)
    if shape == "sum":
        return Bag((k, rng.choice([-1, 1]) * rng.randrange(1 if nonzero else 0, 50)) for k in keys)
    return Bag((k, (k * 7, (rng.randrange(-50, 50), rng.randrange(1, 9)))) for k in keys)


SHAPES = {
    "union": Lifted(UNION),
    "sum": Lifted(SUM),
    "box-sum-sum": Lifted(Product(BOX, Product(SUM, SUM))),
}


@criterion(6, "merging the diffused delta into the state equals merging the full merge into it")
def test_diffusion_law():
    failures = []
    for seed in range(500):
        rng = random.Random(seed)
        shape = sorted(SHAPES)[seed % 3]
        m = SHAPES[shape]
        t, dt = _lifted_case(rng, shape), _lifted_case(rng, shape)
        left = monoid_merge(m, t, merge(diffusion(m), t, dt))
        right = monoid_merge(m, t, monoid_merge(m, t, dt))
        if left != right:
            failures.append(seed)
    return not failures, f"{500 - len(failures)}/500 exact; first failing seed {failures[:1]}"


@criterion(7, "deleting a merged delta restores the state, and deletion commutes with h")
def test_deletion_laws():
    for seed in range(500):
        rng = random.Random(seed)
        shape = sorted(SHAPES)[seed % 3]
        m = SHAPES[shape]
        x, y = _lifted_case(rng, shape, nonzero=True), _lifted_case(rng, shape, nonzero=True)
        if merge(diminisher(m), monoid_merge(m, x, y), y) != x:
            return False, f"merge law, {shape} seed {seed}"
    for name in ("groupby-avg", "join-groupby-avg"):
        plan = PLANS[name]
        form = diminisher(plan.merger)
        for seed in range(100):
            rng = random.Random(seed)
            items, rebuild = _small_case(name, rng)
            gone = rng.sample(items, rng.randrange(len(items) + 1))
            rest = list(Bag(items).difference(Bag(gone))[0])
            after = oracles.eval_h(plan, *rebuild(rest))
            if merge(form, oracles.eval_h(plan, *rebuild(items)), oracles.eval_h(plan, *rebuild(gone))) != after:
                return False, f"{name} h route, seed {seed}"
            data, _ = rebuild(items)
            state = init_state(plan, data)
            stream = 1 if name == "join-groupby-avg" else 0
            state, answer = ingest_deletion(plan, state, {stream: Bag(gone)})
            if state.value != after or answer != evaluate(plan.compiled.original, rebuild(rest)[0]):
                return False, f"{name} engine route, seed {seed}"
    return True, "500 merge cases and 2 x 100 end-to-end deletions, exact"


# ---------------------------------------------------------------------------
# 8-9: iterative benchmarks


def _linf(a: list, b: list) -> float:
    """L-infinity distance between two centroid sets under their best pairing."""
    if len(a) != len(b):
        return float("inf")
    return min(
        max(max(abs(p[0] - q[0]), abs(p[1] - q[1])) for p, q in zip(a, order)) for order in itertools.permutations(b)
    )


@criterion(8, "k-means centroids: batch near the expected centres, incremental near batch")
def test_kmeans():
    fx = fixtures.FIXTURES["kmeans"]
    term = fx.build()
    epochs = fixtures.kmeans_data(1)
    batch_initial = sorted(evaluate(term, epochs[0]))
    lloyd_initial = oracles.lloyd(list(epochs[0][0]), fixtures.KMEANS_START, 10)
    start_error = _linf(batch_initial, list(fixtures.KMEANS_EXPECTED))

    plan = compile_query(term, float_key_epsilon=fx.epsilon)
    state = init_state(plan, epochs[0])
    for delta in epochs[1:]:
        state, answer = ingest_batch(plan, state, delta)
    final_batch = sorted(evaluate(term, _cumulative(epochs, len(epochs) - 1)))
    incremental_error = _linf(sorted(answer), final_batch)
    ok = (
        start_error <= KMEANS_BATCH_TOL
        and _linf(batch_initial, lloyd_initial) <= 1e-9
        and _linf(final_batch, list(fixtures.KMEANS_EXPECTED)) <= KMEANS_BATCH_TOL
        and incremental_error <= KMEANS_INCREMENTAL_TOL
    )
    return ok, f"batch L-inf {start_error:.4f} <= {KMEANS_BATCH_TOL}, incremental L-inf {incremental_error:.4f} <= {KMEANS_INCREMENTAL_TOL}"


def _adjacency(edges: list, nodes) -> dict:
    adj: dict = {u: [] for u in nodes}
    for u, t in edges:
        adj[u].append(t)
    return adj


def _normalized(ranks: dict) -> dict:
    total = sum(ranks.values())
    return {u: r / total for u, r in ranks.items()}


def pagerank_run(seed: int) -> dict:
    """Incremental and batch PageRank on the scaled benchmark graph."""
    fx = fixtures.FIXTURES["pagerank"]
    params = fx.params
    term = fx.build(**params)
    graph = fixtures.pagerank_data(seed)
    plan = compile_query(term)
    state = init_state(plan, graph.epochs[0])
    hops_ok = True
    for k, delta in enumerate(graph.epochs[1:], start=1):
        state, answer = ingest_batch(plan, state, delta)
        adj = _adjacency(graph.edges[k], range(sum(len(n) for n in graph.new_nodes[: k + 1])))
        for i, touched in enumerate(state.trace, start=1):
            if not touched <= oracles.out_neighbourhood(adj, graph.new_nodes[k], i):
                hops_ok = False
    incremental = {u: r for u, (r, _) in answer}
    batch = {u: r for u, (r, _) in evaluate(term, _cumulative(graph.epochs, len(graph.epochs) - 1))}
    direct = oracles.pagerank(_adjacency(graph.edges[-1], batch), params["iterations"], params["damping"])
    inc_n, batch_n = _normalized(incremental), _normalized(batch)
    l1 = sum(abs(inc_n.get(u, 0.0) - batch_n.get(u, 0.0)) for u in set(inc_n) | set(batch_n))
    top = lambda ranks: {u for u, _ in sorted(ranks.items(), key=lambda kv: (-kv[1], kv[0]))[:20]}
    return {
        "l1": l1,
        "overlap": len(top(incremental) & top(batch)),
        "hops_ok": hops_ok,
        "batch_matches_direct": max(abs(batch[u] - direct[u]) for u in batch) <= 1e-9 and set(batch) == set(direct),
    }


@criterion(9, "PageRank: incremental ranks near batch ranks, changes spread one hop per iteration")
def test_pagerank():
    out = pagerank_run(1)
    ok = out["l1"] <= PAGERANK_L1_TOL and out["hops_ok"] and out["batch_matches_direct"]
    return ok, f"L1 {out['l1']:.4f} <= {PAGERANK_L1_TOL}, top-20 overlap {out['overlap']}/20, hop bound {'held' if out['hops_ok'] else 'broken'}"


# ---------------------------------------------------------------------------
# 10: incremental work


@criterion(10, "per-epoch work is proportional to the batch")
def test_incremental_work():
    plan = compile_query(fixtures.groupby_avg())
    epochs = fixtures.groupby_avg_data(2, initial=20_000, batches=10, batch_size=100)
    state = init_state(plan, epochs[0])
    incremental, batch, counts_ok, ratio = [], [], True, float("inf")
    for k, delta in enumerate(epochs[1:], start=1):
        started = time.perf_counter()
        state, _ = ingest_batch(plan, state, delta)
        incremental.append(time.perf_counter() - started)
        counts_ok &= state.metrics[-1].h_tuples == len(delta[0])
        data = _cumulative(epochs, k)
        ratio = min(ratio, len(data[0]) / len(delta[0]))
        started = time.perf_counter()
        evaluate(plan.compiled.original, data)
        batch.append(time.perf_counter() - started)
    inc, full = statistics.median(incremental[1:]), statistics.median(batch[1:])
    ok = counts_ok and ratio >= STATE_TO_BATCH and inc * SPEEDUP <= full
    return ok, f"h tuples = |batch| {'always' if counts_ok else 'NOT always'}, ratio {ratio:.0f}:1, median {inc * 1e3:.2f} ms vs {full * 1e3:.1f} ms ({full / inc:.0f}x)"


if __name__ == "__main__":
    for name, check in sorted(globals().items()):
        if name.startswith("test_"):
            try:
                check()
            except AssertionError:
                pass

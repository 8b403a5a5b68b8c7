import logging
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from incrq.core import BOX, SUM, UNION, Bag, Lifted, Product, bag_equals, merge, monoid_merge
from incrq.errors import BoxConflict, DeletionError, EvalError
from incrq.evaluator import terms as T
from incrq.evaluator.interp import eval_function
from incrq.runtime import (
    AnswerView,
    StateStore,
    compile_query,
    diffusion,
    diminisher,
    explain,
    ingest_batch,
    ingest_deletion,
    init_state,
)
from incrq.runtime.answer import answer_shape
from incrq.runtime.engine import JOIN_VIOLATION
from incrq.workbench import fixtures
from incrq.workbench.fixtures import lam, single, tup, v

GROUPBY = compile_query(fixtures.groupby_avg())
JOIN = compile_query(fixtures.join_groupby_avg())


def answer_dict(answer: Bag) -> dict:
    return oracles.as_dict(answer)


# ---------------------------------------------------------------------------
# lifecycle examples


def test_empty_initial_data_gives_zero_state():
    state = init_state(GROUPBY, {0: Bag()})
    assert state.value == Bag()
    assert state.answer() == Bag()


def test_initial_state_of_group_by_avg():
    state = init_state(GROUPBY, {0: Bag([(1, 2), (1, 4)])})
    # the value keeps the group key next to the (sum, count) pair
    assert state.value == Bag([((1, ()), (1, (6, 2)))])


def test_ingest_example():
    state = init_state(GROUPBY, {0: Bag([(1, 2), (1, 4)])})
    state, answer = ingest_batch(GROUPBY, state, {0: Bag([(1, 6), (2, 1)])})
    assert state.value == Bag([((1, ()), (1, (12, 3))), ((2, ()), (2, (1, 1)))])
    assert bag_equals(answer, Bag([(1, 4.0), (2, 1.0)]))


def test_empty_batch_changes_nothing():
    state = init_state(GROUPBY, {0: Bag([(1, 2), (3, 4)])})
    before, answer = state.value, state.answer()
    state, again = ingest_batch(GROUPBY, state, {0: Bag()})
    assert state.value == before
    assert again == answer


def test_sequential_batches_equal_one_concatenated_batch():
    rng = random.Random(11)
    batches = [Bag(oracles.small_pairs(rng, 20)) for _ in range(10)]
    one = init_state(GROUPBY, {0: Bag()})
    for b in batches:
        one, last = ingest_batch(GROUPBY, one, {0: b})
    other = init_state(GROUPBY, {0: Bag()})
    other, together = ingest_batch(GROUPBY, other, {0: Bag(x for b in batches for x in b)})
    assert one.value == other.value
    assert bag_equals(last, together, 1e-12)


def test_join_with_one_empty_stream():
    xs = Bag([(10, 1), (11, 2)])
    state = init_state(JOIN, {0: xs, 1: Bag()})
    assert state.value == Bag()
    # the left groups wait in the coGroup index for their right-hand rows
    (groups,) = state.cogroup_index.values()
    assert groups == {1: Bag([((), (10, 1))]), 2: Bag([((), (11, 2))])}
    state, answer = ingest_batch(JOIN, state, {0: Bag(), 1: Bag([(1, 7), (2, 3), (1, 5)])})
    assert bag_equals(answer, Bag([(10, 6.0), (11, 3.0)]))


def test_many_to_many_join_is_detected_at_runtime():
    state = init_state(JOIN, {0: Bag([(10, 1)]), 1: Bag([(1, 5)])})
    with pytest.raises(BoxConflict, match=JOIN_VIOLATION):
        ingest_batch(JOIN, state, {0: Bag([(20, 1)]), 1: Bag()})


def test_h_reads_only_the_batch():
    rng = random.Random(2)
    state = init_state(GROUPBY, {0: Bag(oracles.small_pairs(rng, 500))})
    batch = Bag(oracles.small_pairs(rng, 37))
    state, _ = ingest_batch(GROUPBY, state, {0: batch})
    assert state.metrics[-1].h_tuples == 37
    assert state.metrics[-1].batch_size == 37


def test_unknown_source_is_rejected():
    state = init_state(GROUPBY, {0: Bag()})
    with pytest.raises(EvalError, match="not used"):
        ingest_batch(GROUPBY, state, {5: Bag([1])})


def test_explain_lists_the_plan():
    text = explain(GROUPBY)
    assert "merger:   ⇑(□×(+×+))" in text
    assert "deletions: ⇓←(□×(−×−))" in text


# ---------------------------------------------------------------------------
# deletions


def test_insert_then_delete_restores_state():
    rng = random.Random(4)
    state = init_state(GROUPBY, {0: Bag(oracles.small_pairs(rng, 50))})
    before = state.value
    batch = Bag(oracles.small_pairs(rng, 10))
    state, _ = ingest_batch(GROUPBY, state, {0: batch})
    state, _ = ingest_deletion(GROUPBY, state, {0: batch})
    assert state.value == before


def test_deletion_example():
    state = init_state(GROUPBY, {0: Bag([(1, 2), (1, 4), (1, 6)])})
    assert state.value == Bag([((1, ()), (1, (12, 3)))])
    state, answer = ingest_deletion(GROUPBY, state, {0: Bag([(1, 6)])})
    assert state.value == Bag([((1, ()), (1, (6, 2)))])
    assert bag_equals(answer, Bag([(1, 3.0)]))


def test_deleting_a_whole_key_drops_it():
    state = init_state(GROUPBY, {0: Bag([(1, 2), (2, 5)])})
    state, answer = ingest_deletion(GROUPBY, state, {0: Bag([(2, 5)])})
    assert state.value == Bag([((1, ()), (1, (2, 1)))])
    assert bag_equals(answer, Bag([(1, 2.0)]))


def test_strict_mode_rejects_non_subsets():
    plan = compile_query(fixtures.groupby_avg(), checks="strict")
    state = init_state(plan, {0: Bag([(1, 2)])})
    with pytest.raises(DeletionError, match="not a subset"):
        ingest_deletion(plan, state, {0: Bag([(1, 3)])})


def test_lax_mode_warns_on_negative_aggregates(caplog):
    state = init_state(GROUPBY, {0: Bag([(1, 2)])})
    with caplog.at_level(logging.WARNING):
        ingest_deletion(GROUPBY, state, {0: Bag([(1, 2), (1, 9)])})
    assert any("negative" in r.message for r in caplog.records)


def test_deletions_on_the_invariant_side_of_a_join_are_refused():
    state = init_state(JOIN, {0: Bag([(10, 1)]), 1: Bag([(1, 5)])})
    with pytest.raises(DeletionError):
        ingest_deletion(JOIN, state, {0: Bag([(10, 1)]), 1: Bag()})


def test_join_deletions_follow_the_oracle():
    rng = random.Random(8)
    xs, ys = oracles.small_join(rng, 40)
    state = init_state(JOIN, {0: Bag(xs), 1: Bag(ys)})
    gone = rng.sample(ys, 15)
    state, answer = ingest_deletion(JOIN, state, {0: Bag(), 1: Bag(gone)})
    rest, _ = Bag(ys).difference(Bag(gone))
    assert answer_dict(answer) == oracles.join_groupby_avg(xs, list(rest))


@pytest.mark.parametrize("seed", range(30))
def test_random_insert_delete_schedules(seed):
    rng = random.Random(seed)
    live: list = oracles.small_pairs(rng, 40)
    state = init_state(GROUPBY, {0: Bag(live)})
    for _ in range(6):
        if rng.random() < 0.5 and live:
            gone = rng.sample(live, rng.randrange(1, min(10, len(live)) + 1))
            for x in gone:
                live.remove(x)
            state, answer = ingest_deletion(GROUPBY, state, {0: Bag(gone)})
        else:
            batch = oracles.small_pairs(rng, rng.randrange(0, 15))
            live.extend(batch)
            state, answer = ingest_batch(GROUPBY, state, {0: Bag(batch)})
        assert answer_dict(answer) == oracles.groupby_avg(live)
        keys = [k for k, _ in state.value]
        assert len(keys) == len(set(keys))


# ---------------------------------------------------------------------------
# iteration


def test_pagerank_with_no_new_data_keeps_the_state():
    plan = compile_query(fixtures.pagerank(iterations=3))
    graph = fixtures.pagerank_data(1, nodes=40, edges=150, increments=0)
    state = init_state(plan, graph.epochs[0])
    before = state.value
    state, _ = ingest_batch(plan, state, {0: Bag()})
    assert state.value == before


def test_kmeans_state_holds_sums_and_counts_per_centroid():
    plan = compile_query(fixtures.kmeans(iterations=3), float_key_epsilon=0.2)
    rng = random.Random(0)
    state = init_state(plan, {0: Bag(oracles.small_points(rng, 40))})
    assert len(state.value) <= 4
    for (centroid, _), ((sx, cx), (sy, cy)) in state.value:
        assert cx == cy and cx > 0
        assert centroid == pytest.approx((sx / cx, sy / cy), abs=1.0)


def test_iterative_plans_refuse_deletions():
    plan = compile_query(fixtures.kmeans(iterations=2))
    state = init_state(plan, {0: Bag([(1.0, 1.0)])})
    with pytest.raises(DeletionError):
        ingest_deletion(plan, state, {0: Bag([(1.0, 1.0)])})


# ---------------------------------------------------------------------------
# merge forms


lifted_inner = Product(BOX, Product(SUM, SUM))
keyed_values = st.dictionaries(
    st.integers(0, 8), st.tuples(st.integers(-50, 50), st.integers(-50, 50)), max_size=6
)


def _tagged(d: dict) -> Bag:
    # the Box component is a function of the key, as it is for lineage-keyed states
    return Bag((k, (k * 10, v)) for k, v in d.items())


def _overwrite(state: Bag, changed: Bag) -> Bag:
    fresh = dict(changed)
    return Bag([(k, x) for k, x in state if k not in fresh] + list(changed))


@settings(max_examples=200, deadline=None)
@given(keyed_values, keyed_values)
def test_diffusion_holds_only_the_changed_keys(t, dt):
    m = Lifted(lifted_inner)
    big_t, big_dt = _tagged(t), _tagged(dt)
    diffused = merge(diffusion(m), big_t, big_dt)
    full = monoid_merge(m, big_t, big_dt)
    assert {k for k, _ in diffused} == set(dt)
    assert Bag(p for p in full if p[0] in dt) == diffused
    assert _overwrite(big_t, diffused) == full


@settings(max_examples=200, deadline=None)
@given(keyed_values, keyed_values)
def test_diffusion_law_when_the_delta_covers_the_state(t, dt):
    m = Lifted(lifted_inner)
    dt = {**{k: (0, 0) for k in t}, **dt}
    big_t, big_dt = _tagged(t), _tagged(dt)
    assert monoid_merge(m, big_t, merge(diffusion(m), big_t, big_dt)) == monoid_merge(
        m, big_t, monoid_merge(m, big_t, big_dt)
    )


@settings(max_examples=200, deadline=None)
@given(keyed_values, keyed_values)
def test_diminisher_law(x, y):
    m = Lifted(lifted_inner)
    big_x, big_y = _tagged(x), _tagged(y)
    assert merge(diminisher(m), monoid_merge(m, big_x, big_y), big_y) == big_x


@given(st.lists(st.integers(0, 5)), st.lists(st.integers(0, 5)))
def test_bag_diminisher(xs, ys):
    assert merge(diminisher(UNION), Bag(xs).union(Bag(ys)), Bag(ys)) == Bag(xs)


def test_bag_difference_example():
    assert merge(diminisher(UNION), Bag([1, 1, 2]), Bag([1])) == Bag([1, 2])


@settings(max_examples=100, deadline=None)
@given(st.lists(keyed_values, min_size=1, max_size=5))
def test_store_matches_value_merges(deltas):
    m = Lifted(lifted_inner)
    store = StateStore(m)
    expected = Bag()
    for d in deltas:
        store.merge(_tagged(d))
        expected = monoid_merge(m, expected, _tagged(d))
    assert store.to_bag() == expected
    assert store.diffuse(_tagged(deltas[0]), diffusion(m).inner) == merge(diffusion(m), expected, _tagged(deltas[0]))


# ---------------------------------------------------------------------------
# answer maintenance


def test_answer_shapes():
    assert answer_shape(GROUPBY.answer)[0] == "grouped"
    assert answer_shape(JOIN.answer)[0] == "grouped"
    source_plan = compile_query(T.CMap(lam(("k", "x"), single(tup(v("k"), v("x")))), T.Source(0)))
    assert answer_shape(source_plan.answer)[0] in ("values", "full")


@pytest.mark.parametrize("plan", [GROUPBY, JOIN], ids=["groupby", "join"])
@pytest.mark.parametrize("seed", range(10))
def test_answer_view_matches_the_answer_function(plan, seed):
    rng = random.Random(seed)
    if plan is GROUPBY:
        state = init_state(plan, {0: Bag(oracles.small_pairs(rng, 30))})
        batches = [{0: Bag(oracles.small_pairs(rng, 8))} for _ in range(5)]
    else:
        xs, ys = oracles.small_join(rng, 30)
        state = init_state(plan, {0: Bag(xs), 1: Bag(ys[:10])})
        batches = [{0: Bag(), 1: Bag(ys[i : i + 4])} for i in range(10, 30, 4)]
    for b in batches:
        state, answer = ingest_batch(plan, state, b)
        assert bag_equals(answer, eval_function(plan.answer, state.value), 1e-12)
    fresh = AnswerView(plan.answer, state.store)
    assert bag_equals(fresh.value(), state.answer(), 1e-12)

import random

import pytest
from hypothesis import given, settings, strategies as st

from staticfilter.engine import compute_filters
from staticfilter.evaluator import evaluate, filter_holds
from staticfilter.filters import Regime
from staticfilter.generators import random_program, random_store
from staticfilter.normalize import denormalize, normalize
from staticfilter.program import BOTTOM, TOP, And, Predicate, idb_predicates
from staticfilter.rewrite import (
    admissibility_context,
    compute_admissible_filter,
    is_admissible,
    rewrite_program,
    static_filter,
)

P4, OUT = Predicate("p", 4), Predicate("out", 1)


@pytest.fixture
def reach(load):
    p = normalize(load("reach.dl"))
    regime = Regime.auto(p)
    return p, regime, compute_filters(p, regime, "full")


def _ctx(reach, i):
    p, regime, a = reach
    return admissibility_context(p, p.rules[i], a), regime


def test_base_rule_filter_admissible(reach):
    ctx, regime = _ctx(reach, 0)
    psi = ctx.rule.filter
    # only N = 0 on its own is not enough: X = a is required by the head filter
    assert not is_admissible(ctx, psi, regime)
    x_eq_a = next(i for i in ctx.f_plus.items if i.pred.name == "eq_const" and i.pred.param == "a")
    assert is_admissible(ctx, And((psi, x_eq_a)), regime)


def test_f_plus_is_admissible(reach):
    for i in range(3):
        ctx, regime = _ctx(reach, i)
        assert is_admissible(ctx, ctx.f_plus, regime)


def test_out_rule_needs_no_filter(reach):
    ctx, regime = _ctx(reach, 2)
    assert is_admissible(ctx, TOP, regime)
    assert compute_admissible_filter(ctx, regime) is TOP


def test_step_rule_keeps_successor_and_bound(reach):
    ctx, regime = _ctx(reach, 1)
    psi = compute_admissible_filter(ctx, regime)
    assert sorted(a.pred.label for a in psi.items) == ["leq[5]", "succ"]
    assert is_admissible(ctx, psi, regime)


def test_reach_golden(load):
    out = static_filter(load("reach.dl"), "full").program
    assert denormalize(out, fresh_only=True) == load("reach_rewritten.dl")


def test_tc_golden(load):
    out = static_filter(load("tc.dl"), "casf").program
    assert denormalize(out, fresh_only=True) == load("tc_rewritten.dl")


def test_contradiction_deletes_rules(load):
    res = static_filter(load("contradiction.dl"), "full")
    assert res.dropped == [0, 1]
    assert res.program.rules == ()


def test_contradiction_filter_is_bottom(load):
    p = normalize(load("contradiction.dl"))
    regime = Regime.auto(p)
    a = compute_filters(p, regime)
    assert compute_admissible_filter(admissibility_context(p, p.rules[1], a), regime) is BOTTOM


def test_counter_step_rules_gain_condition(load):
    res = static_filter(load("counter3.dl"), "casf")
    steps = [r for r in res.program.rules if r.head.pred == P4]
    assert len(steps) == 3
    for r in steps:
        assert "Y = b" in str(r)
    # seeds of p are not assumed filtered, so the out-rule keeps its condition
    (out_rule,) = [r for r in res.program.rules if r.head.pred == OUT]
    assert "Y = b" in str(out_rule)


@pytest.mark.parametrize("name", ["reach.dl", "tc.dl", "counter3.dl", "finite.dl", "guarded_neg.dl", "winlose.dl"])
def test_idempotent(load, name):
    once = static_filter(load(name)).program
    assert static_filter(once).program == once


def test_output_declarations_kept(load):
    p = load("finite.dl")
    out = static_filter(p).program
    assert out.outputs == p.outputs and out.filters == p.filters and out.facts == p.facts


def test_negative_atoms_copied(load):
    p = normalize(load("guarded_neg.dl"))
    out = static_filter(p).program
    assert [r.negative for r in out.rules] == [r.negative for r in p.rules]


def test_rewrite_program_reports_dropped(load):
    p = normalize(load("reach.dl"))
    regime = Regime.auto(p)
    out, dropped = rewrite_program(p, compute_filters(p, regime), regime)
    assert dropped == [] and len(out.rules) == 3


def _filters_hold(res, store, model):
    thetas = res.assignment.thetas
    seeded = res.program.seeded_predicates()
    for pred, row in model:
        if pred in thetas and pred not in seeded:
            assert filter_holds(thetas[pred], row, store), (pred, row)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["full", "casf"]))
def test_random_equivalence(seed, mode):
    rng = random.Random(seed)
    p = random_program(rng)
    store = random_store(rng, p)
    res = static_filter(p, mode)
    before = evaluate(p, store)
    after = evaluate(res.program, store)
    assert before.facts(p.outputs) == after.facts(p.outputs)
    assert after.model() <= before.model()
    assert after.total_firings <= before.total_firings
    _filters_hold(res, store, after.facts(idb_predicates(p)))
    assert static_filter(res.program, mode).program == res.program

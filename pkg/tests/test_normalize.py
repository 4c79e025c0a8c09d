import random

from hypothesis import given, settings, strategies as st

import oracles
from staticfilter.evaluator import evaluate
from staticfilter.generators import NUMBERS, SYMBOLS, random_program, random_store
from staticfilter.normalize import denormalize, denormalize_rule, is_normal, normalize
from staticfilter.parser import parse_program
from staticfilter.program import Atom, Const, Predicate, Rule, Var, builtin

DOMAIN = SYMBOLS + NUMBERS + (3,)


def test_repeated_variable_becomes_eq():
    p = normalize(parse_program("@output out/1.\nq(X) :- e(X, X).\nout(X) :- q(X)."))
    x, v = Var("X"), Var("_v1")
    e = Predicate("e", 2)
    assert p.rules[0] == Rule(Atom(Predicate("q", 1), (x,)), (Atom(e, (x, v)),), (), Atom(builtin("eq"), (x, v)))


def test_already_normal_rule_untouched():
    p = parse_program("@output out/1.\nq(X) :- e(X, X).\nout(X) :- q(X).")
    assert normalize(p).rules[1] == p.rules[1]


def test_constant_in_atom_moves_to_filter():
    p = normalize(parse_program("@output out/1.\nout(Y) :- e(a, Y)."))
    (rule,) = p.rules
    assert rule.positive[0].args == (Var("_v1"), Var("Y"))
    assert rule.filter == Atom(builtin("eq_const", "a"), (Var("_v1"),))


def test_arithmetic_is_flattened():
    p = normalize(parse_program("@output o/1.\no(M) :- r(N), M = N + 1, M <= 3."))
    assert is_normal(p)
    names = sorted(a.pred.name for a in p.rules[0].filter.items)
    assert names == ["leq", "succ"]


def test_fresh_names_avoid_clashes():
    p = normalize(parse_program("@output o/1.\no(_v1) :- e(_v1, _v1)."))
    assert p.rules[0].positive[0].args == (Var("_v1"), Var("_v2"))


def test_is_normal():
    assert not is_normal(parse_program("@output o/1.\no(X) :- e(X, a)."))
    assert is_normal(parse_program("@output o/1.\no(X) :- e(X, Y), Y = a."))


def test_denormalize_folds_fresh_eq():
    p = parse_program("@output out/1.\nq(X) :- e(X, X).\nout(X) :- q(X).")
    assert denormalize(normalize(p)) == p


def test_denormalize_folds_constants():
    p = parse_program("@output out/1.\nout(Y) :- e(X, Y), X = a.")
    assert str(denormalize(p).rules[0]) == "out(Y) :- e(a, Y)."


def test_fresh_only_keeps_user_equalities():
    p = parse_program("@output out/1.\nout(Y) :- e(X, Y), X = a.")
    assert denormalize(p, fresh_only=True) == p


def test_denormalize_leaves_shared_variable():
    # X also feeds the head, so the equality cannot be folded into e
    p = parse_program("@output out/1.\nout(X) :- e(X), X = a.")
    rule = p.rules[0]
    assert denormalize_rule(rule).filter == rule.filter


def test_denormalize_leaves_variable_used_elsewhere_in_filter():
    p = parse_program("@output o/1.\no(Y) :- e(Y, Z), Z = Y, Z <= 3.")
    rule = p.rules[0]
    assert denormalize_rule(rule) == rule


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_normalize_idempotent(seed):
    p = random_program(random.Random(seed))
    raw = denormalize(p)
    once = normalize(raw)
    assert is_normal(once)
    assert normalize(once) == once


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_normalize_preserves_model(seed):
    rng = random.Random(seed)
    raw = denormalize(random_program(rng))
    store = random_store(rng, raw, 15)
    expected = oracles.naive_model(raw, store.facts(), DOMAIN)
    assert evaluate(normalize(raw), store).model() == frozenset(expected)


def test_constant_terms_survive_round_trip():
    p = parse_program("@output o/1.\no(X) :- e(X, 3, b).")
    back = denormalize(normalize(p))
    assert back.rules[0].positive[0].args[1:] == (Const(3), Const("b"))

"""Program families used by the benchmarks and tests."""

from __future__ import annotations

import itertools
import random

from .evaluator import FactStore
from .program import (
    TOP,
    And,
    Or,
    Atom,
    Const,
    Predicate,
    Program,
    Rule,
    TheoryRule,
    Var,
    builtin,
    conjoin,
    FALSE,
)
from .normalize import normalize

E = Predicate("e", 2)
OUT = Predicate("out", 1)


def _eq(v: Var, c) -> Atom:
    return Atom(builtin("eq_const", c), (v,))


def _step_rules(p: Predicate, xs: list, y: Var) -> list[Rule]:
    """Increment rules, lowest bit first.

    Rule i turns x_1..x_{i-1} 0 1..1 y into x_1..x_{i-1} 1 0..0 y.
    """
    bits = len(xs)
    rules = []
    for i in range(bits, 0, -1):
        prefix = xs[: i - 1]
        rest = bits - i
        head = Atom(p, (*prefix, Const(1), *[Const(0)] * rest, y))
        body = Atom(p, (*prefix, Const(0), *[Const(1)] * rest, y))
        rules.append(Rule(head, (body,)))
    return rules


def gen_counter(bits: int) -> tuple[Program, FactStore]:
    """Binary counter over ``bits`` bits seeded from 0..00a and 1..10b; only ``b`` reaches the output."""
    if bits < 1:
        raise ValueError("the counter needs at least one bit")
    p = Predicate("p", bits + 1)
    xs = [Var(f"X{k}") for k in range(1, bits + 1)]
    y = Var("Y")
    rules = _step_rules(p, xs, y)
    rules.append(Rule(Atom(OUT, (y,)), (Atom(p, (*xs, y)),), (), _eq(y, "b")))
    seeds = (
        Atom(p, (*[Const(0)] * bits, Const("a"))),
        Atom(p, (*[Const(1)] * (bits - 1), Const(0), Const("b"))),
    )
    program = Program(rules=tuple(rules), outputs=frozenset({OUT}), facts=seeds)
    return program, FactStore()


def gen_exp_counter(bits: int) -> tuple[Program, FactStore]:
    """The counter read backwards from ``out(y) :- p(1,..,1,y)`` with inputs from ``e``.

    Only 0/1 constants occur, and the theory states that no value equals both.
    """
    if bits < 1:
        raise ValueError("the counter needs at least one bit")
    p = Predicate("p", bits + 1)
    e = Predicate("e", bits + 1)
    xs = [Var(f"X{k}") for k in range(1, bits + 1)]
    y = Var("Y")
    rules = [Rule(Atom(p, (*xs, y)), (Atom(e, (*xs, y)),))]
    rules += _step_rules(p, xs, y)
    rules.append(Rule(Atom(OUT, (y,)), (Atom(p, (*[Const(1)] * bits, y)),)))
    x = Var("X")
    theory = (TheoryRule(Atom(FALSE, ()), (_eq(x, 0), _eq(x, 1))),)
    return Program(rules=tuple(rules), outputs=frozenset({OUT}), theory=theory), FactStore()


def counter_fact_oracle(bits: int) -> int:
    """p-facts of the counter by direct simulation of binary increment."""
    seen = set()
    for start, tag in ((0, "a"), ((1 << bits) - 2, "b")):
        v = start
        while v < (1 << bits):
            seen.add((v, tag))
            v += 1
    return len(seen)


def gen_bounded_reach(bound: int = 5, start="a", edges=()) -> tuple[Program, FactStore]:
    if bound < 0:
        raise ValueError("bound must be non-negative")
    r = Predicate("r", 3)
    x, y, z, n, m = (Var(s) for s in "XYZNM")
    rules = (
        Rule(Atom(r, (x, y, n)), (Atom(E, (x, y)),), (), _eq(n, 0)),
        Rule(Atom(r, (x, z, m)), (Atom(r, (x, y, n)), Atom(E, (y, z))), (),
             Atom(builtin("succ"), (m, n))),
        Rule(Atom(OUT, (y,)), (Atom(r, (x, y, n)),), (),
             And((_eq(x, start), Atom(builtin("leq", bound), (n,))))),
    )
    return Program(rules=rules, outputs=frozenset({OUT})), FactStore((E, tuple(row)) for row in edges)


def reach_oracle(edges, start, bound: int) -> set:
    """Nodes at the end of some walk of length 1..bound+1 from ``start`` (breadth first)."""
    succ: dict = {}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
    frontier, out = {start}, set()
    for _ in range(bound + 1):
        frontier = {b for a in frontier for b in succ.get(a, ())}
        out |= frontier
    return out


def gen_transitive_closure(start="a", edges=(), pred: Predicate = Predicate("p", 2)) -> tuple[Program, FactStore]:
    tc = Predicate("tc", 2)
    x, y, z = Var("X"), Var("Y"), Var("Z")
    rules = (
        Rule(Atom(tc, (x, y)), (Atom(pred, (x, y)),)),
        Rule(Atom(tc, (x, z)), (Atom(tc, (x, y)), Atom(pred, (y, z)))),
        Rule(Atom(OUT, (y,)), (Atom(tc, (x, y)),), (), _eq(x, start)),
    )
    return Program(rules=rules, outputs=frozenset({OUT})), FactStore((pred, tuple(row)) for row in edges)


def gen_permutation(k: int, constants=None) -> Program:
    """Swap rules for every pair of the first k positions; the output pins each position to a constant."""
    if k < 2:
        raise ValueError("need at least two positions")
    constants = constants or [f"a{i}" for i in range(1, k + 1)]
    r = Predicate("r", k + 1)
    p = Predicate("p", k + 1)
    xs = [Var(f"X{i}") for i in range(1, k + 1)]
    y = Var("Y")
    rules = [Rule(Atom(r, (*xs, y)), (Atom(p, (*xs, y)),))]
    for i, j in itertools.combinations(range(k), 2):
        sw = list(xs)
        sw[i], sw[j] = sw[j], sw[i]
        rules.append(Rule(Atom(r, (*sw, y)), (Atom(r, (*xs, y)),)))
    guard = conjoin(*(_eq(x, c) for x, c in zip(xs, constants)))
    rules.append(Rule(Atom(OUT, (y,)), (Atom(r, (*xs, y)),), (), guard))
    return Program(rules=tuple(rules), outputs=frozenset({OUT}))


def random_graph(nodes: int, edges: int, seed: int = 0, names: bool = True) -> list[tuple]:
    """Distinct random directed edges over ``nodes`` vertices; node 0 is called ``a``."""
    rng = random.Random(seed)
    label = (lambda i: "a" if i == 0 else f"n{i}") if names else (lambda i: i)
    edges = min(edges, nodes * nodes)
    out = set()
    while len(out) < edges:
        out.add((label(rng.randrange(nodes)), label(rng.randrange(nodes))))
    return sorted(out, key=str)


def cycle_graph(n: int, start="a") -> list[tuple]:
    names = [start] + [f"n{i}" for i in range(1, n)]
    return [(names[i], names[(i + 1) % n]) for i in range(n)]


# ---------------------------------------------------------------------------
# random programs for property tests


SYMBOLS = ("a", "b", "c")
NUMBERS = (0, 1, 2)


def random_program(rng: random.Random, max_rules: int = 5, max_idb: int = 3, max_arity: int = 3,
                   negation: bool = False, edb_count: int = 2) -> Program:
    """A small safe normalized program over the builtins eq_const, leq, succ and eq.

    Every head variable occurs in a positive body atom, or is produced by succ
    from such a variable and then capped by leq, so evaluation stays finite.
    With ``negation`` set, negated IDB atoms may appear (any dependency shape).
    """
    n_idb = rng.randint(1, max_idb)
    idb = [Predicate(f"q{i}", rng.randint(1, max_arity)) for i in range(n_idb)]
    edb = [Predicate(f"d{i}", rng.randint(1, max_arity)) for i in range(edb_count)]
    n_rules = rng.randint(n_idb, max(n_idb, max_rules))
    heads = list(idb) + [rng.choice(idb) for _ in range(n_rules - n_idb)]
    rng.shuffle(heads)
    rules = []
    for head_pred in heads:
        counter = itertools.count()

        def fresh():
            return Var(f"V{next(counter)}")

        positive, filt, body_vars = [], [], []
        for _ in range(rng.randint(1, 2)):
            pred = rng.choice(edb + idb)
            args = tuple(fresh() for _ in range(pred.arity))
            positive.append(Atom(pred, args))
            body_vars.extend(args)
        if rng.random() < 0.3 and len(body_vars) >= 2:
            a, b = rng.sample(body_vars, 2)
            filt.append(Atom(builtin("eq"), (a, b)))
        for v in body_vars:
            roll = rng.random()
            if roll < 0.2:
                filt.append(_eq(v, rng.choice(SYMBOLS + NUMBERS)))
            elif roll < 0.3:
                filt.append(Atom(builtin("leq", rng.choice(NUMBERS)), (v,)))
        head_args = []
        for _ in range(head_pred.arity):
            roll = rng.random()
            if roll < 0.15:
                v = fresh()
                filt.append(_eq(v, rng.choice(SYMBOLS + NUMBERS)))
                head_args.append(v)
            elif roll < 0.3:
                v, src = fresh(), rng.choice(body_vars)
                filt.append(Atom(builtin("succ"), (v, src)))
                filt.append(Atom(builtin("leq", rng.choice(NUMBERS)), (v,)))
                head_args.append(v)
            else:
                head_args.append(rng.choice(body_vars))
        negative = []
        if negation and rng.random() < 0.5:
            pred = rng.choice(idb)
            negative.append(Atom(pred, tuple(rng.choice(body_vars) for _ in range(pred.arity))))
        if filt and rng.random() < 0.15:
            # an occasional disjunction over a body variable
            v = rng.choice(body_vars)
            filt.append(Or((_eq(v, rng.choice(SYMBOLS)), _eq(v, rng.choice(NUMBERS)))))
        rules.append(Rule(Atom(head_pred, tuple(head_args)), tuple(positive), tuple(negative),
                          conjoin(*filt) if filt else TOP))
    heads_used = sorted({r.head.pred for r in rules}, key=Predicate.sort_key)
    outputs = frozenset(rng.sample(heads_used, rng.randint(1, len(heads_used))))
    return normalize(Program(rules=tuple(rules), outputs=outputs))


def random_store(rng: random.Random, program: Program, max_facts: int = 50) -> FactStore:
    """Random facts for the EDB predicates of ``program``."""
    idb = {r.head.pred for r in program.rules}
    edb = sorted({a.pred for r in program.rules for a in (*r.positive, *r.negative)} - idb,
                 key=Predicate.sort_key)
    store = FactStore()
    if not edb:
        return store
    domain = SYMBOLS + NUMBERS
    for _ in range(rng.randint(0, max_facts)):
        pred = rng.choice(edb)
        store.add(pred, tuple(rng.choice(domain) for _ in range(pred.arity)))
    return store

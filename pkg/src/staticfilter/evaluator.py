"""Reference evaluator: semi-naive fixpoint with on-demand builtins, grounding,
reducts and stable models by enumeration."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .program import (
    BOTTOM,
    TOP,
    And,
    Arith,
    Atom,
    Const,
    Formula,
    Marker,
    Predicate,
    Program,
    Var,
    binds,
    conjuncts,
    formula_vars,
    idb_predicates,
)

Fact = tuple  # (Predicate, tuple of values)


class EvaluationError(Exception):
    pass


class EvaluationCapExceeded(EvaluationError):
    """Raised when the round or fact cap is hit (the fixpoint may be infinite)."""


class UnsafeRule(EvaluationError):
    pass


class NotStratifiable(EvaluationError):
    pass


class DomainBoundExceeded(EvaluationError):
    pass


class AtomCapExceeded(EvaluationError):
    pass


# ---------------------------------------------------------------------------
# builtins


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def builtin_holds(pred: Predicate, values: tuple) -> bool:
    name = pred.name
    if name == "eq_const":
        return values[0] == pred.param and type(values[0]) is type(pred.param)
    if name == "eq":
        return values[0] == values[1] and type(values[0]) is type(values[1])
    if name == "leq":
        v, c = values[0], pred.param
        if _is_int(v) and _is_int(c):
            return v <= c
        return isinstance(v, str) and isinstance(c, str) and v <= c
    if name == "succ":
        z, x = values
        return _is_int(z) and _is_int(x) and z == x + 1
    if name == "add":
        z, x = values
        return _is_int(z) and _is_int(x) and z == x + pred.param
    if name == "plus":
        z, x, y = values
        return _is_int(z) and _is_int(x) and _is_int(y) and z == x + y
    raise ValueError(f"unknown builtin {pred}")


def builtin_solve(pred: Predicate, values: list) -> list[tuple] | None:
    """Complete a partially known argument list (None = unknown); None if not evaluable."""
    name = pred.name
    missing = [i for i, v in enumerate(values) if v is None]
    if not missing:
        return [tuple(values)] if builtin_holds(pred, tuple(values)) else []
    if name == "eq_const":
        return [(pred.param,)]
    if len(missing) > 1:
        return None
    i = missing[0]
    vals = list(values)
    if name == "eq":
        vals[i] = vals[1 - i]
        return [tuple(vals)]
    if name in ("succ", "add"):
        d = 1 if name == "succ" else pred.param
        other = vals[1 - i]
        if not _is_int(other):
            return []
        vals[i] = other + d if i == 0 else other - d
        return [tuple(vals)]
    if name == "plus":
        if not all(_is_int(v) for j, v in enumerate(vals) if j != i):
            return []
        z, x, y = vals
        vals[i] = x + y if i == 0 else (z - y if i == 1 else z - x)
        return [tuple(vals)]
    return None


# ---------------------------------------------------------------------------
# relations and fact store


class Relation:
    """Set of tuples with lazily built hash indexes on argument positions."""

    __slots__ = ("rows", "indexes")

    def __init__(self, rows: Iterable[tuple] = ()):
        self.rows: set[tuple] = set(rows)
        self.indexes: dict[tuple, dict] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, row) -> bool:
        return row in self.rows

    def add(self, row: tuple) -> bool:
        if row in self.rows:
            return False
        self.rows.add(row)
        for positions, index in self.indexes.items():
            index.setdefault(tuple(row[i] for i in positions), []).append(row)
        return True

    def lookup(self, positions: tuple, key: tuple):
        if not positions:
            return self.rows
        index = self.indexes.get(positions)
        if index is None:
            index = {}
            for row in self.rows:
                index.setdefault(tuple(row[i] for i in positions), []).append(row)
            self.indexes[positions] = index
        return index.get(key, ())


class FactStore:
    """Explicit facts plus the builtin filter relations, evaluated on demand."""

    def __init__(self, facts: Iterable[Fact] = ()):
        self.relations: dict[Predicate, set[tuple]] = defaultdict(set)
        for pred, row in facts:
            self.add(pred, row)

    def add(self, pred: Predicate, row: tuple) -> None:
        if pred.is_builtin:
            raise ValueError(f"explicit facts for builtin {pred}")
        if len(row) != pred.arity:
            raise ValueError(f"arity mismatch for {pred}: {row}")
        self.relations[pred].add(tuple(row))

    def add_rows(self, pred: Predicate, rows: Iterable[tuple]) -> None:
        for row in rows:
            self.add(pred, row)

    def rows(self, pred: Predicate) -> set[tuple]:
        return self.relations.get(pred, set())

    def holds(self, pred: Predicate, values: tuple) -> bool:
        if pred.is_builtin:
            return builtin_holds(pred, values)
        return tuple(values) in self.relations.get(pred, ())

    def facts(self) -> frozenset:
        return frozenset((p, r) for p, rows in self.relations.items() for r in rows)

    def __len__(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def copy(self) -> "FactStore":
        return FactStore(self.facts())

    def merged(self, other: "FactStore") -> "FactStore":
        return FactStore(self.facts() | other.facts())

    @classmethod
    def from_program(cls, program: Program, base_dir: str | Path | None = None) -> "FactStore":
        """Inline facts plus the CSV files bound with @facts (paths relative to ``base_dir``)."""
        from .parser import load_facts

        store = cls()
        for a in program.facts:
            store.add(a.pred, tuple(t.value for t in a.args))
        for pred, path in program.fact_files:
            p = Path(path)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            store.add_rows(pred, load_facts(p, pred).rows)
        return store


def eval_formula(f: Formula, env: dict, store: FactStore) -> bool:
    if f is TOP:
        return True
    if f is BOTTOM:
        return False
    if isinstance(f, Atom):
        return store.holds(f.pred, tuple(_value(t, env) for t in f.args))
    if isinstance(f, And):
        return all(eval_formula(i, env, store) for i in f.items)
    return any(eval_formula(i, env, store) for i in f.items)


def _value(t, env):
    if isinstance(t, Const):
        return t.value
    return env[t]


def filter_holds(theta: Formula, row: tuple, store: FactStore) -> bool:
    """Does the argument tuple ``row`` satisfy the marker formula ``theta``?"""
    env = {Marker(i + 1): v for i, v in enumerate(row)}
    return eval_formula(theta, env, store)


# ---------------------------------------------------------------------------
# rule plans


@dataclass
class _Step:
    kind: str  # scan | gen | check | neg
    atom: Atom | None = None
    formula: Formula | None = None
    index: int = -1  # body position for scans
    bound_pos: tuple = ()
    out_pos: tuple = ()


def _plan(rule, first: int | None, finite_filter, scan_filter_pred) -> list[_Step]:
    """Greedy join order: cheap filter checks first, then binding filters, then the most bound atom."""
    bound: set = set()
    steps: list[_Step] = []
    todo_pos = list(range(len(rule.positive)))
    todo_f = list(conjuncts(rule.filter))

    def scan(i: int, atom: Atom):
        bpos = tuple(j for j, t in enumerate(atom.args) if isinstance(t, Const) or t in bound)
        steps.append(_Step("scan", atom, None, i, bpos))
        bound.update(atom.variables())

    if first is not None:
        todo_pos.remove(first)
        scan(first, rule.positive[first])
    while True:
        progress = True
        while progress:
            progress = False
            for c in list(todo_f):
                if formula_vars(c) <= bound:
                    steps.append(_Step("check", None, c))
                    todo_f.remove(c)
                    progress = True
            for c in list(todo_f):
                if not isinstance(c, Atom):
                    continue
                if c.pred.is_builtin and binds(c, bound):
                    steps.append(_Step("gen", c))
                    bound.update(c.variables())
                    todo_f.remove(c)
                    progress = True
                    break
        if not todo_pos:
            finite = [c for c in todo_f if isinstance(c, Atom) and scan_filter_pred(c.pred)]
            if finite:
                todo_f.remove(finite[0])
                scan(-1, finite[0])
                continue
            break
        best = max(todo_pos, key=lambda i: (sum(1 for t in rule.positive[i].args
                                                if isinstance(t, Const) or t in bound), -i))
        todo_pos.remove(best)
        scan(best, rule.positive[best])
    if todo_f:
        missing = sorted(str(v) for c in todo_f for v in formula_vars(c) - bound)
        raise UnsafeRule(f"unsafe builtin use in rule {rule}: unbound {', '.join(missing)}")
    for a in rule.negative:
        if not set(a.variables()) <= bound:
            raise UnsafeRule(f"unsafe negation in rule {rule}")
        steps.append(_Step("neg", a))
    head_vars = set(rule.head.variables())
    if not head_vars <= bound:
        raise UnsafeRule(f"unsafe head variables in rule {rule}")
    return steps


def _match_row(atom: Atom, row: tuple, env: dict) -> dict | None:
    new = None
    for t, v in zip(atom.args, row):
        if isinstance(t, Const):
            if t.value != v or type(t.value) is not type(v):
                return None
            continue
        cur = env.get(t, _MISSING) if new is None else new.get(t, _MISSING)
        if cur is _MISSING:
            if new is None:
                new = dict(env)
            new[t] = v
        elif cur != v or type(cur) is not type(v):
            return None
    return env if new is None else new


_MISSING = object()


# ---------------------------------------------------------------------------
# fixpoint


@dataclass
class EvalResult:
    relations: dict  # Predicate -> Relation (derived and given)
    firings: list  # per rule
    rounds: int = 0
    idb: frozenset = frozenset()

    def rows(self, pred: Predicate) -> set[tuple]:
        rel = self.relations.get(pred)
        return set(rel.rows) if rel is not None else set()

    def facts(self, preds: Iterable[Predicate] | None = None) -> frozenset:
        keys = self.relations.keys() if preds is None else preds
        return frozenset((p, r) for p in keys if p in self.relations for r in self.relations[p].rows)

    def model(self) -> frozenset:
        return self.facts()

    @property
    def total_firings(self) -> int:
        return sum(self.firings)

    def count(self, pred: Predicate) -> int:
        rel = self.relations.get(pred)
        return len(rel) if rel is not None else 0


class _Evaluator:
    def __init__(self, program: Program, store: FactStore, max_rounds: int, max_facts: int,
                 numeric_bound: int | None, ignore_negation: bool):
        if any(isinstance(t, Arith) for r in program.rules for a in (r.head, *r.positive, *r.negative)
               for t in a.args):
            from .normalize import normalize

            program = normalize(program)
        self.program = program
        self.store = store
        self.max_rounds = max_rounds
        self.max_facts = max_facts
        self.numeric_bound = numeric_bound
        self.ignore_negation = ignore_negation
        self.rel: dict[Predicate, Relation] = defaultdict(Relation)
        for pred, rows in store.relations.items():
            self.rel[pred] = Relation(rows)
        self.firings = [0] * len(program.rules)
        self.total = sum(len(r) for r in self.rel.values())
        self.finite_filter = lambda p: p in program.filters and not p.is_builtin
        self.rounds = 0

    def _check_value(self, v):
        if self.numeric_bound is not None and _is_int(v) and abs(v) > self.numeric_bound:
            raise DomainBoundExceeded(f"value {v} exceeds the numeric bound {self.numeric_bound}")

    def matches(self, rule, steps, sources, delta, old_skip):
        """Enumerate environments satisfying ``steps``.

        ``sources`` maps a body position to "full", "delta" or "old"; scans of
        "old" skip rows present in the corresponding delta relation.
        """
        rel = self.rel
        store = self.store

        def run(k, env):
            if k == len(steps):
                yield env
                return
            st = steps[k]
            if st.kind == "scan":
                atom = st.atom
                src = sources.get(st.index, "full")
                relation = delta[atom.pred] if src == "delta" else rel[atom.pred] if atom.pred in rel else None
                if relation is None:
                    return
                key = tuple(_value(atom.args[j], env) for j in st.bound_pos)
                skip = old_skip.get(atom.pred) if src == "old" else None
                for row in relation.lookup(st.bound_pos, key):
                    if skip is not None and row in skip:
                        continue
                    e = _match_row(atom, row, env)
                    if e is not None:
                        yield from run(k + 1, e)
            elif st.kind == "check":
                if eval_formula(st.formula, env, store):
                    yield from run(k + 1, env)
            elif st.kind == "gen":
                atom = st.atom
                vals = [(_value(t, env) if (isinstance(t, Const) or t in env) else None) for t in atom.args]
                sols = builtin_solve(atom.pred, vals)
                if sols is None:
                    raise UnsafeRule(f"cannot evaluate {atom}")
                for sol in sols:
                    e = env
                    for t, v in zip(atom.args, sol):
                        if isinstance(t, Var) and t not in e:
                            self._check_value(v)
                            if e is env:
                                e = dict(env)
                            e[t] = v
                    if builtin_holds(atom.pred, tuple(_value(t, e) for t in atom.args)):
                        yield from run(k + 1, e)
            elif st.kind == "neg":
                if self.ignore_negation:
                    yield from run(k + 1, env)
                    return
                row = tuple(_value(t, env) for t in st.atom.args)
                relation = rel.get(st.atom.pred)
                if relation is None or row not in relation:
                    yield from run(k + 1, env)

        yield from run(0, {})

    def head_row(self, rule, env) -> tuple:
        return tuple(_value(t, env) for t in rule.head.args)

    def evaluate_stratum(self, preds: set[Predicate], rule_ids: list[int], naive: bool = False):
        program = self.program
        plans = {}
        scan_filter = self.finite_filter

        def plan(i, first):
            key = (i, first)
            if key not in plans:
                plans[key] = _plan(program.rules[i], first, self.finite_filter, scan_filter)
            return plans[key]

        new_facts: dict[Predicate, Relation] = defaultdict(Relation)

        def fire(i, env):
            self.firings[i] += 1
            r = program.rules[i]
            row = self.head_row(r, env)
            if row not in self.rel[r.head.pred] and new_facts[r.head.pred].add(row):
                pass

        # round 0: everything against the current facts
        for i in rule_ids:
            for env in self.matches(program.rules[i], plan(i, None), {}, {}, {}):
                fire(i, env)
        while True:
            delta = {p: r for p, r in new_facts.items() if len(r)}
            if not delta:
                return
            self.rounds += 1
            if self.rounds > self.max_rounds:
                raise EvaluationCapExceeded(f"non-terminating under cap: more than {self.max_rounds} rounds")
            for p, r in delta.items():
                for row in r.rows:
                    self.rel[p].add(row)
                self.total += len(r)
            if self.total > self.max_facts:
                raise EvaluationCapExceeded(f"non-terminating under cap: more than {self.max_facts} facts")
            new_facts = defaultdict(Relation)
            for i in rule_ids:
                rule = program.rules[i]
                if naive:
                    for env in self.matches(rule, plan(i, None), {}, {}, {}):
                        fire(i, env)
                    continue
                rec = [j for j, a in enumerate(rule.positive) if a.pred in preds]
                for n, j in enumerate(rec):
                    if rule.positive[j].pred not in delta:
                        continue
                    sources = {j: "delta"}
                    for earlier in rec[:n]:
                        sources[earlier] = "old"
                    for env in self.matches(rule, plan(i, j), sources, delta, delta):
                        fire(i, env)

    def run(self, layers: list[set[Predicate]], naive: bool = False):
        by_head = defaultdict(list)
        for i, r in enumerate(self.program.rules):
            by_head[r.head.pred].append(i)
        for layer in layers:
            rule_ids = sorted(i for p in layer for i in by_head[p])
            self.evaluate_stratum(layer, rule_ids, naive)
        return EvalResult(dict(self.rel), self.firings, self.rounds, frozenset(idb_predicates(self.program)))


DEFAULT_MAX_ROUNDS = 10_000
DEFAULT_MAX_FACTS = 5_000_000


def _layers(program: Program) -> list[set[Predicate]]:
    from .engine import strata

    return strata(program)


def evaluate(program: Program, store: FactStore | None = None, max_rounds: int = DEFAULT_MAX_ROUNDS,
             max_facts: int = DEFAULT_MAX_FACTS, naive: bool = False,
             numeric_bound: int | None = None) -> EvalResult:
    """Least model of a negation-free program over ``store`` (inline program facts included)."""
    if any(r.negative for r in program.rules):
        raise EvaluationError("evaluate needs a negation-free program; use stratified_evaluate")
    store = _with_program_facts(program, store)
    ev = _Evaluator(program, store, max_rounds, max_facts, numeric_bound, False)
    if naive:
        return ev.run([set(idb_predicates(program))], naive=True)
    return ev.run(_layers(program))


def stratified_evaluate(program: Program, store: FactStore | None = None, max_rounds: int = DEFAULT_MAX_ROUNDS,
                        max_facts: int = DEFAULT_MAX_FACTS) -> EvalResult:
    from .engine import build_dependency_graph, stratifiable_predicates

    if stratifiable_predicates(build_dependency_graph(program)) != idb_predicates(program):
        raise NotStratifiable("program is not stratifiable")
    store = _with_program_facts(program, store)
    ev = _Evaluator(program, store, max_rounds, max_facts, None, False)
    return ev.run(_layers(program))


def _with_program_facts(program: Program, store: FactStore | None) -> FactStore:
    if not program.facts and store is not None:
        return store
    out = FactStore() if store is None else store.copy()
    for a in program.facts:
        out.add(a.pred, tuple(t.value for t in a.args))
    return out


# ---------------------------------------------------------------------------
# grounding and stable models


@dataclass(frozen=True)
class GroundRule:
    head: Fact
    positive: tuple = ()
    negative: tuple = ()

    def __str__(self) -> str:
        body = [_fact_str(f) for f in self.positive] + ["~" + _fact_str(f) for f in self.negative]
        return f"{_fact_str(self.head)} :- {', '.join(body)}." if body else f"{_fact_str(self.head)}."


def _fact_str(f: Fact) -> str:
    from .program import format_value

    pred, row = f
    if not row:
        return pred.label
    return f"{pred.label}({', '.join(format_value(v) for v in row)})"


@dataclass(frozen=True)
class GroundProgram:
    rules: tuple
    facts: frozenset = frozenset()

    def atoms(self) -> set:
        return {r.head for r in self.rules}


def ground(program: Program, store: FactStore | None = None, bound: int = 64,
           max_facts: int = DEFAULT_MAX_FACTS) -> GroundProgram:
    """Instances of every rule over the positive relaxation's model; filters evaluated away."""
    store = _with_program_facts(program, store)
    relaxed = _Evaluator(program, store, DEFAULT_MAX_ROUNDS, max_facts, bound, True)
    relaxed.run(_layers(program))
    out = []
    for i, rule in enumerate(relaxed.program.rules):
        steps = [s for s in _plan(rule, None, relaxed.finite_filter, relaxed.finite_filter) if s.kind != "neg"]
        seen = set()
        for env in relaxed.matches(rule, steps, {}, {}, {}):
            g = GroundRule(
                (rule.head.pred, tuple(_value(t, env) for t in rule.head.args)),
                tuple((a.pred, tuple(_value(t, env) for t in a.args)) for a in rule.positive),
                tuple((a.pred, tuple(_value(t, env) for t in a.args)) for a in rule.negative),
            )
            if g not in seen:
                seen.add(g)
                out.append(g)
    return GroundProgram(tuple(out), store.facts())


def reduct(gp: GroundProgram, candidate) -> GroundProgram:
    candidate = set(candidate)
    rules = tuple(GroundRule(r.head, r.positive, ()) for r in gp.rules
                  if not any(n in candidate for n in r.negative))
    return GroundProgram(rules, gp.facts)


def least_model(rules: Iterable[GroundRule], facts: Iterable[Fact] = ()) -> frozenset:
    """Least model of a definite ground program (negative literals must be absent)."""
    rules = list(rules)
    model = set(facts)
    waiting = defaultdict(list)
    missing = []
    queue = list(model)
    for k, r in enumerate(rules):
        need = {a for a in r.positive if a not in model}
        missing.append(len(need))
        for a in need:
            waiting[a].append(k)
        if not need and r.head not in model:
            model.add(r.head)
            queue.append(r.head)
    while queue:
        a = queue.pop()
        for k in waiting.pop(a, ()):
            missing[k] -= 1
            if missing[k] == 0 and rules[k].head not in model:
                model.add(rules[k].head)
                queue.append(rules[k].head)
    return frozenset(model)


def _check_cap(gp: GroundProgram, atom_cap: int) -> list:
    atoms = sorted(gp.atoms() - gp.facts, key=_fact_key)
    if len(atoms) > atom_cap:
        raise AtomCapExceeded(f"{len(atoms)} derivable ground atoms exceed the cap of {atom_cap}")
    return atoms


def _fact_key(f: Fact):
    from .program import value_key

    pred, row = f
    return (pred.sort_key(), tuple(value_key(v) for v in row))


def stable_models_of(gp: GroundProgram, atom_cap: int = 20) -> list[frozenset]:
    """Guess the negated atoms, then check the guess against the reduct's least model."""
    _check_cap(gp, atom_cap)
    negated = sorted({n for r in gp.rules for n in r.negative}, key=_fact_key)
    out = set()
    for bits in itertools.product((False, True), repeat=len(negated)):
        guess = {a for a, b in zip(negated, bits) if b}
        m = least_model(reduct(gp, guess | gp.facts).rules, gp.facts)
        if {a for a in negated if a in m} == guess:
            out.add(m)
    return sorted(out, key=lambda m: sorted(map(_fact_key, m)))


def stable_models_bruteforce(gp: GroundProgram, atom_cap: int = 20) -> list[frozenset]:
    """Check every subset of derivable atoms; the slow, literal definition."""
    atoms = _check_cap(gp, atom_cap)
    out = []
    for bits in itertools.product((False, True), repeat=len(atoms)):
        cand = frozenset(gp.facts | {a for a, b in zip(atoms, bits) if b})
        if least_model(reduct(gp, cand).rules, gp.facts) == cand:
            out.append(cand)
    return sorted(out, key=lambda m: sorted(map(_fact_key, m)))


def stable_models(program: Program, store: FactStore | None = None, atom_cap: int = 20,
                  bound: int = 64) -> list[frozenset]:
    return stable_models_of(ground(program, store, bound), atom_cap)


def restrict(model: Iterable[Fact], preds: Iterable[Predicate]) -> frozenset:
    preds = set(preds)
    return frozenset(f for f in model if f[0] in preds)


def mu(model: Iterable[Fact], thetas: dict, store: FactStore | None = None) -> frozenset:
    """Keep the facts of filtered predicates that satisfy their filter; everything else stays."""
    store = store or FactStore()
    return frozenset(f for f in model if f[0] not in thetas or filter_holds(thetas[f[0]], f[1], store))

"""Filter formulas over positional markers, Horn theories and entailment.

Formulas are the positive boolean trees of ``program`` (``Atom``, ``And``,
``Or``, ``TOP``, ``BOTTOM``).  Inside filter formulas atom arguments are
``Marker`` terms; rule-level expressions use ``Var`` terms.  The Horn
machinery does not care which: every argument is treated as a distinct
constant, so entailment between variable formulas is the same computation as
between their marker images.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .program import (
    BOTTOM,
    FALSE,
    TOP,
    And,
    Atom,
    Const,
    Formula,
    Marker,
    Or,
    Predicate,
    Program,
    TheoryRule,
    Var,
    builtin,
    formula_atoms,
    map_atoms,
)

DEFAULT_DNF_CAP = 4096


class FormulaTooLarge(Exception):
    """DNF expansion exceeded the configured cap."""


# ---------------------------------------------------------------------------
# structure


def formula_key(f: Formula) -> tuple:
    if isinstance(f, Atom):
        return (0, f.sort_key())
    if isinstance(f, And):
        return (1, tuple(formula_key(i) for i in f.items))
    if isinstance(f, Or):
        return (2, tuple(formula_key(i) for i in f.items))
    return (-1, (f is TOP,))


def simplify(f: Formula) -> Formula:
    """Unit/zero laws, flattening, dedup and canonical child order."""
    if isinstance(f, Atom) or f is TOP or f is BOTTOM:
        return f
    is_and = isinstance(f, And)
    unit, zero = (TOP, BOTTOM) if is_and else (BOTTOM, TOP)
    kind = And if is_and else Or
    items = {}
    for child in f.items:
        c = simplify(child)
        if c is zero:
            return zero
        if c is unit:
            continue
        parts = c.items if isinstance(c, kind) else (c,)
        for p in parts:
            items.setdefault(p, None)
    if not items:
        return unit
    if len(items) == 1:
        return next(iter(items))
    return kind(tuple(sorted(items, key=formula_key)))


def apply_iota(atom: Atom, formula: Formula) -> Formula:
    """Replace marker i by the i-th argument of ``atom``."""
    k = len(atom.args)

    def sub(a: Atom) -> Atom:
        args = []
        for t in a.args:
            if isinstance(t, Marker):
                if not 1 <= t.index <= k:
                    raise ValueError(f"marker {t} out of range for {atom.pred}")
                args.append(atom.args[t.index - 1])
            else:
                args.append(t)
        return Atom(a.pred, tuple(args))

    return map_atoms(formula, sub)


def dnf(f: Formula, cap: int | None = DEFAULT_DNF_CAP) -> list[frozenset]:
    """Disjunctive normal form as a list of atom sets; [] is BOTTOM, [set()] is TOP."""
    if f is TOP:
        return [frozenset()]
    if f is BOTTOM:
        return []
    if isinstance(f, Atom):
        return [frozenset((f,))]
    if isinstance(f, Or):
        out: dict[frozenset, None] = {}
        for item in f.items:
            for d in dnf(item, cap):
                out.setdefault(d, None)
            if cap is not None and len(out) > cap:
                raise FormulaTooLarge(f"more than {cap} disjuncts")
        return list(out)
    acc = [frozenset()]
    for item in f.items:
        part = dnf(item, cap)
        if cap is not None and len(acc) * len(part) > cap:
            # dedup may still bring it under the cap
            merged = {a | b: None for a in acc for b in part}
            if len(merged) > cap:
                raise FormulaTooLarge(f"more than {cap} disjuncts")
            acc = list(merged)
        else:
            acc = list({a | b: None for a in acc for b in part})
        if not acc:
            return []
    return acc


def from_dnf(disjuncts: Iterable[Iterable[Atom]]) -> Formula:
    items = []
    for d in disjuncts:
        d = list(d)
        if not d:
            return TOP
        items.append(And(tuple(d)) if len(d) > 1 else d[0])
    if not items:
        return BOTTOM
    return simplify(Or(tuple(items)))


def common_atoms(f: Formula) -> frozenset:
    """Atoms propositionally implied by ``f`` without expanding it."""
    if isinstance(f, Atom):
        return frozenset((f,))
    if isinstance(f, And):
        return frozenset().union(*(common_atoms(i) for i in f.items))
    if isinstance(f, Or):
        sets = [common_atoms(i) for i in f.items]
        return frozenset.intersection(*sets) if sets else frozenset()
    return frozenset()


# ---------------------------------------------------------------------------
# Horn theories


class HornTheory:
    """Horn rules over filter predicates; a head ``false`` marks inconsistency."""

    def __init__(self, rules: Iterable[TheoryRule] = ()):
        self.rules = tuple(dict.fromkeys(rules))
        self.by_body: dict[Predicate, list[tuple[TheoryRule, int]]] = defaultdict(list)
        for r in self.rules:
            for i, a in enumerate(r.body):
                self.by_body[a.pred].append((r, i))

    @property
    def is_linear(self) -> bool:
        return all(len(r.body) == 1 for r in self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __eq__(self, other) -> bool:
        return isinstance(other, HornTheory) and set(self.rules) == set(other.rules)

    def __hash__(self) -> int:
        return hash(frozenset(self.rules))

    def union(self, other: "HornTheory | Iterable[TheoryRule]") -> "HornTheory":
        return HornTheory((*self.rules, *other))

    def closure(self, atoms: Iterable[Atom]) -> frozenset | None:
        """Forward-chaining closure; None when ``false`` is derived."""
        known: set[Atom] = set()
        by_pred: dict[Predicate, set[Atom]] = defaultdict(set)
        todo = list(atoms)
        while todo:
            a = todo.pop()
            if a in known:
                continue
            known.add(a)
            by_pred[a.pred].add(a)
            for rule, i in self.by_body.get(a.pred, ()):
                env = _match(rule.body[i], a, {})
                if env is None:
                    continue
                rest = rule.body[:i] + rule.body[i + 1:]
                for full in _join(rest, env, by_pred):
                    if rule.head.pred == FALSE:
                        return None
                    head = Atom(rule.head.pred, tuple(full.get(t, t) for t in rule.head.args))
                    if head not in known:
                        todo.append(head)
        return frozenset(known)


def _match(pattern: Atom, fact: Atom, env: dict) -> dict | None:
    if pattern.pred != fact.pred:
        return None
    out = dict(env)
    for p, v in zip(pattern.args, fact.args):
        if isinstance(p, Var):
            bound = out.get(p)
            if bound is None:
                out[p] = v
            elif bound != v:
                return None
        elif p != v:
            return None
    return out


def _join(atoms, env, by_pred):
    if not atoms:
        yield env
        return
    first, rest = atoms[0], atoms[1:]
    for fact in list(by_pred.get(first.pred, ())):
        e = _match(first, fact, env)
        if e is not None:
            yield from _join(rest, e, by_pred)


EMPTY_THEORY = HornTheory()


def instantiate_order_theory(constants: Iterable[int]) -> HornTheory:
    """Linear-order axioms over naturals: x<=c from x=c, step-down via addition, and weakening."""
    ns = sorted({c for c in constants if isinstance(c, int) and not isinstance(c, bool) and c >= 0})
    x, y = Var("X"), Var("Y")
    rules = []
    for c in ns:
        rules.append(TheoryRule(Atom(builtin("leq", c), (x,)), (Atom(builtin("eq_const", c), (x,)),)))
    for c in ns:
        for d in ns:
            rules.append(TheoryRule(Atom(builtin("leq", c), (x,)),
                                    (Atom(builtin("leq", c), (y,)), add_atom(d, y, x))))
    for c in ns:
        for d in ns:
            if c > d:
                rules.append(TheoryRule(Atom(builtin("leq", c), (x,)), (Atom(builtin("leq", d), (x,)),)))
    return HornTheory(rules)


def add_atom(d: int, z, x) -> Atom:
    """``z = x + d`` in canonical form (succ for d=1)."""
    if d == 1:
        return Atom(builtin("succ"), (z, x))
    return Atom(builtin("add", d), (z, x))


def numeric_constants(program: Program) -> set[int]:
    """Integer constants of leq/eq_const/succ/add filters in rules and theory."""
    out = set()
    atoms = [a for r in program.rules for a in formula_atoms(r.filter)]
    atoms += [a for t in program.theory for a in (t.head, *t.body)]
    for a in atoms:
        p = a.pred
        if not p.is_builtin:
            continue
        if p.name == "succ":
            out.add(1)
        elif p.name in ("leq", "eq_const", "add") and isinstance(p.param, int):
            out.add(p.param)
    return out


def program_theory(program: Program) -> HornTheory:
    return HornTheory(program.theory)


def auto_theory(program: Program) -> HornTheory:
    return program_theory(program).union(instantiate_order_theory(numeric_constants(program)))


# ---------------------------------------------------------------------------
# regimes and entailment


@dataclass(frozen=True)
class Regime:
    """Entailment regime: a Horn theory (empty for propositional) and a DNF cap."""

    theory: HornTheory = field(default_factory=HornTheory)
    dnf_cap: int | None = DEFAULT_DNF_CAP
    name: str = "horn"

    @classmethod
    def prop(cls, dnf_cap: int | None = DEFAULT_DNF_CAP) -> "Regime":
        return cls(EMPTY_THEORY, dnf_cap, "prop")

    @classmethod
    def horn(cls, theory: HornTheory, dnf_cap: int | None = DEFAULT_DNF_CAP) -> "Regime":
        return cls(theory, dnf_cap, "horn")

    @classmethod
    def auto(cls, program: Program, dnf_cap: int | None = DEFAULT_DNF_CAP) -> "Regime":
        return cls(auto_theory(program), dnf_cap, "horn")

    def closure(self, atoms) -> frozenset | None:
        return self.theory.closure(atoms)


def entails_prop(f: Formula, g: Formula, cap: int | None = DEFAULT_DNF_CAP) -> bool:
    """Propositional entailment, atoms as independent variables."""
    fd = dnf(f, cap)
    gd = dnf(g, cap)
    return all(any(d2 <= d1 for d2 in gd) for d1 in fd)


def entails_conjunctive(theory: HornTheory, atoms: Iterable[Atom], g: Atom) -> bool:
    closed = theory.closure(atoms)
    return closed is None or g in closed


def necessarily_false(theory: HornTheory, target: Atom, domain: Iterable) -> set[Atom]:
    """Backward closure for a linear theory: atoms that are false whenever ``target`` is.

    Assuming ``target`` false, a single-body rule H <- B forces B false whenever
    H is forced false, and ``false <- B`` forces B false outright.
    """
    if not theory.is_linear:
        raise ValueError("linear mode needs a theory whose rules have one body atom")
    domain = list(dict.fromkeys(domain))
    out = {target}
    todo = [target]
    for rule in theory:
        if rule.head.pred == FALSE:
            for b in _instances(rule.body[0], {}, domain):
                if b not in out:
                    out.add(b)
                    todo.append(b)
    while todo:
        a = todo.pop()
        for rule in theory:
            if rule.head.pred == FALSE:
                continue
            env = _match(rule.head, a, {})
            if env is None:
                continue
            for b in _instances(rule.body[0], env, domain):
                if b not in out:
                    out.add(b)
                    todo.append(b)
    return out


def _instances(pattern: Atom, env: dict, domain: list):
    free = [v for v in dict.fromkeys(pattern.variables()) if v not in env]
    for combo in itertools.product(domain, repeat=len(free)):
        e = dict(env)
        e.update(zip(free, combo))
        yield Atom(pattern.pred, tuple(e.get(t, t) for t in pattern.args))


def _fold(f: Formula, false_atoms: set) -> bool:
    if f is TOP:
        return True
    if f is BOTTOM:
        return False
    if isinstance(f, Atom):
        return f not in false_atoms
    if isinstance(f, And):
        return all(_fold(i, false_atoms) for i in f.items)
    return any(_fold(i, false_atoms) for i in f.items)


def entails_linear(theory: HornTheory, f: Formula, g: Atom) -> bool:
    """Linear-theory check: f entails g iff f folds to false once g is assumed false."""
    domain = [t for a in (*formula_atoms(f), g) for t in a.args]
    return not _fold(f, necessarily_false(theory, g, domain))


def entails_approx(theory: HornTheory, f: Formula, g: Formula, cap: int | None = DEFAULT_DNF_CAP,
                   method: str = "auto") -> bool:
    """Horn-approximate entailment.

    ``method``: "conjunctive" (f a conjunction, g an atom), "linear" (g an
    atom, linear theory), "general", or "auto" picking the cheapest applicable.
    """
    if g is TOP or f is BOTTOM:
        return True
    if method == "auto":
        if isinstance(g, Atom) and _is_conjunction(f):
            method = "conjunctive"
        elif isinstance(g, Atom) and theory.is_linear:
            method = "linear"
        else:
            method = "general"
    if method == "conjunctive":
        if not (isinstance(g, Atom) and _is_conjunction(f)):
            raise ValueError("conjunctive mode needs a conjunction and an atom")
        return entails_conjunctive(theory, formula_atoms(f) if f is not TOP else (), g)
    if method == "linear":
        if not isinstance(g, Atom):
            raise ValueError("linear mode needs an atomic consequent")
        return entails_linear(theory, f, g)
    if method != "general":
        raise ValueError(f"unknown method {method!r}")
    gd = dnf(g, cap)
    for d in dnf(f, cap):
        closed = theory.closure(d)
        if closed is None:
            continue
        if not any(d2 <= closed for d2 in gd):
            return False
    return True


def _is_conjunction(f: Formula) -> bool:
    if f is TOP or isinstance(f, Atom):
        return True
    return isinstance(f, And) and all(isinstance(i, Atom) for i in f.items)


def entails(regime: Regime, f: Formula, g: Formula) -> bool:
    return entails_approx(regime.theory, f, g, regime.dnf_cap, method="general")


def equivalent(regime: Regime, f: Formula, g: Formula) -> bool:
    return entails(regime, f, g) and entails(regime, g, f)


# ---------------------------------------------------------------------------
# canonical representation


def minimal_sets(sets: Iterable[frozenset]) -> list[frozenset]:
    """Drop every set that is a superset of another one."""
    uniq = sorted(set(sets), key=len)
    kept: list[frozenset] = []
    for s in uniq:
        if not any(k <= s for k in kept):
            kept.append(s)
    return kept


@dataclass(frozen=True)
class Canonical:
    formula: Formula
    exact: bool = True


def canonical(f: Formula, regime: Regime) -> Canonical:
    """DNF with closed disjuncts, subsumed ones removed, canonically ordered.

    Above the DNF cap the result is the closure of the atoms common to every
    disjunct, which is entailed by ``f`` but may be weaker.
    """
    try:
        disjuncts = dnf(f, regime.dnf_cap)
    except FormulaTooLarge:
        closed = regime.closure(common_atoms(f))
        if closed is None:
            return Canonical(BOTTOM, False)
        return Canonical(from_dnf([closed]), False)
    closed = []
    for d in disjuncts:
        c = regime.closure(d)
        if c is not None:
            closed.append(c)
    return Canonical(from_dnf(minimal_sets(closed)), True)


def repr_formula(f: Formula, regime: Regime) -> Formula:
    return canonical(f, regime).formula


def conjunction(atoms: Iterable[Atom] | None) -> Formula:
    """Atom set to formula; None is BOTTOM and the empty set is TOP."""
    if atoms is None:
        return BOTTOM
    return from_dnf([atoms])


def atom_set(f: Formula) -> frozenset | None:
    """Inverse of ``conjunction`` for conjunctive formulas."""
    if f is BOTTOM:
        return None
    if f is TOP:
        return frozenset()
    if not _is_conjunction(f):
        raise ValueError("not a conjunction")
    return frozenset(formula_atoms(f))


def project(regime: Regime, g: Formula, target: Atom, dnf_g=None) -> list[frozenset]:
    """Per consistent disjunct of ``g``, the entailed atoms over ``target``'s arguments as markers."""
    positions = {}
    for i, t in enumerate(target.args, start=1):
        positions.setdefault(t, i)
    out = []
    for d in (dnf(g, regime.dnf_cap) if dnf_g is None else dnf_g):
        closed = regime.closure(d)
        if closed is None:
            continue
        proj = set()
        for a in closed:
            if all(t in positions for t in a.args):
                proj.add(Atom(a.pred, tuple(Marker(positions[t]) for t in a.args)))
        out.append(frozenset(proj))
    return out


def marker_universe(k: int) -> list[Marker]:
    return [Marker(i) for i in range(1, k + 1)]


def constant_terms(f: Formula) -> set:
    return {t for a in formula_atoms(f) for t in a.args if isinstance(t, Const)}

"""Immutable terms, atoms, filter expressions, rules and programs."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace as _replace
from typing import Iterable, Iterator, Union

Value = Union[int, str]


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: Value

    def __str__(self) -> str:
        return format_value(self.value)


@dataclass(frozen=True)
class Marker:
    """Positional marker: refers to argument position ``index`` (1-based)."""

    index: int

    def __str__(self) -> str:
        return f"#{self.index}"


@dataclass(frozen=True)
class Arith:
    """``left + right``; only appears before normalization."""

    left: "Term"
    right: "Term"

    def __str__(self) -> str:
        return f"{self.left} + {self.right}"


Term = Union[Var, Const, Marker, Arith]


def value_key(v: Value) -> tuple:
    return (0, v, "") if isinstance(v, int) else (1, 0, v)


def term_key(t: Term) -> tuple:
    if isinstance(t, Marker):
        return (0, t.index, "")
    if isinstance(t, Var):
        return (1, 0, t.name)
    if isinstance(t, Const):
        return (2,) + value_key(t.value)
    return (3, 0, str(t))


_BARE_IDENT = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


def format_value(v: Value) -> str:
    if isinstance(v, int):
        return str(v)
    if _BARE_IDENT.match(v) and v not in RESERVED_WORDS:
        return v
    escaped = v.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


RESERVED_WORDS = frozenset({"not", "false", "true"})


# built-in filter predicates: name -> (arity, takes a parameter)
BUILTINS = {
    "eq_const": (1, True),
    "leq": (1, True),
    "add": (2, True),
    "eq": (2, False),
    "succ": (2, False),
    "plus": (3, False),
}


@dataclass(frozen=True)
class Predicate:
    """Predicate symbol; ``param`` carries the constant of patterns like ``leq[5]``."""

    name: str
    arity: int
    param: Value | None = None

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError("negative arity")

    @property
    def is_builtin(self) -> bool:
        spec = BUILTINS.get(self.name)
        return spec is not None and spec[0] == self.arity and spec[1] == (self.param is not None)

    @property
    def label(self) -> str:
        if self.param is None:
            return self.name
        return f"{self.name}[{format_value(self.param)}]"

    def __str__(self) -> str:
        return f"{self.label}/{self.arity}"

    def sort_key(self) -> tuple:
        p = () if self.param is None else value_key(self.param)
        return (self.name, self.arity, p)


FALSE = Predicate("false", 0)


def builtin(name: str, param: Value | None = None) -> Predicate:
    return Predicate(name, BUILTINS[name][0], param)


@dataclass(frozen=True)
class Atom:
    pred: Predicate
    args: tuple[Term, ...]

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    def variables(self) -> Iterator[Var]:
        for t in self.args:
            yield from term_vars(t)

    def sort_key(self) -> tuple:
        return (self.pred.sort_key(), tuple(term_key(t) for t in self.args))

    def substitute(self, mapping) -> "Atom":
        return Atom(self.pred, tuple(mapping.get(t, t) for t in self.args))

    def __str__(self) -> str:
        return format_atom(self)


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Arith):
        yield from term_vars(t.left)
        yield from term_vars(t.right)


def format_atom(a: Atom) -> str:
    p, args = a.pred, [str(t) for t in a.args]
    if p.is_builtin:
        if p.name == "eq_const":
            return f"{args[0]} = {format_value(p.param)}"
        if p.name == "leq":
            return f"{args[0]} <= {format_value(p.param)}"
        if p.name == "eq":
            return f"{args[0]} = {args[1]}"
        if p.name == "succ":
            return f"{args[0]} = {args[1]} + 1"
        if p.name == "add":
            return f"{args[0]} = {args[1]} + {format_value(p.param)}"
        if p.name == "plus":
            return f"{args[0]} = {args[1]} + {args[2]}"
    if not args:
        return p.label
    return f"{p.label}({', '.join(args)})"


# ---------------------------------------------------------------------------
# positive boolean formulas over atoms (filters and generalised filter bodies)


class _Const:
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value

    def __repr__(self) -> str:
        return "TOP" if self.value else "BOTTOM"

    def __str__(self) -> str:
        return "true" if self.value else "false"

    def __reduce__(self):
        return "TOP" if self.value else "BOTTOM"


TOP = _Const(True)
BOTTOM = _Const(False)


@dataclass(frozen=True)
class And:
    items: tuple

    def __post_init__(self):
        if not isinstance(self.items, tuple):
            object.__setattr__(self, "items", tuple(self.items))

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Or:
    items: tuple

    def __post_init__(self):
        if not isinstance(self.items, tuple):
            object.__setattr__(self, "items", tuple(self.items))

    def __str__(self) -> str:
        return format_formula(self)


Formula = Union[Atom, And, Or, _Const]


def formula_atoms(f: Formula) -> Iterator[Atom]:
    """Atom leaves, left to right."""
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, (And, Or)):
        for item in f.items:
            yield from formula_atoms(item)


def formula_vars(f: Formula) -> set[Var]:
    return {v for a in formula_atoms(f) for v in a.variables()}


def map_atoms(f: Formula, fn) -> Formula:
    if isinstance(f, Atom):
        return fn(f)
    if isinstance(f, And):
        return And(tuple(map_atoms(i, fn) for i in f.items))
    if isinstance(f, Or):
        return Or(tuple(map_atoms(i, fn) for i in f.items))
    return f


def conjuncts(f: Formula) -> tuple:
    """Top-level conjuncts of a filter expression (empty for TOP)."""
    if f is TOP:
        return ()
    if isinstance(f, And):
        out = []
        for item in f.items:
            out.extend(conjuncts(item))
        return tuple(out)
    return (f,)


def conjoin(*parts: Formula) -> Formula:
    """Conjunction that keeps the given structure, only dropping TOP."""
    items = []
    for p in parts:
        if p is TOP:
            continue
        if isinstance(p, And):
            items.extend(p.items)
        else:
            items.append(p)
    if not items:
        return TOP
    if len(items) == 1:
        return items[0]
    return And(tuple(items))


def format_formula(f: Formula, nested: bool = False) -> str:
    if isinstance(f, _Const):
        return str(f)
    if isinstance(f, Atom):
        return format_atom(f)
    if isinstance(f, And):
        text = " & ".join(format_formula(i, True) for i in f.items)
        return f"({text})" if nested else text
    text = " | ".join(format_formula(i, True) for i in f.items)
    return f"({text})" if nested else text


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    head: Atom
    positive: tuple[Atom, ...] = ()
    negative: tuple[Atom, ...] = ()
    filter: Formula = TOP

    def __post_init__(self):
        for name in ("positive", "negative"):
            val = getattr(self, name)
            if not isinstance(val, tuple):
                object.__setattr__(self, name, tuple(val))

    def variables(self) -> list[Var]:
        """Variables in order of first occurrence (head, body, negation, filter)."""
        seen: dict[Var, None] = {}
        for a in (self.head, *self.positive, *self.negative, *formula_atoms(self.filter)):
            for v in a.variables():
                seen.setdefault(v, None)
        return list(seen)

    def __str__(self) -> str:
        body = [format_atom(a) for a in self.positive]
        body += ["~" + format_atom(a) for a in self.negative]
        body += [format_formula(c, True) for c in conjuncts(self.filter)]
        if not body:
            return f"{format_atom(self.head)}."
        return f"{format_atom(self.head)} :- {', '.join(body)}."


@dataclass(frozen=True)
class TheoryRule:
    """Horn rule over filter predicates; head may be ``false``."""

    head: Atom
    body: tuple[Atom, ...]

    def __post_init__(self):
        if not isinstance(self.body, tuple):
            object.__setattr__(self, "body", tuple(self.body))

    def __str__(self) -> str:
        return f"{format_atom(self.head)} :- {', '.join(format_atom(a) for a in self.body)}."


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...] = ()
    outputs: frozenset = frozenset()
    filters: frozenset = frozenset()
    theory: tuple[TheoryRule, ...] = ()
    facts: tuple[Atom, ...] = ()
    fact_files: tuple[tuple[Predicate, str], ...] = ()

    def __post_init__(self):
        for name in ("rules", "theory", "facts", "fact_files"):
            val = getattr(self, name)
            if not isinstance(val, tuple):
                object.__setattr__(self, name, tuple(val))
        for name in ("outputs", "filters"):
            val = getattr(self, name)
            if not isinstance(val, frozenset):
                object.__setattr__(self, name, frozenset(val))

    def replace(self, **changes) -> "Program":
        return _replace(self, **changes)

    def is_filter(self, pred: Predicate) -> bool:
        return pred.is_builtin or pred in self.filters

    def predicates(self) -> set[Predicate]:
        preds = set()
        for r in self.rules:
            preds.add(r.head.pred)
            preds.update(a.pred for a in r.positive + r.negative)
            preds.update(a.pred for a in formula_atoms(r.filter))
        preds.update(a.pred for a in self.facts)
        preds.update(p for p, _ in self.fact_files)
        return preds

    def filter_predicates(self) -> set[Predicate]:
        """Declared filters plus every builtin occurring in rules or theory."""
        preds = set(self.filters)
        for r in self.rules:
            preds.update(a.pred for a in formula_atoms(r.filter))
        for t in self.theory:
            preds.update(a.pred for a in (t.head, *t.body) if a.pred != FALSE)
        return preds

    def seeded_predicates(self) -> set[Predicate]:
        """IDB predicates that also receive facts directly (inline or from files)."""
        idb = idb_predicates(self)
        given = {a.pred for a in self.facts} | {p for p, _ in self.fact_files}
        return idb & given


def idb_predicates(program: Program) -> set[Predicate]:
    return {r.head.pred for r in program.rules}


@dataclass(frozen=True)
class Violation:
    rule: int | None
    message: str

    def __str__(self) -> str:
        where = "program" if self.rule is None else f"rule {self.rule}"
        return f"{where}: {self.message}"


def bindable_variables(positive: Iterable[Atom], filt: Formula, is_finite_filter=lambda p: False) -> set[Var]:
    """Variables bound by positive atoms and binding filter conjuncts (fixpoint)."""
    bound = {v for a in positive for v in a.variables()}
    pending = [c for c in conjuncts(filt) if isinstance(c, Atom)]
    changed = True
    while changed:
        changed = False
        for c in pending:
            new = binds(c, bound, is_finite_filter)
            if new - bound:
                bound |= new
                changed = True
    return bound


def binds(a: Atom, bound: set, is_finite_filter=lambda p: False) -> set:
    """Variables that evaluating filter atom ``a`` can bind given ``bound``."""
    args = a.args
    p = a.pred
    vs = [t for t in args if isinstance(t, Var)]
    if p.is_builtin:
        name = p.name
        if name == "eq_const":
            return set(vs)
        if name in ("eq", "succ", "add"):
            if any(t in bound or isinstance(t, Const) for t in args):
                return set(vs)
            return set()
        if name == "plus":
            known = sum(1 for t in args if t in bound or isinstance(t, Const))
            return set(vs) if known >= 2 else set()
        return set()
    if is_finite_filter(p):
        return set(vs)
    return set()


def validate(program: Program) -> list[Violation]:
    """Every violated structural invariant, with rule index; empty list means ok."""
    out: list[Violation] = []
    finite = lambda p: p in program.filters and not p.is_builtin

    def check_atom(i, a: Atom):
        if len(a.args) != a.pred.arity:
            out.append(Violation(i, f"arity mismatch in {a.pred.label}: expected {a.pred.arity}, got {len(a.args)}"))
        if a.pred.name in BUILTINS and not a.pred.is_builtin:
            out.append(Violation(i, f"malformed builtin {a.pred}"))

    for i, r in enumerate(program.rules):
        for a in (r.head, *r.positive, *r.negative, *formula_atoms(r.filter)):
            check_atom(i, a)
        if program.is_filter(r.head.pred) or r.head.pred == FALSE:
            out.append(Violation(i, f"filter in head: {r.head.pred}"))
        for a in r.positive:
            if program.is_filter(a.pred):
                out.append(Violation(i, f"filter atom {a.pred} outside the filter expression"))
        for a in r.negative:
            if program.is_filter(a.pred):
                out.append(Violation(i, f"negated filter atom {a.pred}"))
        for a in formula_atoms(r.filter):
            if not program.is_filter(a.pred):
                out.append(Violation(i, f"non-filter atom {a.pred} inside filter expression"))
        bound = bindable_variables(r.positive, r.filter, finite)
        for v in r.variables():
            if v not in bound:
                out.append(Violation(i, f"unsafe variable {v}"))
    for p in sorted(program.outputs, key=Predicate.sort_key):
        if p not in program.predicates():
            out.append(Violation(None, f"output predicate {p} does not occur in the program"))
    for a in program.facts:
        check_atom(None, a)
        if any(not isinstance(t, Const) for t in a.args):
            out.append(Violation(None, f"non-ground fact {format_atom(a)}"))
        if a.pred.is_builtin:
            out.append(Violation(None, f"fact for builtin {a.pred}"))
    for j, t in enumerate(program.theory):
        for a in (t.head, *t.body):
            if a.pred != FALSE:
                check_atom(None, a)
                if not program.is_filter(a.pred):
                    out.append(Violation(None, f"theory rule {j}: {a.pred} is not a filter predicate"))
        if not t.body:
            out.append(Violation(None, f"theory rule {j}: empty body"))
        body_vars = {v for a in t.body for v in a.variables()}
        for v in t.head.variables():
            if v not in body_vars:
                out.append(Violation(None, f"theory rule {j}: unsafe variable {v}"))
    return out

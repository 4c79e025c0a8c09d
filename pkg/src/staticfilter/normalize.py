"""Normal form: atom arguments are pairwise distinct variables, no constants,
arithmetic flattened into filter atoms."""

from __future__ import annotations

from collections import Counter

from .program import (
    Arith,
    Atom,
    Const,
    Program,
    Rule,
    TOP,
    Var,
    builtin,
    conjoin,
    conjuncts,
    formula_atoms,
    map_atoms,
)
from .filters import add_atom


class _Fresh:
    def __init__(self, used: set[str]):
        self.used = used
        self.k = 0

    def __call__(self) -> Var:
        while True:
            self.k += 1
            name = f"_v{self.k}"
            if name not in self.used:
                self.used.add(name)
                return Var(name)


def _rule_var_names(rule: Rule) -> set[str]:
    return {v.name for a in (rule.head, *rule.positive, *rule.negative, *formula_atoms(rule.filter))
            for v in a.variables()}


def _flatten(t, fresh: _Fresh, added: list) -> Var | Const:
    """Replace an arithmetic term by a fresh variable defined by filter atoms."""
    if not isinstance(t, Arith):
        return t
    left = _flatten(t.left, fresh, added)
    right = _flatten(t.right, fresh, added)
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(left.value + right.value)
    z = fresh()
    if isinstance(right, Const) and isinstance(right.value, int) and right.value >= 0:
        added.append(add_atom(right.value, z, _as_var(left, fresh, added)))
    elif isinstance(left, Const) and isinstance(left.value, int) and left.value >= 0:
        added.append(add_atom(left.value, z, _as_var(right, fresh, added)))
    else:
        added.append(Atom(builtin("plus"), (z, _as_var(left, fresh, added), _as_var(right, fresh, added))))
    return z


def _as_var(t, fresh: _Fresh, added: list) -> Var:
    if isinstance(t, Const):
        v = fresh()
        added.append(Atom(builtin("eq_const", t.value), (v,)))
        return v
    return t


def _normal_atom(a: Atom, fresh: _Fresh, added: list) -> Atom:
    seen = set()
    args = []
    for t in a.args:
        t = _flatten(t, fresh, added)
        if isinstance(t, Const):
            v = fresh()
            added.append(Atom(builtin("eq_const", t.value), (v,)))
            t = v
        elif t in seen:
            v = fresh()
            added.append(Atom(builtin("eq"), (t, v)))
            t = v
        seen.add(t)
        args.append(t)
    return Atom(a.pred, tuple(args))


def _normal_filter_atom(a: Atom, fresh: _Fresh, added: list) -> Atom:
    args = []
    for t in a.args:
        t = _flatten(t, fresh, added)
        args.append(_as_var(t, fresh, added))
    return Atom(a.pred, tuple(args))


def normalize_rule(rule: Rule) -> Rule:
    fresh = _Fresh(_rule_var_names(rule))
    added: list[Atom] = []
    positive = tuple(_normal_atom(a, fresh, added) for a in rule.positive)
    negative = tuple(_normal_atom(a, fresh, added) for a in rule.negative)
    head = _normal_atom(rule.head, fresh, added)
    filt = map_atoms(rule.filter, lambda a: _normal_filter_atom(a, fresh, added))
    return Rule(head, positive, negative, conjoin(filt, *added))


def normalize(program: Program) -> Program:
    return program.replace(rules=tuple(normalize_rule(r) for r in program.rules))


def is_normal(program: Program) -> bool:
    for r in program.rules:
        for a in (r.head, *r.positive, *r.negative):
            if any(not isinstance(t, Var) for t in a.args) or len(set(a.args)) != len(a.args):
                return False
        for a in formula_atoms(r.filter):
            if any(not isinstance(t, Var) for t in a.args):
                return False
    return True


# ---------------------------------------------------------------------------


def _occurrences(rule: Rule) -> Counter:
    c = Counter()
    for a in (rule.head, *rule.positive, *rule.negative):
        c.update(t for t in a.args if isinstance(t, Var))
    return c


def _filter_uses(items, skip: int) -> Counter:
    c = Counter()
    for j, item in enumerate(items):
        if j != skip:
            c.update(v for a in formula_atoms(item) for v in a.variables())
    return c


def _replace_in_atoms(rule: Rule, var: Var, term, body_only: bool = False) -> Rule:
    sub = lambda a: Atom(a.pred, tuple(term if t == var else t for t in a.args))
    head = rule.head if body_only else sub(rule.head)
    return Rule(head, tuple(map(sub, rule.positive)), tuple(map(sub, rule.negative)), rule.filter)


def denormalize_rule(rule: Rule, fresh_only: bool = False) -> Rule:
    """Fold eq_const/eq conjuncts whose variable has a single binding site."""
    changed = True
    while changed:
        changed = False
        items = list(conjuncts(rule.filter))
        occ = _occurrences(rule)
        for j, item in enumerate(items):
            if not isinstance(item, Atom) or not item.pred.is_builtin:
                continue
            name = item.pred.name
            others = _filter_uses(items, j)
            if name == "eq_const":
                (v,) = item.args
                if not isinstance(v, Var) or (fresh_only and not v.name.startswith("_v")):
                    continue
                if occ[v] == 1 and others[v] == 0:
                    rule = _replace_in_atoms(rule, v, Const(item.pred.param))
                    changed = True
            elif name == "eq":
                for keep, drop in (item.args, item.args[::-1]):
                    if not isinstance(drop, Var) or keep == drop:
                        continue
                    if fresh_only and not drop.name.startswith("_v"):
                        continue
                    in_head = drop in set(rule.head.args)
                    if occ[drop] == 1 and not in_head and others[drop] == 0:
                        rule = _replace_in_atoms(rule, drop, keep, body_only=True)
                        changed = True
                        break
            if changed:
                rest = items[:j] + items[j + 1:]
                rule = Rule(rule.head, rule.positive, rule.negative, conjoin(*rest) if rest else TOP)
                break
    return rule


def denormalize(program: Program, fresh_only: bool = False) -> Program:
    return program.replace(rules=tuple(denormalize_rule(r, fresh_only) for r in program.rules))

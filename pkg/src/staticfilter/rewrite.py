"""Admissible rewriting: replace each rule's filter by a simpler equivalent one."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .engine import FilterAssignment, compute_filters
from .filters import FormulaTooLarge, Regime, apply_iota, dnf, entails, simplify
from .normalize import is_normal, normalize
from .program import (
    BOTTOM,
    TOP,
    And,
    Atom,
    Formula,
    Or,
    Program,
    Rule,
    bindable_variables,
    conjoin,
    idb_predicates,
)


@dataclass(frozen=True)
class AdmissibilityContext:
    rule: Rule
    f_plus: Formula
    f_minus: Formula


def admissibility_context(program: Program, rule: Rule, assignment: FilterAssignment) -> AdmissibilityContext:
    """F+ is the head filter joined with the rule's own filter; F- joins the filters of positive IDB body atoms.

    Predicates that also receive facts directly are left out of F-: their
    facts need not satisfy the computed filter, so it cannot be assumed.
    """
    idb = idb_predicates(program)
    seeded = program.seeded_predicates()
    theta_h = assignment[rule.head.pred]
    f_plus = conjoin(apply_iota(rule.head, theta_h), rule.filter) if theta_h is not BOTTOM else BOTTOM
    minus = [apply_iota(a, assignment[a.pred]) for a in rule.positive if a.pred in idb and a.pred not in seeded]
    return AdmissibilityContext(rule, f_plus, conjoin(*minus))


def is_admissible(ctx: AdmissibilityContext, psi: Formula, regime: Regime) -> bool:
    return entails(regime, ctx.f_plus, psi) and entails(regime, conjoin(psi, ctx.f_minus), ctx.f_plus)


def _leaf_paths(f: Formula, prefix=()):
    """Atom positions, leftmost-outermost (pre-order, left to right)."""
    if isinstance(f, Atom):
        yield prefix
    elif isinstance(f, (And, Or)):
        for i, item in enumerate(f.items):
            yield from _leaf_paths(item, prefix + (i,))


def _replace(f: Formula, path, new: Formula) -> Formula:
    if not path:
        return new
    items = list(f.items)
    items[path[0]] = _replace(items[path[0]], path[1:], new)
    return type(f)(tuple(items))


def _inconsistent(f: Formula, regime: Regime) -> bool:
    try:
        return all(regime.closure(d) is None for d in dnf(f, regime.dnf_cap))
    except FormulaTooLarge:
        return False


def rule_is_evaluable(rule: Rule, finite_filter=lambda p: False) -> bool:
    bound = bindable_variables(rule.positive, rule.filter, finite_filter)
    return all(v in bound for v in rule.variables())


def compute_admissible_filter(ctx: AdmissibilityContext, regime: Regime, finite_filter=lambda p: False) -> Formula:
    """Greedy pass over F+: drop an occurrence whenever F- and the rest still entail the current formula.

    Drops that would leave a variable without a binding site are skipped.
    """
    if ctx.f_plus is BOTTOM or _inconsistent(ctx.f_plus, regime):
        return BOTTOM
    psi = ctx.f_plus
    rule = ctx.rule
    for path in list(_leaf_paths(psi)):
        cand = _replace(psi, path, TOP)
        try:
            ok = entails(regime, conjoin(ctx.f_minus, cand), psi)
        except FormulaTooLarge:
            continue
        if not ok:
            continue
        trial = Rule(rule.head, rule.positive, rule.negative, simplify(cand))
        if rule_is_evaluable(trial, finite_filter):
            psi = cand
    return simplify(psi)


@dataclass
class Rewriting:
    program: Program
    assignment: FilterAssignment
    regime: Regime
    dropped: list = field(default_factory=list)
    filter_seconds: float = 0.0
    rewrite_seconds: float = 0.0


def rewrite_program(program: Program, assignment: FilterAssignment, regime: Regime) -> tuple[Program, list[int]]:
    """Rewrite every rule; rules whose filter becomes BOTTOM are deleted (their indices are returned)."""
    finite = lambda p: p in program.filters and not p.is_builtin
    rules, dropped = [], []
    for i, rule in enumerate(program.rules):
        psi = compute_admissible_filter(admissibility_context(program, rule, assignment), regime, finite)
        if psi is BOTTOM:
            dropped.append(i)
            continue
        rules.append(Rule(rule.head, rule.positive, rule.negative, psi))
    return program.replace(rules=tuple(rules)), dropped


def static_filter(program: Program, mode: str = "casf", regime: Regime | None = None,
                  schedule: str = "sequential", iteration_cap: int | None = None) -> Rewriting:
    """Normalize, compute filters and rewrite in one go."""
    t0 = time.perf_counter()
    if not is_normal(program):
        program = normalize(program)
    regime = regime or Regime.auto(program)
    assignment = compute_filters(program, regime, mode, schedule, iteration_cap)
    t1 = time.perf_counter()
    rewritten, dropped = rewrite_program(program, assignment, regime)
    t2 = time.perf_counter()
    return Rewriting(rewritten, assignment, regime, dropped, t1 - t0, t2 - t0)

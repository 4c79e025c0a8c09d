"""Independent reference computations used to freeze expected values.

Nothing here imports the evaluator or the filter machinery; the only shared
code is the AST.
"""

from __future__ import annotations

import itertools

from staticfilter.program import And, Atom, Const, Marker, Or, TOP, BOTTOM, formula_vars


def counter_facts(bits: int) -> set:
    """Every p-tuple reached by repeated binary increment from both seeds."""
    facts = set()
    for start, tag in (((0,) * bits, "a"), ((1,) * (bits - 1) + (0,), "b")):
        v = list(start)
        while True:
            facts.add((*v, tag))
            # increment: find the last 0, set it, clear the tail
            k = max((i for i, b in enumerate(v) if b == 0), default=None)
            if k is None:
                break
            v = v[:k] + [1] + [0] * (bits - k - 1)
    return facts


def bfs_reach(edges, start, bound: int) -> set:
    """Nodes y with a walk start -> y of length n+1 for some 0 <= n <= bound."""
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    layer, seen = {start}, set()
    for _ in range(bound + 1):
        layer = {b for a in layer for b in adj.get(a, [])}
        seen |= layer
    return seen


# ---------------------------------------------------------------------------
# builtin semantics, written out again on purpose


def _num(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def builtin_true(name, param, vals) -> bool:
    if name == "eq_const":
        return vals[0] == param and type(vals[0]) is type(param)
    if name == "eq":
        return vals[0] == vals[1] and type(vals[0]) is type(vals[1])
    if name == "leq":
        return (_num(vals[0]) and _num(param) and vals[0] <= param) or (
            isinstance(vals[0], str) and isinstance(param, str) and vals[0] <= param)
    if name == "succ":
        return _num(vals[0]) and _num(vals[1]) and vals[0] == vals[1] + 1
    if name == "add":
        return _num(vals[0]) and _num(vals[1]) and vals[0] == vals[1] + param
    if name == "plus":
        return all(map(_num, vals)) and vals[0] == vals[1] + vals[2]
    raise KeyError(name)


def formula_true(f, env, facts=frozenset()) -> bool:
    if f is TOP:
        return True
    if f is BOTTOM:
        return False
    if isinstance(f, Atom):
        vals = tuple(t.value if isinstance(t, Const) else env[t] for t in f.args)
        if f.pred.is_builtin:
            return builtin_true(f.pred.name, f.pred.param, vals)
        return (f.pred, vals) in facts
    if isinstance(f, And):
        return all(formula_true(i, env, facts) for i in f.items)
    if isinstance(f, Or):
        return any(formula_true(i, env, facts) for i in f.items)
    raise TypeError(f)


def semantic_entails(f, g, domain) -> bool:
    """f |= g by checking every assignment of the free terms over ``domain``."""
    terms = sorted(formula_vars(f) | formula_vars(g) | _markers(f) | _markers(g), key=str)
    for combo in itertools.product(domain, repeat=len(terms)):
        env = dict(zip(terms, combo))
        if formula_true(f, env) and not formula_true(g, env):
            return False
    return True


def _markers(f) -> set:
    from staticfilter.program import formula_atoms

    return {t for a in formula_atoms(f) for t in a.args if isinstance(t, Marker)}


# ---------------------------------------------------------------------------
# a deliberately naive evaluator


def naive_model(program, facts, domain, max_rounds: int = 200) -> set:
    """Least model of a negation-free program by naive nested loops.

    Body atoms are matched against the current fact set; variables that only
    occur in filters are enumerated over ``domain``.
    """
    model = set(facts) | {(a.pred, tuple(t.value for t in a.args)) for a in program.facts}
    for _ in range(max_rounds):
        new = set()
        for rule in program.rules:
            for env in _matches(rule.positive, {}, model):
                free = [v for v in rule.variables() if v not in env]
                for combo in itertools.product(domain, repeat=len(free)):
                    full = {**env, **dict(zip(free, combo))}
                    if not formula_true(rule.filter, full):
                        continue
                    if any((a.pred, _ground(a, full)) in model for a in rule.negative):
                        continue
                    new.add((rule.head.pred, _ground(rule.head, full)))
        if new <= model:
            return model
        model |= new
    raise RuntimeError("naive evaluation did not converge")


def _ground(atom, env) -> tuple:
    return tuple(t.value if isinstance(t, Const) else env[t] for t in atom.args)


def _matches(atoms, env, model):
    if not atoms:
        yield env
        return
    first, rest = atoms[0], atoms[1:]
    for pred, row in model:
        if pred != first.pred:
            continue
        e = dict(env)
        ok = True
        for t, v in zip(first.args, row):
            if isinstance(t, Const):
                ok = t.value == v and type(t.value) is type(v)
            elif t in e:
                ok = e[t] == v and type(e[t]) is type(v)
            else:
                e[t] = v
            if not ok:
                break
        if ok:
            yield from _matches(rest, e, model)


def stable_by_definition(rules, facts, atoms) -> list[frozenset]:
    """Stable models of a ground program given as (head, pos, neg) triples, by subset search."""
    out = []
    atoms = sorted(atoms, key=str)
    for bits in itertools.product((0, 1), repeat=len(atoms)):
        cand = set(facts) | {a for a, b in zip(atoms, bits) if b}
        reduct = [(h, p) for h, p, n in rules if not (set(n) & cand)]
        m = set(facts)
        changed = True
        while changed:
            changed = False
            for h, p in reduct:
                if h not in m and set(p) <= m:
                    m.add(h)
                    changed = True
        if m == cand:
            out.append(frozenset(m))
    return out

"""Program text emitters: the tool's own grammar plus clingo and souffle styles."""

from __future__ import annotations

import re
from collections import defaultdict

from .filters import FormulaTooLarge, dnf
from .normalize import denormalize
from .program import (
    And,
    Arith,
    Atom,
    Const,
    Formula,
    Or,
    Predicate,
    Program,
    Rule,
    TOP,
    BOTTOM,
    Var,
    format_atom,
    format_value,
    formula_atoms,
)

DIALECTS = ("generic", "clingo", "souffle")


class EmitError(Exception):
    pass


def _sugar_ok(a: Atom) -> bool:
    return a.pred.is_builtin and all(isinstance(t, (Var, Arith)) for t in a.args)


def _explicit(a: Atom) -> str:
    label = a.pred.label
    if not a.args:
        return label
    return f"{label}({', '.join(str(t) for t in a.args)})"


def _generic_atom(a: Atom) -> str:
    return format_atom(a) if _sugar_ok(a) else _explicit(a)


def _formula_text(f: Formula, ctx: str, atom_text, and_sep=", ", or_sep=" ; ") -> str:
    if isinstance(f, Atom):
        return atom_text(f)
    if isinstance(f, And):
        text = and_sep.join(_formula_text(i, "conj", atom_text, and_sep, or_sep) for i in f.items)
        return f"({text})" if ctx == "conj" else text
    if isinstance(f, Or):
        text = or_sep.join(_formula_text(i, "disj", atom_text, and_sep, or_sep) for i in f.items)
        return f"({text})"
    raise EmitError(f"cannot emit {f!r} inside a rule body")


def _generic_body(rule: Rule) -> list[str]:
    parts = [_explicit(a) for a in rule.positive]
    parts += ["~" + _explicit(a) for a in rule.negative]
    if rule.filter is BOTTOM:
        raise EmitError("rule with an unsatisfiable filter")
    if rule.filter is not TOP:
        f = rule.filter
        items = f.items if isinstance(f, And) else (f,)
        parts += [_formula_text(i, "conj", _generic_atom) for i in items]
    return parts


def emit_generic(program: Program) -> str:
    lines = []
    for p in sorted(program.outputs, key=Predicate.sort_key):
        lines.append(f"@output {p}.")
    for p in sorted(program.filters, key=Predicate.sort_key):
        lines.append(f"@filter {p}.")
    for p, path in program.fact_files:
        lines.append(f"@facts {p} {format_value_quoted(path)}.")
    if program.theory:
        lines.append("@theory {")
        for t in program.theory:
            head = "false" if t.head.pred.name == "false" and not t.head.args else _explicit(t.head)
            lines.append(f"  {head} :- {', '.join(_explicit(a) for a in t.body)}.")
        lines.append("}")
    for a in program.facts:
        lines.append(f"{_explicit(a)}.")
    for r in program.rules:
        body = _generic_body(r)
        if body:
            lines.append(f"{_explicit(r.head)} :- {', '.join(body)}.")
        else:
            lines.append(f"{_explicit(r.head)}.")
    return "\n".join(lines) + ("\n" if lines else "")


def format_value_quoted(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# ---------------------------------------------------------------------------
# foreign dialects


_CLINGO_VAR = re.compile(r"_*[A-Z][A-Za-z0-9_']*\Z")


def _var_namer(rule: Rule, pattern):
    names = {}
    used = set()
    for v in rule.variables():
        n = v.name
        if not pattern.match(n):
            base = re.sub(r"[^A-Za-z0-9_]", "", n).lstrip("_") or "V"
            n = "V" + base[0].upper() + base[1:] if not base[0].isupper() else base
        while n in used:
            n += "_"
        used.add(n)
        names[v] = n
    return names


def _finite_filters(program: Program) -> set[Predicate]:
    given = {a.pred for a in program.facts} | {p for p, _ in program.fact_files}
    return {p for p in program.filters if not p.is_builtin and p in given}


def _check_expressible(program: Program, dialect: str) -> None:
    finite = _finite_filters(program)
    for r in program.rules:
        for a in formula_atoms(r.filter):
            if not a.pred.is_builtin and a.pred not in finite:
                raise EmitError(f"inexpressible filter predicate {a.pred} in dialect {dialect}")


def _term_text(t, names, quote_symbols: bool) -> str:
    if isinstance(t, Var):
        return names[t]
    if isinstance(t, Const):
        if quote_symbols and isinstance(t.value, str):
            return format_value_quoted(t.value)
        return format_value(t.value)
    if isinstance(t, Arith):
        return f"{_term_text(t.left, names, quote_symbols)} + {_term_text(t.right, names, quote_symbols)}"
    raise EmitError(f"unexpected term {t!r}")


def _foreign_atom(a: Atom, names, quote: bool) -> str:
    args = [_term_text(t, names, quote) for t in a.args]
    p = a.pred
    if p.is_builtin:
        par = None if p.param is None else _term_text(Const(p.param), names, quote)
        if p.name == "eq_const":
            return f"{args[0]} = {par}"
        if p.name == "leq":
            return f"{args[0]} <= {par}"
        if p.name == "eq":
            return f"{args[0]} = {args[1]}"
        if p.name == "succ":
            return f"{args[0]} = {args[1]} + 1"
        if p.name == "add":
            return f"{args[0]} = {args[1]} + {par}"
        if p.name == "plus":
            return f"{args[0]} = {args[1]} + {args[2]}"
    name = p.name if p.param is None else f"{p.name}_{re.sub(r'[^A-Za-z0-9_]', '_', str(p.param))}"
    return f"{name}({', '.join(args)})" if args else name


def emit_clingo(program: Program) -> str:
    _check_expressible(program, "clingo")
    program = denormalize(program, fresh_only=True)
    lines = []
    for a in program.facts:
        lines.append(_foreign_atom(a, {}, False) + ".")
    for p, path in program.fact_files:
        lines.append(f"% facts for {p} are read from {path}")
    for r in program.rules:
        names = _var_namer(r, _CLINGO_VAR)
        head = _foreign_atom(r.head, names, False)
        base = [_foreign_atom(a, names, False) for a in r.positive]
        base += ["not " + _foreign_atom(a, names, False) for a in r.negative]
        try:
            variants = dnf(r.filter)
        except FormulaTooLarge as exc:
            raise EmitError(f"filter too large to split for clingo: {exc}") from None
        for d in sorted(variants, key=lambda s: sorted(a.sort_key() for a in s)):
            body = base + [_foreign_atom(a, names, False) for a in _ordered(r.filter, d)]
            lines.append(f"{head} :- {', '.join(body)}." if body else f"{head}.")
    for p in sorted(program.outputs, key=Predicate.sort_key):
        lines.append(f"#show {p.label}/{p.arity}.")
    return "\n".join(lines) + "\n"


def _ordered(f: Formula, atoms) -> list[Atom]:
    order = {a: i for i, a in enumerate(dict.fromkeys(formula_atoms(f)))}
    return sorted(atoms, key=lambda a: order.get(a, 0))


def _souffle_types(program: Program) -> dict[Predicate, list[str]]:
    """Per argument position: 'number' if integers reach it, else 'symbol'."""
    numeric_vars: dict[int, set[Var]] = defaultdict(set)
    positions: dict[Predicate, list[bool]] = {}

    def preds():
        for r in program.rules:
            yield from (r.head, *r.positive, *r.negative)
        yield from program.facts

    for a in preds():
        positions.setdefault(a.pred, [False] * a.pred.arity)
    for p, _ in program.fact_files:
        positions.setdefault(p, [False] * p.arity)
    for p in program.filters:
        positions.setdefault(p, [False] * p.arity)
    for a in program.facts:
        for i, t in enumerate(a.args):
            if isinstance(t, Const) and isinstance(t.value, int):
                positions[a.pred][i] = True
    changed = True
    while changed:
        changed = False
        for k, r in enumerate(program.rules):
            num = numeric_vars[k]
            before = len(num)
            for a in formula_atoms(r.filter):
                p = a.pred
                if p.name in ("leq", "succ", "add", "plus"):
                    num.update(t for t in a.args if isinstance(t, Var))
                elif p.name == "eq_const" and isinstance(p.param, int):
                    num.update(t for t in a.args if isinstance(t, Var))
                elif p.name == "eq" and any(t in num for t in a.args):
                    num.update(t for t in a.args if isinstance(t, Var))
            for a in (r.head, *r.positive, *r.negative):
                for i, t in enumerate(a.args):
                    if isinstance(t, Const) and isinstance(t.value, int) and not positions[a.pred][i]:
                        positions[a.pred][i] = True
                        changed = True
                    if isinstance(t, Var) and positions[a.pred][i]:
                        num.add(t)
                    if isinstance(t, Var) and t in num and not positions[a.pred][i]:
                        positions[a.pred][i] = True
                        changed = True
            if len(num) != before:
                changed = True
    return {p: ["number" if b else "symbol" for b in bs] for p, bs in positions.items()}


def emit_souffle(program: Program) -> str:
    _check_expressible(program, "souffle")
    program = denormalize(program, fresh_only=True)
    types = _souffle_types(program)
    lines = []
    for p in sorted(types, key=Predicate.sort_key):
        name = _foreign_atom(Atom(p, ()), {}, True)
        decl = ", ".join(f"x{i + 1}:{t}" for i, t in enumerate(types[p]))
        lines.append(f".decl {name}({decl})")
    idb = {r.head.pred for r in program.rules}
    inline = {a.pred for a in program.facts}
    files = dict(program.fact_files)
    for p in sorted(types, key=Predicate.sort_key):
        if p in files:
            lines.append(f'.input {p.name}(IO=file, filename={format_value_quoted(files[p])}, delimiter=",")')
        elif p not in idb and p not in inline:
            lines.append(f".input {p.name}")
    for a in program.facts:
        lines.append(_foreign_atom(a, {}, True) + ".")
    for r in program.rules:
        names = _var_namer(r, re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z"))
        head = _foreign_atom(r.head, names, True)
        body = [_foreign_atom(a, names, True) for a in r.positive]
        body += ["!" + _foreign_atom(a, names, True) for a in r.negative]
        if r.filter is not TOP:
            items = r.filter.items if isinstance(r.filter, And) else (r.filter,)
            body += [_formula_text(i, "conj", lambda a: _foreign_atom(a, names, True), ", ", "; ") for i in items]
        if not body:
            lines.append(f"{head}.")
        else:
            lines.append(f"{head} :- {', '.join(body)}.")
    for p in sorted(program.outputs, key=Predicate.sort_key):
        lines.append(f".output {p.name}")
    return "\n".join(lines) + "\n"


def emit_program(program: Program, dialect: str = "generic") -> str:
    if dialect == "generic":
        return emit_generic(program)
    if dialect in ("clingo", "clingo-style"):
        return emit_clingo(program)
    if dialect in ("souffle", "souffle-style"):
        return emit_souffle(program)
    raise ValueError(f"unknown dialect {dialect!r}")

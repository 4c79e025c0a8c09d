"""Surface syntax for programs, theories and CSV fact files.

    @output out/1.
    @filter f/1.
    @facts e/2 "edges.csv".
    @theory { leq[5](X) :- eq_const[0](X). }
    p(0, a).
    r(X, Y, N) :- e(X, Y), N = 0.
    out(Y) :- r(X, Y, N), (X = a ; X = b), N <= 5, ~blocked(Y).

Comparisons ``X = a``, ``X = Y``, ``X <= 5``, ``Z = X + 1``, ``Z = X + 3`` and
``Z = X + Y`` become the builtin filter predicates ``eq_const[a]``, ``eq``,
``leq[5]``, ``succ``, ``add[3]`` and ``plus``.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from pathlib import Path

from .program import (
    FALSE,
    And,
    Arith,
    Atom,
    Const,
    Or,
    Predicate,
    Program,
    Rule,
    TOP,
    TheoryRule,
    Var,
    Violation,
    builtin,
    validate,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0, origin: str = "<stdin>"):
        self.message, self.line, self.col, self.origin = message, line, col, origin
        super().__init__(f"{origin}:{line}:{col}: {message}")


class ProgramError(Exception):
    def __init__(self, violations: list[Violation], origin: str = "<stdin>"):
        self.violations = violations
        lines = "\n".join(f"  {v}" for v in violations)
        super().__init__(f"{origin}: invalid program\n{lines}")


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*|//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<directive>@[a-z]+)
  | (?P<int>-?\d+)
  | (?P<var>\?[A-Za-z0-9_]+|[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<op>:-|<=|[=+(),;.\[\]{}/~])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, origin: str = "<stdin>") -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, origin)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


class _Parser:
    def __init__(self, text: str, origin: str):
        self.toks = tokenize(text, origin)
        self.i = 0
        self.origin = origin
        self.anon = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col, self.origin)

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def eat(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def optional(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    # grammar
    def constant(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return int(t.text)
        if t.kind == "string":
            self.i += 1
            return _unquote(t.text)
        if t.kind == "name":
            self.i += 1
            return t.text
        self.error("expected a constant")

    def simple_term(self):
        t = self.tok
        if t.kind == "var":
            self.i += 1
            if t.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            return Var(t.text)
        if t.kind in ("int", "string", "name"):
            return Const(self.constant())
        if self.at("("):
            self.i += 1
            term = self.term()
            self.eat(")")
            return term
        self.error("expected a term")

    def term(self):
        left = self.simple_term()
        while self.at("+"):
            self.i += 1
            left = Arith(left, self.simple_term())
        return left

    def pred_name(self):
        t = self.tok
        if t.kind != "name":
            self.error("expected a predicate name")
        self.i += 1
        param = None
        if self.optional("["):
            param = self.constant()
            self.eat("]")
        return t.text, param

    def atom(self) -> Atom:
        name, param = self.pred_name()
        args = []
        if self.optional("("):
            if not self.at(")"):
                args.append(self.term())
                while self.optional(","):
                    args.append(self.term())
            self.eat(")")
        return Atom(Predicate(name, len(args), param), tuple(args))

    def pred_ref(self, need_arity: bool = True) -> tuple[str, object, int | None]:
        name, param = self.pred_name()
        if self.optional("/"):
            t = self.tok
            if t.kind != "int":
                self.error("expected an arity")
            self.i += 1
            return name, param, int(t.text)
        if need_arity:
            self.error("expected '/arity'")
        return name, param, None

    def _starts_comparison(self) -> bool:
        t = self.tok
        if t.kind in ("var", "int", "string"):
            return True
        if t.kind == "name":
            nxt = self.peek()
            return nxt.kind == "op" and nxt.text in ("=", "<=", "+")
        return False

    def comparison(self) -> Atom:
        start = self.tok
        left = self.term()
        if self.optional("<="):
            right = self.term()
            if isinstance(left, Var) and isinstance(right, Const):
                return Atom(builtin("leq", right.value), (left,))
            self.error("only 'Var <= constant' comparisons are supported", start)
        self.eat("=")
        right = self.term()
        return _equation(left, right) or self.error("unsupported comparison", start)

    def literal(self, items: list, in_group: bool):
        if self.at("~") or (self.tok.kind == "name" and self.tok.text == "not" and self.peek().kind == "name"):
            tok = self.tok
            if in_group:
                self.error("negation is not allowed inside a filter group")
            self.i += 1
            items.append(("neg", self.atom(), tok))
        elif self.at("("):
            self.i += 1
            items.append(("group", self.disjunction(), self.tok))
            self.eat(")")
        elif self._starts_comparison():
            items.append(("cmp", self.comparison(), self.tok))
        else:
            tok = self.tok
            items.append(("atom", self.atom(), tok))

    def conjunction_items(self, in_group: bool) -> list:
        items = []
        self.literal(items, in_group)
        while self.optional(","):
            self.literal(items, in_group)
        return items

    def disjunction(self):
        conjs = [self.conjunction_items(True)]
        while self.optional(";"):
            conjs.append(self.conjunction_items(True))
        return ("disj", conjs)

    def statement(self, prog: dict):
        t = self.tok
        if t.kind == "directive":
            self.i += 1
            if t.text == "@output":
                prog["outputs"].append(self.pred_ref())
            elif t.text == "@filter":
                prog["filters"].append(self.pred_ref())
            elif t.text == "@facts":
                ref = self.pred_ref(need_arity=False)
                if self.tok.kind != "string":
                    self.error("expected a quoted file name")
                prog["fact_files"].append((ref, _unquote(self.tok.text), self.tok))
                self.i += 1
            elif t.text == "@theory":
                self.eat("{")
                while not self.at("}"):
                    if self.tok.kind == "eof":
                        self.error("unterminated @theory block")
                    prog["theory"].append(self.theory_rule())
                self.eat("}")
            else:
                self.error(f"unknown directive {t.text}", t)
            self.optional(".")
            return
        head = self.atom()
        body = []
        if self.optional(":-"):
            body = self.conjunction_items(False)
        self.eat(".")
        prog["statements"].append((head, body, t))

    def theory_rule(self):
        t = self.tok
        if t.kind == "name" and t.text == "false" and not (self.peek().kind == "op" and self.peek().text == "("):
            self.i += 1
            head = Atom(FALSE, ())
        elif self._starts_comparison():
            head = self.comparison()
        else:
            head = self.atom()
        self.eat(":-")
        items = self.conjunction_items(True)
        self.eat(".")
        return head, items, t


def _equation(left, right):
    """Map ``left = right`` onto a builtin atom, or None."""
    if isinstance(right, Var) and not isinstance(left, Var):
        left, right = right, left
    if isinstance(left, Arith) and isinstance(right, Var):
        left, right = right, left
    if not isinstance(left, Var):
        return None
    if isinstance(right, Var):
        return Atom(builtin("eq"), (left, right))
    if isinstance(right, Const):
        return Atom(builtin("eq_const", right.value), (left,))
    # arithmetic
    a, b = right.left, right.right
    if isinstance(a, Const) and isinstance(b, Var):
        a, b = b, a
    if isinstance(a, Var) and isinstance(b, Const) and isinstance(b.value, int) and b.value >= 0:
        if b.value == 1:
            return Atom(builtin("succ"), (left, a))
        return Atom(builtin("add", b.value), (left, a))
    if isinstance(a, Var) and isinstance(b, Var):
        return Atom(builtin("plus"), (left, a, b))
    return Atom(builtin("eq"), (left, right))


def parse_program(text: str, origin: str = "<stdin>", check: bool = True, base_dir: str | Path | None = None) -> Program:
    """Parse program text; raises ParseError or (when ``check``) ProgramError."""
    p = _Parser(text, origin)
    raw = {"outputs": [], "filters": [], "fact_files": [], "theory": [], "statements": []}
    while p.tok.kind != "eof":
        p.statement(raw)

    filters = {Predicate(n, a, par) for n, par, a in raw["filters"]}
    outputs = {Predicate(n, a, par) for n, par, a in raw["outputs"]}
    is_filter = lambda pred: pred.is_builtin or pred in filters

    def build_filter(items, where_tok) -> object:
        parts = []
        for kind, val, tok in items:
            if kind == "group":
                parts.append(group_formula(val, tok))
            elif kind == "cmp":
                parts.append(val)
            elif kind == "atom":
                if not is_filter(val.pred):
                    raise ParseError(f"{val.pred} is not a filter predicate", tok.line, tok.col, origin)
                parts.append(val)
            else:
                raise ParseError("negation inside filter", tok.line, tok.col, origin)
        return parts

    def group_formula(disj, tok):
        conjs = []
        for items in disj[1]:
            parts = build_filter(items, tok)
            conjs.append(parts[0] if len(parts) == 1 else And(tuple(parts)))
        return conjs[0] if len(conjs) == 1 else Or(tuple(conjs))

    rules, facts = [], []
    for head, body, tok in raw["statements"]:
        positive, negative, filt = [], [], []
        for kind, val, t in body:
            if kind == "atom" and not is_filter(val.pred):
                positive.append(val)
            elif kind == "neg":
                negative.append(val)
            elif kind == "group":
                filt.append(group_formula(val, t))
            else:
                filt.extend(build_filter([(kind, val, t)], t))
        if not body and all(isinstance(a, Const) for a in head.args):
            facts.append(head)
            continue
        f = TOP if not filt else (filt[0] if len(filt) == 1 else And(tuple(filt)))
        rules.append(Rule(head, tuple(positive), tuple(negative), f))

    theory = []
    for head, items, tok in raw["theory"]:
        body = []
        for kind, val, t in items:
            if kind != "atom" and kind != "cmp":
                raise ParseError("theory bodies are conjunctions of atoms", t.line, t.col, origin)
            body.append(val)
        theory.append(TheoryRule(head, tuple(body)))

    known = {}
    for r in rules:
        for a in (r.head, *r.positive, *r.negative):
            known.setdefault(a.pred.name, set()).add(a.pred)
    for a in facts:
        known.setdefault(a.pred.name, set()).add(a.pred)
    fact_files = []
    for (name, param, arity), path, tok in raw["fact_files"]:
        if arity is None:
            cands = known.get(name, set())
            if len(cands) != 1:
                raise ParseError(f"cannot infer the arity of {name}; write {name}/<arity>", tok.line, tok.col, origin)
            pred = next(iter(cands))
        else:
            pred = Predicate(name, arity, param)
        fact_files.append((pred, path))

    program = Program(tuple(rules), frozenset(outputs), frozenset(filters), tuple(theory), tuple(facts),
                      tuple(fact_files))
    if check:
        problems = validate(program)
        if problems:
            raise ProgramError(problems, origin)
    return program


def parse_file(path: str | Path, check: bool = True) -> Program:
    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), str(path), check)


# ---------------------------------------------------------------------------
# CSV facts


@dataclass(frozen=True)
class FactFile:
    predicate: Predicate
    rows: tuple[tuple, ...]


_INT = re.compile(r"-?\d+\Z")


def parse_value(field: str):
    return int(field) if _INT.match(field) else field


def load_facts(source, predicate: Predicate) -> FactFile:
    """Read CSV rows for ``predicate``; ``source`` is a path or a file-like object."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_facts(fh, predicate)
    rows = []
    for k, row in enumerate(csv.reader(source), start=1):
        if not row:
            continue
        if len(row) != predicate.arity:
            raise ValueError(f"arity mismatch at row {k}: expected {predicate.arity} fields, got {len(row)}")
        rows.append(tuple(parse_value(f) for f in row))
    return FactFile(predicate, tuple(rows))


def load_facts_text(text: str, predicate: Predicate) -> FactFile:
    return load_facts(io.StringIO(text), predicate)


def write_facts(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    for row in rows:
        writer.writerow(row)

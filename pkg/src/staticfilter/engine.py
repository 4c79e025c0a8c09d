"""Static filter computation: per-predicate filter formulas by fixpoint iteration."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import networkx as nx

from .filters import (
    FormulaTooLarge,
    Regime,
    atom_set,
    canonical,
    common_atoms,
    conjunction,
    from_dnf,
    minimal_sets,
    project,
    apply_iota,
)
from .normalize import is_normal
from .program import (
    BOTTOM,
    TOP,
    Atom,
    Formula,
    Or,
    Predicate,
    Program,
    conjoin,
    format_formula,
    idb_predicates,
)

MODES = ("full", "casf")
SCHEDULES = ("sequential", "synchronous")
ITER_CAP_ENV = "STATICFILTER_ITER_CAP"


class IterationCapExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# dependency graph


@dataclass(frozen=True)
class DependencyGraph:
    vertices: frozenset
    edges: frozenset  # (p, q, "+" | "-")

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from((p, q) for p, q, _ in self.edges)
        return g

    def negative_edges(self):
        return {(p, q) for p, q, s in self.edges if s == "-"}


def build_dependency_graph(program: Program) -> DependencyGraph:
    idb = idb_predicates(program)
    edges = set()
    for r in program.rules:
        q = r.head.pred
        for a in r.positive:
            if a.pred in idb:
                edges.add((a.pred, q, "+"))
        for a in r.negative:
            if a.pred in idb:
                edges.add((a.pred, q, "-"))
    return DependencyGraph(frozenset(idb), frozenset(edges))


def stratifiable_predicates(graph: DependencyGraph) -> set[Predicate]:
    """Vertices not reachable from a strongly connected component with an internal negative edge."""
    g = graph.digraph()
    comp_of = {}
    for k, comp in enumerate(nx.strongly_connected_components(g)):
        for v in comp:
            comp_of[v] = k
    tainted = set()
    for p, q in graph.negative_edges():
        if comp_of[p] == comp_of[q]:
            tainted.add(p)
    bad = set()
    for v in tainted:
        bad.add(v)
        bad |= nx.descendants(g, v)
    return set(graph.vertices) - bad


def strata(program: Program) -> list[set[Predicate]]:
    """IDB predicates grouped by strongly connected component, in dependency order."""
    graph = build_dependency_graph(program)
    g = graph.digraph()
    cond = nx.condensation(g)
    order = nx.lexicographical_topological_sort(
        cond, key=lambda n: min(str(p) for p in cond.nodes[n]["members"]))
    return [set(cond.nodes[n]["members"]) for n in order]


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class TraceEntry:
    pass_no: int
    rule: int
    atom: Atom
    negated: bool
    theta_old: Formula
    m: Formula
    theta_new: Formula
    g: Formula = TOP

    def line(self) -> str:
        b = self.atom.pred
        return (f"pass={self.pass_no} rule={self.rule} atom={b.label}/{b.arity} "
                f"theta_old={format_formula(self.theta_old)} M={format_formula(self.m)} "
                f"theta_new={format_formula(self.theta_new)}")


@dataclass
class FilterAssignment:
    thetas: dict
    iteration_count: int = 0
    mode: str = "full"
    trace: list = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    exact: bool = True

    def __getitem__(self, pred: Predicate) -> Formula:
        return self.thetas[pred]

    def __contains__(self, pred) -> bool:
        return pred in self.thetas

    def items(self):
        return self.thetas.items()


# ---------------------------------------------------------------------------
# bounds


def _bound_params(program: Program):
    idb = idb_predicates(program)
    filt = program.filter_predicates()
    n_h = len(idb)
    n_f = len(filt)
    a_h = max((p.arity for p in idb), default=0)
    a_f = max((p.arity for p in filt), default=0)
    return n_h, n_f, a_h, a_f


def iteration_bound(program: Program) -> int:
    """n_h * 2^(n_F * a_h^a_F)."""
    n_h, n_f, a_h, a_f = _bound_params(program)
    exponent = n_f * a_h ** a_f
    if exponent > 64:
        return 2 ** 64 * max(n_h, 1)
    return n_h * 2 ** exponent


def finite_iteration_bound(program: Program, c_f: int) -> int:
    """n_h * ((n_F * c_F)^a_h + 2), for filter relations with at most c_F tuples."""
    n_h, n_f, a_h, _ = _bound_params(program)
    return n_h * ((n_f * c_f) ** a_h + 2)


def default_iteration_cap(program: Program) -> int:
    env = os.environ.get(ITER_CAP_ENV)
    if env:
        return int(env)
    return max(1, min(10 * iteration_bound(program), 10 ** 6))


# ---------------------------------------------------------------------------
# the algorithm


def _project_sets(regime: Regime, g: Formula, target: Atom) -> tuple[list[frozenset], bool]:
    try:
        return project(regime, g, target), True
    except FormulaTooLarge:
        # keep only what every disjunct shares: sound, possibly weaker
        return project(regime, conjunction(common_atoms(g)), target), False


def _casf_meet(sets: list[frozenset]) -> frozenset | None:
    if not sets:
        return None
    out = sets[0]
    for s in sets[1:]:
        out = out & s
    return out


def _casf_union(theta: Formula, sets: list[frozenset]) -> Formula:
    """Atoms entailed by both theta and the new projection (theta is closed)."""
    m = _casf_meet(sets)
    if m is None:
        return theta
    old = atom_set(theta)
    if old is None:
        return conjunction(m)
    return conjunction(old & m)


def initial_filters(program: Program, regime: Regime, mode: str = "full") -> FilterAssignment:
    """TOP for outputs, the negative-occurrence filter for unstratifiable predicates, BOTTOM otherwise."""
    idb = idb_predicates(program)
    thetas = {p: BOTTOM for p in idb}
    for p in idb & program.outputs:
        thetas[p] = TOP
    unstrat = idb - stratifiable_predicates(build_dependency_graph(program)) - program.outputs
    exact = True
    for p in sorted(unstrat, key=Predicate.sort_key):
        sets = []
        for r in program.rules:
            for a in r.negative:
                if a.pred == p:
                    s, ok = _project_sets(regime, r.filter, a)
                    exact &= ok
                    sets.extend(s)
        if mode == "casf":
            thetas[p] = conjunction(_casf_meet(sets))
        else:
            c = canonical(from_dnf(sets), regime)
            exact &= c.exact
            thetas[p] = c.formula
    return FilterAssignment(thetas, 0, mode, [], dict(thetas), exact)


def compute_filters(program: Program, regime: Regime | None = None, mode: str = "full",
                    schedule: str = "sequential", iteration_cap: int | None = None,
                    trace_all: bool = False) -> FilterAssignment:
    """Fixpoint of the filter update over all rules and IDB body atoms (positive and negated).

    ``schedule="sequential"`` updates in place, so later rules in a pass see
    earlier updates; ``"synchronous"`` reads head filters from the state at
    the start of the pass. The trace keeps changing updates only, unless
    ``trace_all`` is set.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    if not is_normal(program):
        raise ValueError("compute_filters needs a normalized program")
    regime = regime or Regime.auto(program)
    cap = iteration_cap if iteration_cap is not None else default_iteration_cap(program)
    result = initial_filters(program, regime, mode)
    thetas = result.thetas
    idb = set(thetas)
    passes = 0
    while idb:
        passes += 1
        if passes > cap:
            raise IterationCapExceeded(f"no fixpoint after {cap} passes")
        heads = dict(thetas) if schedule == "synchronous" else thetas
        changed = False
        for i, rule in enumerate(program.rules):
            body = [(a, False) for a in rule.positive if a.pred in idb]
            body += [(a, True) for a in rule.negative if a.pred in idb]
            for atom, negated in body:
                theta_h = heads[rule.head.pred]
                g = conjoin(apply_iota(rule.head, theta_h), rule.filter) if theta_h is not BOTTOM else BOTTOM
                sets, ok = _project_sets(regime, g, atom) if g is not BOTTOM else ([], True)
                result.exact &= ok
                old = thetas[atom.pred]
                if mode == "casf":
                    new = _casf_union(old, sets)
                    m = conjunction(_casf_meet(sets))
                else:
                    m = from_dnf(minimal_sets(sets))
                    c = canonical(Or((old, m)), regime)
                    result.exact &= c.exact
                    new = c.formula
                if new != old:
                    changed = True
                    thetas[atom.pred] = new
                if new != old or trace_all:
                    result.trace.append(TraceEntry(passes, i, atom, negated, old, m, new, g))
        if not changed:
            break
    result.iteration_count = passes
    return result


def casf_monotonicity_check(trace) -> bool:
    """Every update of a predicate that has left BOTTOM shrinks its atom set."""
    last: dict[Predicate, frozenset] = {}
    for entry in trace:
        p = entry.atom.pred
        old, new = atom_set(entry.theta_old), atom_set(entry.theta_new)
        if p in last and old != last[p]:
            return False
        if old is not None and (new is None or not new <= old):
            return False
        if new is not None:
            last[p] = new
    return True

"""Command line entry point: rewrite, check, eval, stable, bench, explain."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, plots
from .emit import EmitError, emit_program
from .engine import IterationCapExceeded, build_dependency_graph, compute_filters, stratifiable_predicates
from .evaluator import (
    AtomCapExceeded,
    DomainBoundExceeded,
    EvaluationCapExceeded,
    EvaluationError,
    FactStore,
    NotStratifiable,
    evaluate,
    stable_models,
    stratified_evaluate,
)
from .filters import FormulaTooLarge, HornTheory, Regime, auto_theory, program_theory
from .normalize import denormalize, is_normal, normalize
from .parser import ParseError, ProgramError, parse_program, write_facts
from .program import Predicate, Program, format_formula, format_value, idb_predicates, validate
from .rewrite import static_filter

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_CAP = 0, 1, 2, 3
CAP_ERRORS = (IterationCapExceeded, EvaluationCapExceeded, AtomCapExceeded, DomainBoundExceeded, FormulaTooLarge)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _say(*parts) -> None:
    print(*parts, file=sys.stderr)


def _load(path: str, allow_missing_outputs: bool = False) -> Program:
    if path == "-":
        text, origin = sys.stdin.read(), "<stdin>"
    else:
        text, origin = Path(path).read_text(encoding="utf-8"), path
    program = parse_program(text, origin, check=False)
    problems = validate(program)
    if allow_missing_outputs:
        # a program may legitimately have lost every rule for an output
        problems = [v for v in problems if not v.message.startswith("output predicate")]
    if problems:
        raise ProgramError(problems, origin)
    return program


def _theory(args, program: Program) -> HornTheory:
    choice = getattr(args, "theory", "auto")
    if choice == "auto":
        return auto_theory(program)
    if choice == "none":
        return program_theory(program)
    text = Path(choice).read_text(encoding="utf-8")
    if "@theory" not in text:
        text = "@theory {\n" + text + "\n}\n"
    extra = parse_program(text, choice, check=False).theory
    return program_theory(program).union(extra)


def _regime(args, program: Program) -> Regime:
    cap = None if args.dnf_cap == 0 else args.dnf_cap
    if args.regime == "prop":
        return Regime.prop(cap)
    return Regime.horn(_theory(args, program), cap)


def _base_dir(path: str) -> Path | None:
    return None if path == "-" else Path(path).parent


def _store(program: Program, program_path: str, fact_files=()) -> FactStore:
    store = FactStore.from_program(program, _base_dir(program_path))
    for f in fact_files:
        extra = parse_program(Path(f).read_text(encoding="utf-8"), f, check=False)
        store = store.merged(FactStore.from_program(extra, Path(f).parent))
    return store


def _evaluate(program: Program, store: FactStore, args):
    kw = {"max_rounds": args.max_rounds, "max_facts": args.max_facts}
    if any(r.negative for r in program.rules):
        return stratified_evaluate(program, store, **kw)
    return evaluate(program, store, **kw)


# ---------------------------------------------------------------------------
# commands


def cmd_rewrite(args) -> int:
    program = _load(args.input)
    if not program.outputs and not args.allow_empty_outputs:
        _say("error: no outputs declared; every filter would stay false and every rule would be deleted "
             "(pass --allow-empty-outputs to do it anyway)")
        return EXIT_USAGE
    if not is_normal(program):
        program = normalize(program)
    regime = _regime(args, program)
    result = static_filter(program, args.mode, regime, args.schedule)
    out = result.program
    if not args.keep_normal:
        out = denormalize(out, fresh_only=True)
    text = emit_program(out, args.emit)
    a = result.assignment
    if args.trace:
        for entry in a.trace:
            _say(entry.line())
    for p in sorted(a.thetas, key=Predicate.sort_key):
        _say(f"theta {p} = {format_formula(a.thetas[p])}")
    _say(f"iterationCount = {a.iteration_count}")
    _say(f"dropped rules = {', '.join(map(str, result.dropped)) or 'none'}")
    if not a.exact:
        _say("note: a size cap was hit; some filters are weaker than the exact ones")
    _write(text, args.out)
    return EXIT_OK


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _output_facts(program: Program, result) -> set:
    return {(p, row) for p in program.outputs for row in result.rows(p)}


def _fact_text(fact) -> str:
    p, row = fact
    return f"{p.label}({', '.join(format_value(v) for v in row)})" if row else p.label


def cmd_check(args) -> int:
    original = _load(args.original, allow_missing_outputs=True)
    rewritten = _load(args.rewritten, allow_missing_outputs=True)
    if original.outputs != rewritten.outputs:
        _say("error: the programs declare different outputs")
        return EXIT_USAGE
    sets = args.facts or [None]
    for f in sets:
        store = _store(original, args.original, [f] if f else [])
        store_r = _store(rewritten, args.rewritten, [f] if f else [])
        a = _output_facts(original, _evaluate(original, store, args))
        b = _output_facts(rewritten, _evaluate(rewritten, store_r, args))
        label = f or "(program facts)"
        if a != b:
            witness = sorted(a ^ b, key=lambda x: (str(x[0]), str(x[1])))[0]
            side = "original" if witness in a else "rewritten"
            _say(f"mismatch on {label}: {_fact_text(witness)} is derived only by the {side} program")
            return EXIT_MISMATCH
        _say(f"equivalent on {label}: {len(a)} output facts")
    return EXIT_OK


def cmd_eval(args) -> int:
    program = _load(args.input)
    store = _store(program, args.input, args.facts)
    result = _evaluate(program, store, args)
    preds = sorted(idb_predicates(program) if args.all else program.outputs, key=Predicate.sort_key)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for p in preds:
        rows = sorted(result.rows(p), key=lambda r: tuple((isinstance(v, str), v) for v in r))
        if out_dir:
            with open(out_dir / f"{p.name}.csv", "w", newline="") as fh:
                write_facts(rows, fh)
        else:
            print(f"# {p}")
            write_facts(rows, sys.stdout)
    _say(f"rule firings = {result.total_firings}; rounds = {result.rounds}")
    return EXIT_OK


def cmd_stable(args) -> int:
    program = _load(args.input)
    store = _store(program, args.input, args.facts)
    models = stable_models(program, store, args.atom_cap, args.bound)
    visible = program.outputs if not args.all else None
    for k, m in enumerate(models, 1):
        facts = sorted((f for f in m if visible is None or f[0] in visible), key=lambda f: _fact_text(f))
        print(f"model {k}: {{{', '.join(_fact_text(f) for f in facts)}}}")
    _say(f"{len(models)} stable model(s)")
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    modes = tuple(m for m in args.modes.split(",") if m)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stem = out.with_suffix("")
    if args.iterations:
        rows = bench.iteration_profile(args.family, sizes, modes, args.schedule)
        out.write_text(json.dumps({"schema": bench.SCHEMA, "iterations": rows}, indent=2) + "\n")
        with open(stem.with_suffix(".csv"), "w") as fh:
            fh.write("family,size,mode,schedule,iteration_count\n")
            for r in rows:
                fh.write(f"{r['family']},{r['size']},{r['mode']},{r['schedule']},{r['iteration_count']}\n")
        if not args.no_plots:
            plots.plot_iterations(rows, stem.with_suffix(".png"))
        for r in rows:
            _say(f"{r['family']} size={r['size']} mode={r['mode']} passes={r['iteration_count']}")
        return EXIT_OK
    reports = bench.run_suite(args.family, sizes, args.seed, args.edges, args.runs, modes, args.workers)
    bench.write_json(reports, out)
    bench.write_csv(reports, stem.with_suffix(".csv"))
    if not args.no_plots:
        for rep in reports:
            plots.plot_report(rep, out.parent / f"{stem.name}-{rep['name']}.png")
        if len(reports) > 1:
            plots.plot_scaling(reports, stem.with_suffix(".png"))
    for row in bench.report_rows(reports):
        _say(f"{row['name']:>16} {row['variant']:>8} {row['status']:>12} firings={row['rule_firings']} "
             f"time={row['wall_time_median']}")
    return EXIT_OK


def cmd_explain(args) -> int:
    program = _load(args.input)
    if not is_normal(program):
        program = normalize(program)
    target = [p for p in idb_predicates(program) if p.name == args.predicate or str(p) == args.predicate]
    if not target:
        _say(f"error: {args.predicate} is not an IDB predicate of this program")
        return EXIT_USAGE
    p = target[0]
    regime = _regime(args, program)
    a = compute_filters(program, regime, args.mode, args.schedule, trace_all=True)
    init = a.initial[p]
    unstrat = idb_predicates(program) - stratifiable_predicates(build_dependency_graph(program))
    why = ("output predicate" if p in program.outputs else
           "not stratifiable, from its negated occurrences" if p in unstrat else "not an output")
    entries = [e for e in a.trace if e.atom.pred == p]
    if any(e.theta_new != e.theta_old for e in entries):
        print(f"{p}: initialized {format_formula(init)} ({why})")
    else:
        print(f"{p}: initialized {format_formula(init)} ({why}), never updated")
    for e in entries:
        rule = program.rules[e.rule]
        lit = ("~" if e.negated else "") + str(e.atom)
        print(f"pass {e.pass_no}, rule {e.rule + 1}: {rule}")
        print(f"  body atom {lit}")
        print(f"  G := {format_formula(e.g)}")
        print(f"  M := {format_formula(e.m)}")
        if e.theta_new == e.theta_old:
            print(f"  theta unchanged: {format_formula(e.theta_old)}")
        else:
            print(f"  theta {format_formula(e.theta_old)}  ->  {format_formula(e.theta_new)}")
    print(f"fixpoint after {a.iteration_count} passes")
    print(f"theta_{p.label} = {format_formula(a.thetas[p])}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _filter_options(sp) -> None:
    sp.add_argument("--mode", choices=("full", "casf"), default="casf")
    sp.add_argument("--regime", choices=("prop", "horn"), default="horn")
    sp.add_argument("--theory", default="auto", help="auto, none, or a file with theory rules")
    sp.add_argument("--schedule", choices=("sequential", "synchronous"), default="sequential")
    sp.add_argument("--dnf-cap", type=int, default=4096, help="0 disables the cap")


def _eval_options(sp) -> None:
    sp.add_argument("--max-rounds", type=int, default=10_000)
    sp.add_argument("--max-facts", type=int, default=5_000_000)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="staticfilter", description="Static filtering for Datalog programs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("rewrite", help="compute filters and rewrite the program")
    sp.add_argument("input")
    _filter_options(sp)
    sp.add_argument("--emit", choices=("generic", "clingo", "souffle"), default="generic")
    sp.add_argument("--trace", action="store_true", help="print every filter update to stderr")
    sp.add_argument("--out", help="write the program here instead of stdout")
    sp.add_argument("--keep-normal", action="store_true", help="do not fold helper variables back")
    sp.add_argument("--allow-empty-outputs", action="store_true")
    sp.set_defaults(func=cmd_rewrite)

    sp = sub.add_parser("check", help="compare the outputs of two programs")
    sp.add_argument("original")
    sp.add_argument("rewritten")
    sp.add_argument("facts", nargs="*", help="fact files, each checked separately")
    _eval_options(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("eval", help="evaluate a program and print output facts as CSV")
    sp.add_argument("input")
    sp.add_argument("--facts", action="append", default=[])
    sp.add_argument("--all", action="store_true", help="print every IDB predicate")
    sp.add_argument("--out-dir")
    _eval_options(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("stable", help="enumerate stable models by brute force")
    sp.add_argument("input")
    sp.add_argument("--facts", action="append", default=[])
    sp.add_argument("--atom-cap", type=int, default=20)
    sp.add_argument("--bound", type=int, default=64, help="numeric bound for grounding")
    sp.add_argument("--all", action="store_true", help="show all atoms, not only outputs")
    sp.set_defaults(func=cmd_stable)

    sp = sub.add_parser("bench", help="original versus rewritten on a program family")
    sp.add_argument("--family", choices=bench.FAMILIES, default="counter")
    sp.add_argument("--sizes", default="4,6,8")
    sp.add_argument("--edges", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--runs", type=int, default=5)
    sp.add_argument("--modes", default="full,casf")
    sp.add_argument("--schedule", choices=("sequential", "synchronous"), default="sequential")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--iterations", action="store_true", help="only count filter passes")
    sp.add_argument("--out", default="bench-report.json")
    sp.add_argument("--no-plots", action="store_true")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("explain", help="narrate how a predicate's filter was derived")
    sp.add_argument("input")
    sp.add_argument("predicate")
    _filter_options(sp)
    sp.set_defaults(func=cmd_explain)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ProgramError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except CAP_ERRORS as exc:
        _say(f"resource cap: {exc}")
        return EXIT_CAP
    except (EmitError, NotStratifiable, EvaluationError, OSError, ValueError) as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

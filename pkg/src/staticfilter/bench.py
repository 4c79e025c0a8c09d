"""Original-versus-rewritten comparisons on the reference evaluator."""

from __future__ import annotations

import csv
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import generators
from .engine import IterationCapExceeded, compute_filters, iteration_bound
from .evaluator import (
    DEFAULT_MAX_FACTS,
    DEFAULT_MAX_ROUNDS,
    EvaluationCapExceeded,
    FactStore,
    evaluate,
    stratified_evaluate,
)
from .filters import Regime
from .normalize import is_normal, normalize
from .program import Program
from .rewrite import static_filter

SCHEMA = "bench-report/v1"
FAMILIES = ("counter", "exp-counter", "reach", "tc", "permutation")


@dataclass
class VariantResult:
    variant: str
    status: str = "ok"
    facts_derived: int | None = None
    output_facts: int | None = None
    rule_firings: int | None = None
    wall_time_median: float | None = None
    wall_times: list = field(default_factory=list)
    rewrite_time: float | None = None
    iteration_count: int | None = None
    iteration_bound: int | None = None
    rules: int = 0
    message: str = ""


def _run_eval(program: Program, store: FactStore, max_rounds: int, max_facts: int):
    if any(r.negative for r in program.rules):
        return stratified_evaluate(program, store, max_rounds, max_facts)
    return evaluate(program, store, max_rounds, max_facts)


def _measure(name: str, program: Program, store: FactStore, runs: int, max_rounds: int,
             max_facts: int) -> VariantResult:
    res = VariantResult(name, rules=len(program.rules))
    given = len(store) + len(program.facts)
    for _ in range(runs):
        t0 = time.perf_counter()
        try:
            out = _run_eval(program, store, max_rounds, max_facts)
        except EvaluationCapExceeded as exc:
            res.status = "cap_exceeded"
            res.message = str(exc)
            res.wall_times.append(time.perf_counter() - t0)
            break
        res.wall_times.append(time.perf_counter() - t0)
        total = sum(len(r) for r in out.relations.values())
        res.facts_derived = total - given
        res.output_facts = sum(out.count(p) for p in program.outputs)
        res.rule_firings = out.total_firings
    res.wall_time_median = statistics.median(res.wall_times) if res.wall_times else None
    return res


def run_comparison(program: Program, store: FactStore | None = None, modes=("full", "casf"),
                   runs: int = 5, regime: Regime | None = None, max_rounds: int = DEFAULT_MAX_ROUNDS,
                   max_facts: int = DEFAULT_MAX_FACTS, name: str = "program", seed: int | None = None,
                   params: dict | None = None) -> dict:
    """Evaluate the original and each rewritten variant; wall times are medians over ``runs``."""
    store = store or FactStore()
    if not is_normal(program):
        program = normalize(program)
    regime = regime or Regime.auto(program)
    variants = [_measure("original", program, store, runs, max_rounds, max_facts)]
    for mode in modes:
        times, rewriting = [], None
        try:
            for _ in range(runs):
                t0 = time.perf_counter()
                rewriting = static_filter(program, mode, regime)
                times.append(time.perf_counter() - t0)
        except IterationCapExceeded as exc:
            variants.append(VariantResult(mode, "iteration_cap", message=str(exc)))
            continue
        v = _measure(mode, rewriting.program, store, runs, max_rounds, max_facts)
        v.rewrite_time = statistics.median(times)
        v.iteration_count = rewriting.assignment.iteration_count
        v.iteration_bound = iteration_bound(program)
        variants.append(v)
    return {
        "schema": SCHEMA,
        "name": name,
        "params": params or {},
        "seed": seed,
        "runs": runs,
        "input_facts": len(store) + len(program.facts),
        "variants": [asdict(v) for v in variants],
    }


# ---------------------------------------------------------------------------
# families


def start_node(graph) -> str:
    """``a`` when it has successors, otherwise the busiest source node."""
    out: dict = {}
    for src, _ in graph:
        out[src] = out.get(src, 0) + 1
    if out.get("a"):
        return "a"
    return max(sorted(out), key=lambda n: out[n]) if out else "a"


def family_case(family: str, size: int, seed: int = 0, edges: int | None = None):
    """(program, store, params) for one named family instance."""
    if family == "counter":
        program, store = generators.gen_counter(size)
        return program, store, {"bits": size}
    if family == "exp-counter":
        program, store = generators.gen_exp_counter(size)
        return program, store, {"bits": size}
    if family == "reach":
        graph = generators.random_graph(size, edges or 2 * size, seed)
        program, store = generators.gen_bounded_reach(5, start_node(graph), graph)
        return program, store, {"nodes": size, "edges": len(graph)}
    if family == "tc":
        graph = generators.random_graph(size, edges or 5 * size, seed)
        program, store = generators.gen_transitive_closure(start_node(graph), graph)
        return program, store, {"nodes": size, "edges": len(graph)}
    if family == "permutation":
        return generators.gen_permutation(size), FactStore(), {"k": size}
    raise ValueError(f"unknown family {family!r}")


def _job(args) -> dict:
    family, size, seed, edges, runs, modes = args
    program, store, params = family_case(family, size, seed, edges)
    return run_comparison(program, store, modes, runs, name=f"{family}-{size}", seed=seed, params=params)


def iteration_profile(family: str, sizes, modes=("full", "casf"), schedule: str = "sequential") -> list[dict]:
    """Filter-computation passes per size, without evaluating anything."""
    rows = []
    for size in sizes:
        program, _, params = family_case(family, size)
        program = normalize(program)
        regime = Regime.auto(program)
        for mode in modes:
            t0 = time.perf_counter()
            a = compute_filters(program, regime, mode, schedule)
            rows.append({"family": family, "size": size, "mode": mode, "schedule": schedule,
                         "iteration_count": a.iteration_count, "seconds": time.perf_counter() - t0})
    return rows


def run_suite(family: str, sizes, seed: int = 0, edges: int | None = None, runs: int = 5,
              modes=("full", "casf"), workers: int = 1) -> list[dict]:
    jobs = [(family, s, seed, edges, runs, tuple(modes)) for s in sizes]
    if workers <= 1 or len(jobs) == 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


# ---------------------------------------------------------------------------
# output


CSV_FIELDS = ("name", "variant", "status", "facts_derived", "output_facts", "rule_firings",
              "wall_time_median", "rewrite_time", "iteration_count", "rules")


def report_rows(reports: list[dict]):
    for rep in reports:
        for v in rep["variants"]:
            yield {"name": rep["name"], **{k: v.get(k) for k in CSV_FIELDS if k != "name"}}


def write_csv(reports: list[dict], path, delimiter: str = ",") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, delimiter=delimiter)
        w.writeheader()
        for row in report_rows(reports):
            w.writerow(row)


def write_json(reports: list[dict], path) -> None:
    Path(path).write_text(json.dumps({"schema": SCHEMA, "reports": reports}, indent=2) + "\n")

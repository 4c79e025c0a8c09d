"""Static filtering for Datalog: push output filters into rule bodies."""

from .engine import FilterAssignment, compute_filters, strata
from .evaluator import FactStore, evaluate, stable_models, stratified_evaluate
from .filters import Regime, entails, repr_formula
from .normalize import denormalize, normalize
from .parser import parse_file, parse_program
from .emit import emit_program
from .program import Atom, Const, Predicate, Program, Rule, Var
from .rewrite import rewrite_program, static_filter

__all__ = [
    "Atom", "Const", "FactStore", "FilterAssignment", "Predicate", "Program", "Regime", "Rule", "Var",
    "compute_filters", "denormalize", "emit_program", "entails", "evaluate", "normalize", "parse_file",
    "parse_program", "repr_formula", "rewrite_program", "stable_models", "static_filter", "strata",
    "stratified_evaluate",
]

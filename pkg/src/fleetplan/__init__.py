"""Hierarchical LTL task allocation and path planning for robot teams."""

from .ltl import (
    Atom,
    FleetSpec,
    Formula,
    FormulaError,
    parse_formula,
    pretty,
    to_nnf,
    validate,
)
from .buchi import Clause, Label, Nba, TOP, BOTTOM, export_nba, import_nba, preprocess, translate
from .workspace import Metric, Workspace, check_assumption_env, compute_metric, load_workspace

__all__ = [
    "Atom",
    "FleetSpec",
    "Formula",
    "FormulaError",
    "parse_formula",
    "pretty",
    "to_nnf",
    "validate",
    "Clause",
    "Label",
    "Nba",
    "TOP",
    "BOTTOM",
    "export_nba",
    "import_nba",
    "preprocess",
    "translate",
    "Metric",
    "Workspace",
    "check_assumption_env",
    "compute_metric",
    "load_workspace",
]

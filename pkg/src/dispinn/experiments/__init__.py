"""Experiment specifications, the end-to-end runner, result tables, and
the command-line interface."""

from .specs import ExperimentSpec, RomSpec, config_path, load_experiment
from .runner import ResultTable, run_error_study, run_experiment
from .tables import reproduce_table

__all__ = [
    "ExperimentSpec",
    "ResultTable",
    "RomSpec",
    "config_path",
    "load_experiment",
    "reproduce_table",
    "run_error_study",
    "run_experiment",
]

"""Solver loops, reference eigensolvers, estimators and statistics."""

from .estimators import projected_energy, shift_estimate
from .power import PowerResult, dense_eig_smallest, exact_power_iteration
from .records import COLUMNS, RunRecord
from .runner import ExperimentResult, Problem, Reference, build_problem, run_experiment
from .stats import SummaryStats, autocorrelation_time, summarize
from .theory import AssumptionReport, TheoryPrediction, assumption_suite, predict_for_matrix, predict_theory

__all__ = [
    "AssumptionReport",
    "COLUMNS",
    "ExperimentResult",
    "PowerResult",
    "Problem",
    "Reference",
    "RunRecord",
    "SummaryStats",
    "TheoryPrediction",
    "assumption_suite",
    "autocorrelation_time",
    "build_problem",
    "dense_eig_smallest",
    "exact_power_iteration",
    "predict_for_matrix",
    "predict_theory",
    "projected_energy",
    "run_experiment",
    "shift_estimate",
    "summarize",
]

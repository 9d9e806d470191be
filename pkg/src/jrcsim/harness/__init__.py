"""Seeded Monte-Carlo experiments, result files and the command line."""

from .config import SimConfig
from .experiments import (
    InvarianceReport,
    fsk2_coherent_ser,
    run_false_alarm_study,
    run_invariance_study,
    run_pd_experiment,
    run_ser_experiment,
)
from .results import CurvePoint, CurveResult, emit_results, read_curve_csv

__all__ = [
    "SimConfig",
    "CurvePoint",
    "CurveResult",
    "InvarianceReport",
    "emit_results",
    "fsk2_coherent_ser",
    "read_curve_csv",
    "run_false_alarm_study",
    "run_invariance_study",
    "run_pd_experiment",
    "run_ser_experiment",
]

"""Benchmark harness: dataset ingestion, experiment protocol and reports."""

from .datasets import gaussian_mixture, load_dataset, resolve_dataset
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    SweepReport,
    run_experiment,
    sweep_ill,
    sweep_time,
    winning_percentage,
)
from .report import emit_report, recompute

"""
SkIn - bench
Training-step cost versus input length, quadratic extrapolation and reports.
"""

from .config import DEFAULT_LENGTHS, DEFAULT_METHODS, BenchConfig
from .methods import Layout, Method, ModeledCost, layout_for, modeled_cost, validate_lengths
from .fitting import QuadFit, quad_fit, scaling_exponent
from .sweep import (
    CostSample, SavingsReport, build_step, by_method, run_cost_sweep, savings_percent,
    savings_report, summarize_sweep, time_step,
)
from .report import plot_cost_curves, write_bench_csv, write_bench_dat, write_bench_summary

__all__ = [
    "DEFAULT_LENGTHS", "DEFAULT_METHODS", "BenchConfig",
    "Layout", "Method", "ModeledCost", "layout_for", "modeled_cost", "validate_lengths",
    "QuadFit", "quad_fit", "scaling_exponent",
    "CostSample", "SavingsReport", "build_step", "by_method", "run_cost_sweep",
    "savings_percent", "savings_report", "summarize_sweep", "time_step",
    "plot_cost_curves", "write_bench_csv", "write_bench_dat", "write_bench_summary",
]

"""
SkIn - Benchmark Reports
CSV rows, JSON summary, gnuplot .dat blocks and the cost-scaling figure.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from .sweep import CostSample, by_method

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["method", "L", "trial", "wall_time_s", "modeled_elems", "peak_elems", "extrapolated"]


def write_bench_csv(samples: Sequence[CostSample], path: Path) -> int:
    """
    One row per method × length × trial.

    Returns:
        Number of data rows written.
    """
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for sample in samples:
            for trial, seconds in enumerate(sample.trial_times):
                writer.writerow([
                    sample.method, sample.length, trial, repr(float(seconds)),
                    sample.modeled_quadratic_elems, sample.measured_peak_elems,
                    int(sample.extrapolated),
                ])
                rows += 1
    return rows


def write_bench_summary(
    samples: Sequence[CostSample],
    summary: Dict[str, Any],
    path: Path,
    settings: Optional[Dict[str, Any]] = None,
) -> None:
    """JSON with the sweep settings, per-point medians, fits, exponents and savings."""
    points = [
        {k: v for k, v in sample.to_dict().items() if k != "trial_times"}
        for sample in samples
    ]
    document = {"settings": settings or {}, "points": points, **summary}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write("\n")


def write_bench_dat(samples: Sequence[CostSample], path: Path) -> None:
    """
    gnuplot data: one block per method, blocks separated by two blank
    lines so `index i` selects a method.
    """
    with open(path, "w", encoding="utf-8") as f:
        blocks = list(by_method(samples).items())
        for i, (method, group) in enumerate(blocks):
            f.write(f"# method {method}\n")
            f.write("# L wall_time_s modeled_elems peak_elems extrapolated\n")
            for s in group:
                f.write(
                    f"{s.length} {s.wall_time!r} {s.modeled_quadratic_elems} "
                    f"{s.measured_peak_elems} {int(s.extrapolated)}\n"
                )
            if i < len(blocks) - 1:
                f.write("\n\n")


def plot_cost_curves(samples: Sequence[CostSample], path: Path) -> None:
    """
    Log-log memory (measured peak and modeled) and time curves per method.

    Extrapolated points are drawn hollow.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
    panels = [
        ("measured_peak_elems", "peak live elements"),
        ("modeled_quadratic_elems", "modeled attention elements"),
        ("wall_time", "step time (s)"),
    ]
    for ax, (field, label) in zip(axes, panels):
        for method, group in by_method(samples).items():
            xs = [s.length for s in group]
            ys = [getattr(s, field) for s in group]
            line, = ax.plot(xs, ys, "-", label=method)
            color = line.get_color()
            for s, y in zip(group, ys):
                ax.plot(
                    s.length, y, "o", color=color,
                    markerfacecolor="none" if s.extrapolated else color,
                )
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("input length L")
        ax.set_ylabel(label)
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    axes[0].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    logger.info("wrote %s", path)

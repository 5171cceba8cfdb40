"""Figure rendering for the report path: one PNG per (workload, metric)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from sgbench.report import ResultSet, series_groups, _slug  # noqa: E402

_AXIS_LABEL = {
    "time_s": "Time (s)",
    "gflops": "GFLOPS",
    "gflops_per_w": "GFLOPS/W",
    "energy_j": "Energy (J)",
    "power_mw": "Power (mW)",
}


def render_figures(rs: ResultSet, out_dir) -> list[Path]:
    """Write one line chart per (workload, metric) with a series per
    (device, precision). Size-0 records have no x position and are
    skipped; a chart with nothing plottable is not written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for (workload, metric), series in series_groups(rs).items():
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        plotted = False
        for device, precision, points in series:
            pts = [(s, v) for s, v in points if s > 0]
            if not pts:
                continue
            xs = [s for s, _ in pts]
            ys = [v for _, v in pts]
            ax.plot(xs, ys, marker="o", markersize=3.5, linewidth=1.2,
                    label=f"{device} {precision.upper()}")
            plotted = True
        if not plotted:
            plt.close(fig)
            continue
        ax.set_xscale("log", base=2)
        ax.set_xlabel("size")
        ax.set_ylabel(_AXIS_LABEL[metric])
        ax.set_title(f"{workload}: {_AXIS_LABEL[metric]}")
        ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out / f"{_slug(workload)}_{_slug(metric)}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written

"""Vector-graphic learning curves from metrics logs.

One SVG per metric: solid mean line per run group with a +-std shaded band
across seeds (no band for single-seed groups). Curves are aligned on
evaluation-tick index and smoothed with a trailing moving average; the
logs on disk always keep the raw values.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .training import METRICS_COLUMNS, read_metrics_csv  # noqa: E402

PLOT_METRICS = [c for c in METRICS_COLUMNS if c not in ("env_step", "episode")]


def smooth_trailing(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; early entries average what exists so far."""
    if window <= 1:
        return values.astype(float)
    out = np.empty(len(values), dtype=float)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        chunk = values[lo : i + 1]
        good = chunk[np.isfinite(chunk)]
        out[i] = good.mean() if len(good) else float("nan")
    return out


def group_curves(rows_per_seed, metric: str, window: int = 5):
    """Align seed curves by tick index; returns (steps, mean, std).

    Steps are averaged across seeds at each tick (episode cadence is fixed,
    step counts drift slightly with episode lengths).
    """
    if not rows_per_seed:
        raise ValueError("empty group")
    n = min(len(rows) for rows in rows_per_seed)
    if n == 0:
        raise ValueError("a run in the group has no metric rows")
    steps = np.mean(
        [[r.env_step for r in rows[:n]] for rows in rows_per_seed], axis=0
    )
    curves = []
    for rows in rows_per_seed:
        vals = np.array([getattr(r, metric) for r in rows[:n]], dtype=float)
        vals[~np.isfinite(vals)] = np.nan
        curves.append(smooth_trailing(vals, window))
    curves = np.stack(curves)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN ticks stay NaN
        mean = np.nanmean(curves, axis=0)
        std = np.nanstd(curves, axis=0) if len(curves) > 1 else np.zeros(n)
    return steps, mean, std


def emit_plots(groups: dict, out_dir, metrics=None, window: int = 5):
    """groups: {label: [rows_per_seed, ...]} -> one SVG per metric.

    Returns the list of written file paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    metrics = metrics or PLOT_METRICS
    written = []
    for metric in metrics:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        drew = False
        for label, rows_per_seed in groups.items():
            try:
                steps, mean, std = group_curves(rows_per_seed, metric, window)
            except ValueError:
                continue
            if not np.isfinite(mean).any():
                continue
            (line,) = ax.plot(steps, mean, label=f"{label} (n={len(rows_per_seed)})")
            if len(rows_per_seed) > 1:
                ax.fill_between(
                    steps, mean - std, mean + std, alpha=0.2, color=line.get_color()
                )
            drew = True
        if not drew:
            plt.close(fig)
            continue
        ax.set_xlabel("environment steps")
        ax.set_ylabel(metric)
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{metric}.svg")
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written


def load_log_groups(paths):
    """Group metrics.csv paths by run-directory label, stripping a trailing
    _s<seed> suffix so seeds of one variant land in one group."""
    groups: dict[str, list] = {}
    for path in sorted(paths):
        label = os.path.basename(os.path.dirname(os.path.abspath(path))) or "run"
        base = label.rsplit("_s", 1)
        if len(base) == 2 and base[1].isdigit():
            label = base[0]
        groups.setdefault(label, []).append(read_metrics_csv(path))
    return groups

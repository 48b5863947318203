"""Optional SVG line charts of a run's long-format series (needs matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _by_seed(series, col):
    out = {}
    for seed, n, dist, ratio in series:
        v = dist if col == "distance" else ratio
        if v is not None and v > 0:
            out.setdefault(seed, ([], []))
            out[seed][0].append(n)
            out[seed][1].append(v)
    return out


def plot_series(series, out_dir) -> list:
    """Write ``distance.svg`` and ``ratio.svg`` (log scale, one line per seed); return paths written."""
    written = []
    labels = {"distance": "|x_n - x*|", "ratio": "eps_n / delta_n"}
    for col, ylabel in labels.items():
        lines = _by_seed(series, col)
        if not lines:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for seed, (n, v) in sorted(lines.items()):
            ax.plot(n, v, lw=0.8, alpha=0.7)
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        path = Path(out_dir) / f"{col}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written

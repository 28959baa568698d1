"""SVG band plots for posterior-predictive and forecast curves.

Matplotlib output is made reproducible: hash salts and date metadata
are pinned so identical inputs produce byte-identical SVG files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import CurveBand

matplotlib.rcParams["svg.hashsalt"] = "bcilm"

__all__ = ["plot_band_svg"]


def plot_band_svg(band: CurveBand, path, observed=None, observed_times=None,
                  title: str = "Posterior predictive epidemic curve") -> None:
    """Write an SVG of the HPDI band, its median, and optionally the
    observed incident counts."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.fill_between(band.times, band.lower, band.upper, alpha=0.3,
                    color="tab:blue", label="95% HPDI")
    ax.plot(band.times, band.median, "--", color="tab:blue",
            label="posterior median")
    if observed is not None:
        if observed_times is None:
            observed_times = band.times[:len(observed)]
        ax.plot(np.asarray(observed_times), np.asarray(observed), "-",
                color="black", label="observed")
    ax.set_xlabel("time")
    ax.set_ylabel("new infections")
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)

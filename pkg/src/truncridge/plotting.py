"""Static report figures (SVG via matplotlib's Agg canvas)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.6),
    # stable ids and text-as-text so repeated runs give identical files
    "svg.hashsalt": "truncridge",
    "svg.fonttype": "none",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def rate_figure(points, fit, predicted_slope: float | None, path, title: str = "") -> Path:
    """Log-log scatter of best-lambda excess risk vs n with fitted and reference lines.

    ``points`` holds ``(n, excess, std_error)`` triples.
    """
    pts = np.asarray(points, dtype=float)
    n, risk, se = pts[:, 0], pts[:, 1], pts[:, 2]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(n, risk, yerr=se, fmt="o", color="k", ms=4, capsize=2, label="best-$\\lambda$ excess risk")
        grid = np.geomspace(n.min(), n.max(), 50)
        if fit is not None:
            ax.plot(grid, fit.predict(grid), "-", color="C0", label=f"fit: slope {fit.slope:.3f}")
        if predicted_slope is not None:
            # anchored at the geometric centre of the data
            logn, logr = np.mean(np.log(n)), np.mean(np.log(risk))
            ref = np.exp(logr + predicted_slope * (np.log(grid) - logn))
            ax.plot(grid, ref, "--", color="C3", label=f"predicted: slope {predicted_slope:.3f}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("excess risk")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        return _save(fig, path)


def sweep_figure(lams, risks, n: int, path) -> Path:
    """Excess risk against lambda at one sample size; lambda = 0 as a flat line."""
    lams = np.asarray(lams, dtype=float)
    risks = np.asarray(risks, dtype=float)
    pos = lams > 0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(lams[pos], risks[pos], "o-", color="k", ms=3, label="$\\lambda > 0$")
        if np.any(~pos):
            ax.axhline(float(risks[~pos][0]), ls="--", color="C3", label="$\\lambda = 0$")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("$\\lambda$")
        ax.set_ylabel("excess risk")
        ax.set_title(f"n = {n}")
        ax.legend(loc="best")
        return _save(fig, path)

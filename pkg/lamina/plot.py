"""Figures for reports, drawn with the Agg backend. ``report`` imports this module only when a plot is asked for."""
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from lamina import console  # noqa: E402


def loglogconfig(fig_ax, xlabel, ylabel):
    fig_ax.grid(True, which="both", alpha=0.4)
    fig_ax.set_xlabel(xlabel)
    fig_ax.set_ylabel(ylabel)


def budget_plot(records: list, path):
    """sup ||u - w0|| against beta + delta^(alpha-5/2), with the fitted power law."""
    console.info("Plotting error against budget")
    budgets = np.array([r.budget for r in records])
    errors = np.array([r.sup_error for r in records])

    fig, ax = plt.subplots(dpi=200)
    loglogconfig(ax, r"$\beta + \delta^{\alpha - 5/2}$", r"$\sup_t \|u - w^0\|_{L^2}$")
    ax.loglog(budgets, errors, "o", color="#8EB6F8", label="runs")
    positive = errors > 0
    if positive.sum() >= 2:
        slope, offset = np.polyfit(np.log(budgets[positive]), np.log(errors[positive]), 1)
        xaxis = np.geomspace(budgets.min(), budgets.max(), 30)
        ax.loglog(xaxis, np.exp(offset) * xaxis**slope, linestyle="--", color="k", alpha=0.85, label=f"slope {slope:.3f}")
    ax.legend(loc="best")
    fig.savefig(path)
    plt.close(fig)
    return path

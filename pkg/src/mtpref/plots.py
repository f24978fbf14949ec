"""Report figures written next to the CSV/JSON outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .calibration import apply_sigmoid  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def calibration_figure(rewards, result, path, title=None):
    """Sigmoid at T=1 and at the selected temperature above a histogram of raw rewards."""
    r = np.asarray(rewards, dtype=float)
    with plt.rc_context(STYLE):
        fig, (top, bottom) = plt.subplots(2, 1, figsize=(5.0, 5.0), sharex=True)
        lo, hi = min(r.min(), -1.0) - 0.5, max(r.max(), 1.0) + 0.5
        xs = np.linspace(lo, hi, 400)
        top.plot(xs, apply_sigmoid(xs, 1.0), color="tab:blue", label="T=1.0")
        top.plot(xs, apply_sigmoid(xs, result.tau), color="tab:red", label=f"T={result.tau:.2f}")
        top.set_ylabel("calibrated score")
        top.set_ylim(0, 1)
        top.legend(frameon=False)
        bottom.hist(r, bins=30, color="0.6")
        bottom.set_xlabel("raw reward")
        bottom.set_ylabel("count")
        if title:
            top.set_title(title)
        fig.savefig(path)
        plt.close(fig)


def history_figure(history, path):
    """Loss terms and reward mean +/- std per optimizer step."""
    steps = history.column("step")
    with plt.rc_context(STYLE):
        fig, (left, right) = plt.subplots(1, 2, figsize=(8.0, 3.0))
        left.plot(steps, history.column("bt"), label="ranking")
        left.plot(steps, history.column("reg"), label="regularizer")
        left.set_yscale("symlog", linthresh=1e-3)
        left.set_xlabel("step")
        left.set_ylabel("loss")
        left.legend(frameon=False)
        mean, std = history.column("reward_mean"), history.column("reward_std")
        right.plot(steps, mean, color="tab:red")
        right.fill_between(steps, mean - std, mean + std, color="tab:red", alpha=0.2)
        right.set_xlabel("step")
        right.set_ylabel("reward mean +/- std")
        fig.savefig(path)
        plt.close(fig)


def system_scores_figure(metric, human, systems, path, title=None):
    """Scatter of per-system metric means against human means."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.5))
        ax.scatter(human, metric, color="tab:blue")
        for name, x, y in zip(systems, human, metric):
            ax.annotate(str(name), (x, y), fontsize=7, xytext=(3, 3), textcoords="offset points")
        ax.set_xlabel("human (system mean)")
        ax.set_ylabel("metric (system mean)")
        if title:
            ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)

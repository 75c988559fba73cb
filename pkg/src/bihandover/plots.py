"""Figure rendering for evaluation reports and generated trajectories."""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .demos import PHASES


def render_eval_figures(report, out_prefix):
    """Render comparison figures next to the report file; returns the list
    of written paths."""
    paths = []
    by_ctrl = {}
    for t in report.trials:
        by_ctrl.setdefault(t.controller, []).append(t)
    controllers = sorted(by_ctrl)

    for metric, label in (("rmse", "giver-trajectory RMSE [m]"),
                          ("mean_abs_jerk", "mean |jerk| [m/s^3]"),
                          ("max_grip_deviation", "max grip-width deviation [m]")):
        fig, ax = plt.subplots(figsize=(7, 4))
        width = 0.8 / len(controllers)
        for k, ctrl in enumerate(controllers):
            ts = by_ctrl[ctrl]
            x = np.arange(len(ts))
            ax.bar(x + k * width, [getattr(t, metric) for t in ts],
                   width=width, label=ctrl)
        ax.set_xlabel("held-out trial")
        ax.set_ylabel(label)
        ax.legend()
        fig.tight_layout()
        path = f"{out_prefix}_{metric}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def render_generation_figure(replay, demo, path):
    """Plot generated vs ground-truth giver hand tracks and the phase
    estimate over time."""
    t = demo.t
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for gen, truth, name in ((replay.left, demo.giver_left, "left"),
                             (replay.right, demo.giver_right, "right")):
        for j, ax_name in enumerate("xyz"):
            axes[0].plot(t, gen[:, j], lw=1.2,
                         label=f"{name} {ax_name} (generated)")
            axes[0].plot(t, truth[:, j], lw=0.8, ls="--", alpha=0.6)
    axes[0].set_ylabel("giver hand position [m]")
    axes[0].legend(fontsize=6, ncol=3)

    axes[1].step(t, replay.phases, where="post")
    axes[1].set_yticks(range(len(PHASES)), PHASES)
    axes[1].set_ylabel("estimated phase")
    axes[1].set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path

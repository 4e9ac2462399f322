"""Figure rendering for sweep, identification and closed-loop reports.

All figures are written straight to files (Agg backend); the CSV artifacts
stay the primary record and each figure is a companion view of one of them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")  # file output only; must precede pyplot import

import matplotlib.pyplot as plt
import numpy as np

from .closedloop import ClosedLoopRecord
from .mpc import MpcSettings

FIGURE_DPI = 150


def save_figure(fig, path) -> None:
    fig.savefig(path, dpi=FIGURE_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_sweep(table: np.ndarray):
    """Steady-state compositions against reactor temperature."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    temps = table[:, 0]
    for idx, (label, style) in enumerate((("$C_A$", "-"), ("$C_R$", "-"), ("$C_S$", "--"))):
        ax.plot(temps, table[:, idx + 1], style, label=label, linewidth=1.5)
    peak = temps[int(np.argmax(table[:, 2]))]
    ax.axvline(peak, color="gray", linestyle=":", alpha=0.7, label=f"$C_R$ peak (T={peak:.3f})")
    ax.set_xlabel("Temperature (dimensionless)")
    ax.set_ylabel("Steady-state concentration")
    ax.legend(loc="center left")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def plot_closed_loop(record: ClosedLoopRecord, settings: MpcSettings, title: str | None = None):
    """Outputs and inputs of one run, with set-point and bound guides."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
    t = record.times
    warm_end = record.times[record.warmup_steps]

    ax = axes[0]
    ax.plot(t, record.outputs[:, 0], label="$C_A$", linewidth=1.5)
    ax.plot(t, record.outputs[:, 1], label="$C_R$", linewidth=1.5)
    ax.axhline(settings.setpoint[0], color="C0", linestyle=":", alpha=0.7)
    ax.axhline(settings.setpoint[1], color="C1", linestyle=":", alpha=0.7)
    ax.axvline(warm_end, color="gray", linestyle=":", alpha=0.5)
    ax.set_ylabel("Concentration")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)

    ax = axes[1]
    ax.plot(t, record.inputs[:, 0], color="C2", linewidth=1.5)
    ax.axhline(settings.u_min[0], color="gray", linestyle="--", alpha=0.5)
    ax.axhline(settings.u_max[0], color="gray", linestyle="--", alpha=0.5)
    ax.axvline(warm_end, color="gray", linestyle=":", alpha=0.5)
    ax.set_ylabel("Flow rate $q$")
    ax.grid(True, alpha=0.3)

    ax = axes[2]
    ax.plot(t, record.inputs[:, 1], color="C3", linewidth=1.5)
    ax.axhline(settings.u_min[1], color="gray", linestyle="--", alpha=0.5)
    ax.axhline(settings.u_max[1], color="gray", linestyle="--", alpha=0.5)
    ax.axvline(warm_end, color="gray", linestyle=":", alpha=0.5)
    ax.set_ylabel("Temperature $T$")
    ax.set_xlabel("Time")
    ax.grid(True, alpha=0.3)

    fig.tight_layout()
    return fig


def plot_closed_loop_comparison(
    benchmark: ClosedLoopRecord, rnn: ClosedLoopRecord, settings: MpcSettings, title: str | None = None
):
    """Benchmark and network-driven runs of one scenario, overlaid."""
    fig, axes = plt.subplots(2, 1, figsize=(8, 6.5), sharex=True)
    t = benchmark.times

    ax = axes[0]
    ax.plot(t, benchmark.outputs[:, 1], "-", color="C0", label="benchmark $C_R$", linewidth=1.5)
    ax.plot(rnn.times, rnn.outputs[:, 1], "--", color="C1", label="network MPC $C_R$", linewidth=1.5)
    ax.plot(t, benchmark.outputs[:, 0], "-", color="C2", alpha=0.7, label="benchmark $C_A$", linewidth=1.2)
    ax.plot(rnn.times, rnn.outputs[:, 0], "--", color="C3", alpha=0.7, label="network MPC $C_A$", linewidth=1.2)
    ax.axhline(settings.setpoint[1], color="gray", linestyle=":", alpha=0.7)
    ax.axhline(settings.setpoint[0], color="gray", linestyle=":", alpha=0.7)
    ax.set_ylabel("Concentration")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)

    ax = axes[1]
    ax.plot(t, benchmark.inputs[:, 1], "-", color="C0", label="benchmark $T$", linewidth=1.5)
    ax.plot(rnn.times, rnn.inputs[:, 1], "--", color="C1", label="network MPC $T$", linewidth=1.5)
    ax.axhline(settings.u_max[1], color="gray", linestyle="--", alpha=0.5)
    ax.axhline(settings.u_min[1], color="gray", linestyle="--", alpha=0.5)
    ax.set_ylabel("Temperature $T$")
    ax.set_xlabel("Time")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)

    fig.tight_layout()
    return fig


def plot_prediction_fit(targets: np.ndarray, predictions: np.ndarray, title: str | None = None):
    """Horizon-ahead predictions against true outputs over the window index."""
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    idx = np.arange(len(targets))
    for ch, (ax, label) in enumerate(zip(axes, ("$C_A$", "$C_R$"))):
        ax.plot(idx, targets[:, ch], "-", color="C0", label="plant", linewidth=1.2)
        ax.plot(idx, predictions[:, ch], "--", color="C1", label="model", linewidth=1.2)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best", fontsize=8)
    axes[0].set_title(title or "Horizon-ahead prediction on held-out data")
    axes[1].set_xlabel("Window index")
    fig.tight_layout()
    return fig


def plot_trajectory(traj, title: str | None = None):
    """Inputs and outputs of one excitation run."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 7.5), sharex=True)
    t = traj.times
    axes[0].plot(t, traj.outputs[:, 0], label="$C_A$", linewidth=1.2)
    axes[0].plot(t, traj.outputs[:, 1], label="$C_R$", linewidth=1.2)
    axes[0].set_ylabel("Concentration")
    axes[0].legend(loc="best")
    axes[0].grid(True, alpha=0.3)
    if title:
        axes[0].set_title(title)
    axes[1].plot(t, traj.inputs[:, 1], color="C3", linewidth=1.2)
    axes[1].set_ylabel("Temperature $T$")
    axes[1].grid(True, alpha=0.3)
    axes[2].plot(t, traj.inputs[:, 0], color="C2", linewidth=1.2)
    axes[2].set_ylabel("Flow rate $q$")
    axes[2].set_xlabel("Time")
    axes[2].grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def plot_training_history(history, title: str | None = None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(1, len(history) + 1), history, linewidth=1.5)
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Training MAE (normalized)")
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig

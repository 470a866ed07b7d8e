"""Report figures written straight to image files (Agg backend, no display)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .device import DeviceProfile, TimingModel, current_trace, shunt_voltage_mv  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 3.6),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_memory(untiled, tiled, path, budget_bytes: int | None = None):
    """Live activation kB per execution step, monolithic against tiled."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for report, name in ((untiled, "untiled"), (tiled, f"tiled ({tiled.n_slices} slices)")):
            kb = np.array([s.live_bytes for s in report.steps]) / 1000.0
            x = np.linspace(0.0, 1.0, len(kb))
            ax.step(x, kb, where="post", label=f"{name}: peak {report.peak_bytes / 1000:.1f} kB")
        if budget_bytes is not None:
            ax.axhline(budget_bytes / 1000.0, color="k", ls="--", lw=0.8, label=f"budget {budget_bytes / 1000:.1f} kB")
        ax.set_xlabel("execution progress")
        ax.set_ylabel("live activations (kB)")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_shunt_trace(profile: DeviceProfile, timing: TimingModel, path, n_cycles: int = 3):
    """Shunt voltage of the stock and the analysing recorder over a few windows."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for smart, name in ((False, "stock recorder"), (True, "with on-device inference")):
            t, i = current_trace(profile, timing, n_cycles, smart=smart)
            mv = shunt_voltage_mv(i, profile.shunt_ohms)
            ax.stairs(mv, t, label=name, baseline=None)
        ax.set_xlabel("time (ms)")
        ax.set_ylabel(f"shunt voltage (mV, {profile.shunt_ohms} ohm)")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_window_classes(records, class_labels, path, triggers=()):
    """Argmax class of every window against time, with trigger markers."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if records:
            t = np.array([r.t_start_ms for r in records]) / 1000.0
            y = np.array([class_labels.index(r.label) for r in records])
            ax.plot(t, y, ".", ms=3)
        for trig in triggers:
            ax.axvline(trig.time_ms / 1000.0, color="r", lw=1)
        ax.set_yticks(range(len(class_labels)), class_labels)
        ax.set_xlabel("time (s)")
        _save(fig, path)

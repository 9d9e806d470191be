"""Figure rendering. Uses the object-oriented matplotlib API, so no global
backend state is touched; SVG output carries no timestamp."""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure


def _save(fig: Figure, path) -> None:
    path = Path(path)
    if path.suffix == ".svg":
        with matplotlib.rc_context({"svg.hashsalt": "jrcsim"}):
            fig.savefig(path, metadata={"Date": None})
    else:
        fig.savefig(path)


def plot_curves(curves, path, kind: str = "ser") -> None:
    """Overlay of SER (log y, with the 2FSK reference) or Pd curves."""
    fig = Figure(figsize=(6, 4.5), layout="constrained")
    ax = fig.add_subplot()
    for c in curves:
        y = c.y
        if kind == "ser":
            y = np.where(y > 0, y, np.nan)
        ax.plot(c.x, y, marker="o", ms=4, label=c.label)
    if kind == "ser":
        from .experiments import fsk2_coherent_ser

        lo = min(c.x.min() for c in curves)
        hi = max(c.x.max() for c in curves)
        xs = np.linspace(lo, hi, 200)
        ax.plot(xs, fsk2_coherent_ser(10 ** (xs / 10)), "k--", lw=1, label="2FSK coherent")
        ax.set_yscale("log")
        ax.set_xlabel("r_b (dB)")
        ax.set_ylabel("SER")
    else:
        ax.set_xlabel("d (dB)")
        ax.set_ylabel("P_d")
        ax.set_ylim(0, 1.02)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_matched_outputs(delays, r1, r2, t0, T_s, N, path) -> None:
    """Both matched-filter magnitudes with the symbol sampling instants."""
    fig = Figure(figsize=(8, 4), layout="constrained")
    ax = fig.add_subplot()
    ax.plot(delays, np.abs(r1), lw=0.8, label="|r1|")
    ax.plot(delays, np.abs(r2), lw=0.8, label="|r2|")
    inst = t0 + T_s * np.arange(N)
    ax.vlines(inst, 0, max(np.abs(r1).max(), np.abs(r2).max()), colors="k", lw=0.4, alpha=0.4)
    ax.set_xlabel("delay (chips)")
    ax.set_ylabel("magnitude")
    ax.legend()
    _save(fig, path)


def plot_radar_stages(delays_R, R, delays_R2, R2, delays_rf, r_f2, path) -> None:
    """Correlation with the summed pair, the phase-code autocorrelation and
    the final radar output."""
    fig = Figure(figsize=(8, 7), layout="constrained")
    axes = fig.subplots(3, 1)
    for ax, (d, v, name) in zip(
        axes,
        [(delays_R, R, "|R|"), (delays_R2, R2, "|R_2|"), (delays_rf, r_f2, "|r_f2|")],
    ):
        ax.plot(d, np.abs(v), lw=0.8)
        ax.set_ylabel(name)
    axes[-1].set_xlabel("delay (chips)")
    _save(fig, path)


def plot_invariance(delays, mags, path) -> None:
    """Radar output magnitudes (dB re. peak) for several bit vectors."""
    fig = Figure(figsize=(8, 4), layout="constrained")
    ax = fig.add_subplot()
    ref = mags.max()
    with np.errstate(divide="ignore"):
        for row in mags:
            ax.plot(delays, 20 * np.log10(row / ref), lw=0.6)
    ax.set_ylim(-60, 2)
    ax.set_xlabel("delay (chips)")
    ax.set_ylabel("|r_f2| (dB)")
    _save(fig, path)

"""Figure rendering for run outputs: every report path can drop PNGs next to
its CSV files."""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .scaling import collapse_transform

_MARKERS = ["o", "s", "^", "v", "D", "p", "*"]


def plot_curves(curves, out_path, title=None):
    """One panel per indicator, mean +- stderr vs W, one line per size."""
    indicators = sorted({c.indicator for c in curves})
    if not indicators:
        raise ValueError("no curves to plot")
    fig, axes = plt.subplots(
        1, len(indicators), figsize=(4.2 * len(indicators), 3.4), squeeze=False
    )
    for ax, indicator in zip(axes[0], indicators):
        for k, curve in enumerate(sorted(
                (c for c in curves if c.indicator == indicator),
                key=lambda c: c.length)):
            ax.errorbar(
                curve.w, curve.mean, yerr=curve.stderr,
                marker=_MARKERS[k % len(_MARKERS)], ms=4, lw=1,
                label=f"L = {curve.length}",
            )
        ax.set_xlabel("W")
        ax.set_ylabel(indicator)
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_profiles(profiles_csv, out_path):
    """Semi-log pair-entanglement decay vs distance, per (L, W, measure)."""
    groups = defaultdict(list)
    with open(profiles_csv, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if not row or not row[3].isdigit():
                continue
            groups[(int(row[0]), float(row[1]), row[2])].append(
                (int(row[3]), float(row[4]))
            )
    if not groups:
        raise ValueError(f"no profile rows in {profiles_csv}")
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    for k, (key, pts) in enumerate(sorted(groups.items())):
        pts.sort()
        d = np.array([p[0] for p in pts])
        m = np.array([p[1] for p in pts])
        good = m > 0
        ax.semilogy(
            d[good], m[good], marker=_MARKERS[k % len(_MARKERS)], ms=4, lw=1,
            label=f"L={key[0]} W={key[1]:g} {key[2][:4]}",
        )
    ax.set_xlabel("distance")
    ax.set_ylabel("mean pair entanglement")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_collapse(deriv_curves, params, out_path, ylabel="scaled derivative"):
    """Scaled overlay of per-size derivative curves for given parameters."""
    transformed = collapse_transform(deriv_curves, params)
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    for k, (length, (x, y)) in enumerate(sorted(transformed.items())):
        ax.plot(x, y, marker=_MARKERS[k % len(_MARKERS)], ms=4, lw=1,
                label=f"L = {length}")
    ax.set_xlabel(
        f"$L^{{{params.exponent_b:g}}} (W - {params.w_c:g})$"
    )
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_ge_histograms(samples, labels, out_path, bins=40):
    """Overlaid geometric-entanglement histograms (density-normalized)."""
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    for values, label in zip(samples, labels):
        ax.hist(values, bins=bins, density=True, alpha=0.55, label=label)
    ax.set_xlabel("geometric entanglement")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path

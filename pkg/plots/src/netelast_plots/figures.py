"""The five figure kinds.

Each builder consumes validated rows from one harness CSV and draws
onto a fresh figure; ``render`` ties intake, drawing and the PNG save
together.  Rendering is headless (Agg) so runs work over ssh and in CI.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import PlotDataError
from .io import column, read_table


def _group(rows, key):
    out: dict[str, list] = {}
    for row in rows:
        out.setdefault(row[key], []).append(row)
    return out


def _convergence(rows, ax):
    eps = np.array(column(rows, "eps"))
    order = np.argsort(eps)[::-1]
    eps = eps[order]
    for name, label in (
        ("l2_space_time_diff", "space-time L2"),
        ("l2_final_time_diff", "final-time L2"),
    ):
        ax.loglog(eps, np.array(column(rows, name))[order], "o-", label=label)
    gaps = np.array(column(rows, "l2_space_time_diff"))[order]
    if gaps[0] > 0:
        ax.loglog(eps, gaps[0] * eps / eps[0], "k:", lw=1, label="slope 1 guide")
    ax.set_xlabel("lattice spacing eps")
    ax.set_ylabel("L2 gap to the limit system")
    ax.invert_xaxis()
    ax.legend()
    ax.set_title("lattice to continuum convergence")


def _tensor_error(rows, ax):
    for (npqr, gamma), entries in sorted(
        _group_pairs(rows, "npqr", "gamma").items()
    ):
        ratio = np.array(
            [float(r["h"]) / float(r["eps"]) for r in entries]
        )
        err = np.array([float(r["rel_error"]) for r in entries])
        order = np.argsort(ratio)
        ax.loglog(
            ratio[order], err[order], "o-", label=f"a{npqr}, gamma={gamma}"
        )
    ax.set_xlabel("cube to spacing ratio h/eps")
    ax.set_ylabel("relative error vs closed form")
    ax.legend(fontsize=8)
    ax.set_title("effective tensor extraction error")


def _group_pairs(rows, key_a, key_b):
    out: dict[tuple, list] = {}
    for row in rows:
        out.setdefault((row[key_a], row[key_b]), []).append(row)
    return out


def _energy(rows, ax):
    time = column(rows, "time")
    total = np.array(column(rows, "total_energy"))
    conserved = np.array(column(rows, "conserved_energy"))
    ax.plot(time, total, label="physical energy")
    ax.plot(time, conserved, label="step-compensated energy")
    scale = max(abs(conserved[0]), 1e-300)
    drift = (conserved.max() - conserved.min()) / scale
    ax.set_xlabel("time")
    ax.set_ylabel("energy")
    ax.legend()
    ax.set_title(f"energy traces (compensated drift {drift:.2e})")


def _kernel(rows, ax):
    for name, entries in sorted(_group(rows, "test").items()):
        eps = np.array([float(r["eps"]) for r in entries])
        gap = np.array([float(r["gap"]) for r in entries])
        order = np.argsort(eps)[::-1]
        ax.loglog(eps[order], gap[order], "o-", label=name)
    ax.set_xlabel("lattice spacing eps")
    ax.set_ylabel("pairing gap to the limit")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    ax.set_title("weak convergence of the empirical kernels")


def _snapshot_slice(rows, ax):
    times = np.array(column(rows, "t"))
    last = times.max()
    picked = [r for r, t in zip(rows, times) if t == last]
    z = np.array([float(r["z"]) for r in picked])
    plane = z[np.argmin(np.abs(z - np.median(z)))]
    sliced = [r for r, zz in zip(picked, z) if zz == plane]
    x = np.array([float(r["x"]) for r in sliced])
    y = np.array([float(r["y"]) for r in sliced])
    ux = np.array([float(r["ux"]) for r in sliced])
    uy = np.array([float(r["uy"]) for r in sliced])
    uz = np.array([float(r["uz"]) for r in sliced])
    mag = np.sqrt(ux**2 + uy**2 + uz**2)
    q = ax.quiver(x, y, ux, uy, mag, angles="xy", cmap="viridis")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    plt.colorbar(q, ax=ax, label="|u|")
    ax.set_title(f"displacement slice at t={last:g}, z={plane:g}")


FIGURES = {
    "convergence": (
        ("eps", "l2_space_time_diff", "l2_final_time_diff"),
        _convergence,
    ),
    "tensor-error": (
        ("eps", "h", "gamma", "npqr", "rel_error"),
        _tensor_error,
    ),
    "energy": (("time", "total_energy", "conserved_energy"), _energy),
    "kernel": (("test", "eps", "gap"), _kernel),
    "snapshot-slice": (("t", "x", "y", "z", "ux", "uy", "uz"), _snapshot_slice),
}


def render(kind: str, csv_path, out_path, dpi: int = 150) -> Path:
    """Read one CSV, draw the requested figure kind, save a PNG.

    Validation runs before any drawing, so a bad input never leaves a
    file behind.
    """
    try:
        required, builder = FIGURES[kind]
    except KeyError:
        raise PlotDataError(
            f"unknown figure kind {kind!r}; expected one of {sorted(FIGURES)}"
        ) from None
    rows = read_table(csv_path, required)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        builder(rows, ax)
        fig.tight_layout()
        out = Path(out_path)
        fig.savefig(out, dpi=dpi)
    finally:
        plt.close(fig)
    return out

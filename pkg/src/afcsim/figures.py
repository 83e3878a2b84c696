"""Optional PNG figures written next to the CSV outputs.

Uses the object-oriented matplotlib API (no pyplot), so nothing here touches
global figure state or needs a display.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

from .analytic import efficiency

DPI = 110
_META = {"Software": None}  # keep files byte-stable across matplotlib versions


def _save(fig: Figure, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata=_META)


def plot_pit(before, after, path, check=None) -> None:
    fig = Figure(figsize=(7, 3.5))
    ax = fig.add_subplot()
    ax.plot(before.nu, before.d, color="0.6", lw=1, label="before")
    ax.plot(after.nu, after.d, color="C0", lw=1, label="after")
    if check is not None:
        ax.axvspan(*check, color="C2", alpha=0.12, lw=0)
    ax.set_xlabel("detuning (MHz)")
    ax.set_ylabel("optical depth")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_comb(strong, fit, path, weak=None) -> None:
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    ax.plot(strong.nu, strong.d, color="C0", lw=1, label="inferred")
    if weak is not None:
        ax.plot(strong.nu, weak.d, color="C1", lw=1, label="readout scan")
    if fit is not None:
        for p in fit.peaks:
            ax.plot(p.center, p.amplitude + p.baseline, "k+")
        q = fit.params
        ax.set_title(f"d = {q.d:.2f}, gamma = {q.gamma:.0f} kHz, F = {q.finesse:.2f}",
                     fontsize=9)
    ax.set_xlabel("detuning (MHz)")
    ax.set_ylabel("optical depth")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_echo(reference, output, path, windows=()) -> None:
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    ax.plot(reference.t, reference.intensity, color="0.6", lw=1, label="reference")
    ax.plot(output.t, output.intensity, color="C0", lw=1, label="through comb")
    for k, w in enumerate(windows):
        ax.axvspan(*w, color=f"C{k + 2}", alpha=0.1, lw=0)
    ax.set_yscale("log")
    ax.set_ylim(1e-5, 1.5)
    ax.set_xlim(0, max(4.0, windows[-1][1] + 1.0) if windows else 4.0)
    ax.set_xlabel("time (us)")
    ax.set_ylabel("intensity")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_sweep(columns, rows, theory_finesse, path, title="") -> None:
    col = {c: i for i, c in enumerate(columns)}
    data = np.array([[float(r[i]) for i in range(len(columns) - 1)] for r in rows])
    ok = np.isfinite(data[:, col["d"]])
    d = data[ok, col["d"]]
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    ax.plot(d, data[ok, col["eta_meas"]], "o", color="k", label="simulated")
    dd = np.linspace(0, max(d.max(), 1.0) * 1.1, 200)
    for k, f in enumerate(theory_finesse):
        ax.plot(dd, efficiency(dd / f, f), color=f"C{k}", lw=1, label=f"F = {f:g}")
    ax.set_xlabel("optical depth d")
    ax.set_ylabel("efficiency")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(frameon=False)
    _save(fig, path)


def plot_theory(rows, path) -> None:
    fig = Figure(figsize=(6, 3.5))
    ax = fig.add_subplot()
    for k, f in enumerate(sorted({r[0] for r in rows})):
        sel = [r for r in rows if r[0] == f]
        ax.plot([r[1] for r in sel], [r[4] for r in sel], color=f"C{k}", lw=1, label=f"F = {f:g}")
    ax.set_xlabel("optical depth d")
    ax.set_ylabel("efficiency")
    ax.legend(frameon=False)
    _save(fig, path)

"""PNG figures written next to the CSV tables.

matplotlib is imported lazily so the numerical library never depends on it.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["plot_correlator", "plot_stability", "plot_mi", "plot_meanfield", "plot_fig3"]

# fixed metadata keeps reruns byte-stable
_META = {"Software": None}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_META)
    _pyplot().close(fig)
    return path


def plot_correlator(path, eta, values, label="exact", extra=None) -> Path:
    """``Re C`` against ``eta``; ``extra`` is an optional ``(label, values)`` overlay."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(eta, np.real(values), lw=1.2, label=label)
    if extra is not None:
        ax.plot(eta, np.real(extra[1]), lw=1.0, ls="--", label=extra[0])
    ax.set_xlabel(r"$\eta = fN\Gamma\tau$")
    ax.set_ylabel(r"Re $C(\tau)$")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def plot_stability(path, rows) -> Path:
    """``|omega|/B`` against ``g/f`` per ``N`` with both reference contours."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ns = sorted({r.n_spins for r in rows})
    for n in ns:
        sel = [r for r in rows if r.n_spins == n and np.isfinite(r.ratio)]
        if not sel:
            continue
        line, = ax.plot([r.g_over_f for r in sel], [r.ratio for r in sel], "o-", ms=3,
                        label=f"N = {n}")
        ax.axvline(sel[0].freq_contour, color=line.get_color(), ls=":", lw=0.8)
        if np.isfinite(sel[0].mi_contour):
            ax.axvline(sel[0].mi_contour, color=line.get_color(), ls="--", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("g / f")
    ax.set_ylabel(r"$|\omega| / B$")
    ax.set_title("dotted: frequency contour, dashed: information contour", fontsize=8)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_mi(path, rows) -> Path:
    """``I'(eta)`` against ``g/f`` per ``N``, with the large-N law dashed."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for n in sorted({r[0] for r in rows}):
        sel = [r for r in rows if r[0] == n]
        line, = ax.plot([r[1] for r in sel], [r[2] for r in sel], "o-", ms=3, label=f"N = {n}")
        ax.plot([r[1] for r in sel], [r[4] for r in sel], ls="--", color=line.get_color(), lw=0.8)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("g / f")
    ax.set_ylabel(r"$dI_{AB}/d\tau$ / $f\Gamma$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_meanfield(path, w_over_f, z, omega) -> Path:
    plt = _pyplot()
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.5))
    a1.plot(w_over_f, z, "o-", ms=3)
    a1.axhline(1 / np.sqrt(8), color="k", ls=":", lw=0.8)
    a1.set_xlabel(r"$W / f\Gamma$")
    a1.set_ylabel("Z")
    a2.plot(w_over_f, omega, "o-", ms=3)
    a2.set_xlabel(r"$W / f\Gamma$")
    a2.set_ylabel(r"$\omega_{MF} / f\Gamma$")
    fig.tight_layout()
    return _save(fig, path)


def plot_fig3(path, cells) -> Path:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
    for gf in sorted({c.g_over_f for c in cells}):
        sel = sorted((c for c in cells if c.g_over_f == gf), key=lambda c: c.delta_over_f)
        x = [c.delta_over_f for c in sel]
        axes[0].plot(x, [c.mean_sqrt_c0 for c in sel], "o-", ms=3, label=f"g/f = {gf:g}")
        axes[1].plot(x, [c.delta_omega for c in sel], "o-", ms=3)
        axes[2].plot(x, [c.delta_b for c in sel], "o-", ms=3)
    for ax, lab in zip(axes, (r"$\sqrt{C(0)}$", r"$\delta\omega$", r"$\delta B$")):
        ax.set_xlabel(r"$\Delta / f\Gamma$")
        ax.set_ylabel(lab)
    axes[0].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)

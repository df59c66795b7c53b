"""Figure rendering for the report paths: every figure goes to a file."""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "figure.figsize": (7.0, 4.3),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
})


def save_eigenfunction(crit, bg, path: Path):
    fig, (ax1, ax2) = plt.subplots(1, 2)
    for side, lo, hi, style in (("-", -1.0, bg.p_hat, "-"), ("+", bg.p_hat, 0.0, "-")):
        p = np.linspace(lo, hi, 200)
        ax1.plot(crit.phi0(p, side), p, style, color="C0")
        ax2.plot(crit.dphi0(p, side), p, style, color="C1")
    ax1.axhline(bg.p_hat, color="k", lw=0.6, ls=":")
    ax2.axhline(bg.p_hat, color="k", lw=0.6, ls=":")
    ax1.set_xlabel(r"$\Phi_0(p)$")
    ax2.set_xlabel(r"$\Phi_0'(p)$")
    ax1.set_ylabel("p")
    fig.suptitle(f"principal eigenfunction, F_cr = {crit.F_cr:.8f}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_seed_profile(q, v, path: Path, title="sech^2 interface seed"):
    fig, ax = plt.subplots()
    ax.plot(q, v, color="C0")
    ax.set_xlabel("q")
    ax.set_ylabel("v(q)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_field(field, bg, path: Path, title=""):
    g = field.grid
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.0, 5.6), sharex=True)
    surface = field.w_up[:, -1] + float(bg.H(0.0, "+")) - 1.0
    interface = field.w_up[:, 0] + float(bg.H(bg.p_hat, "+")) - 1.0
    ax1.plot(g.q, surface, color="C0", label="free surface")
    ax1.plot(g.q, interface, color="C3", label="internal interface")
    ax1.set_ylabel("y")
    ax1.legend(loc="best")
    ax1.set_title(title or f"F = {field.F:.6f}, v0 = {field.v0:.5f}")

    # contour of w over both layers (interface row duplicated)
    P = np.concatenate([g.p_lo, g.p_up])
    W = np.concatenate([field.w_lo, field.w_up], axis=1)
    cs = ax2.contourf(g.q, P, W.T, levels=21, cmap="viridis")
    fig.colorbar(cs, ax=ax2, label="w(q, p)")
    ax2.axhline(g.p_hat, color="w", lw=0.6, ls=":")
    ax2.set_xlabel("q")
    ax2.set_ylabel("p")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_branch(rows, path: Path):
    """rows: list of dicts with keys s, F, v0, min_hp, sup_hp, N."""
    s = np.array([r["s"] for r in rows])
    fig, axes = plt.subplots(2, 2, figsize=(8.4, 5.6))
    axes[0, 0].plot([r["v0"] for r in rows], [r["F"] for r in rows], ".-", ms=3)
    axes[0, 0].set_xlabel("v0")
    axes[0, 0].set_ylabel("F")
    axes[0, 1].semilogy(s, [r["N"] for r in rows], ".-", ms=3)
    axes[0, 1].set_xlabel("s")
    axes[0, 1].set_ylabel("N(s)")
    axes[1, 0].plot(s, [r["min_hp"] for r in rows], ".-", ms=3, label="min h_p")
    axes[1, 0].plot(s, [r["sup_hp"] for r in rows], ".-", ms=3, label="sup h_p")
    axes[1, 0].set_yscale("log")
    axes[1, 0].set_xlabel("s")
    axes[1, 0].legend()
    axes[1, 1].plot(s, [r["stagnation_metric"] for r in rows], ".-", ms=3)
    axes[1, 1].set_xlabel("s")
    axes[1, 1].set_ylabel("min (c - u)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_wave(wave, path: Path):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.0, 5.6), sharex=True)
    ax1.plot(wave.x, wave.eta, color="C0", label="free surface")
    ax1.plot(wave.x, wave.zeta, color="C3", label="internal interface")
    ax1.fill_between(wave.x, wave.zeta, wave.eta, color="C0", alpha=0.12)
    ax1.fill_between(wave.x, np.min(wave.y_lo), wave.zeta, color="C3", alpha=0.12)
    ax1.set_ylabel("y")
    ax1.legend(loc="best")
    for j in range(0, wave.y_lo.shape[1], max(1, wave.y_lo.shape[1] // 8)):
        ax2.plot(wave.x, wave.y_lo[:, j], color="C3", lw=0.5)
    for j in range(0, wave.y_up.shape[1], max(1, wave.y_up.shape[1] // 8)):
        ax2.plot(wave.x, wave.y_up[:, j], color="C0", lw=0.5)
    ax2.set_xlabel("x")
    ax2.set_ylabel("streamlines")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)

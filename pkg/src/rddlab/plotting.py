"""Figure rendering for the experiment report path.

Renders one PNG per run next to the delimited output. Figures are a
convenience view of the CSV; the CSV stays the contract.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _col(header, rows, name):
    i = header.index(name)
    return np.array([float(r[i]) if r[i] != "" else math.nan for r in rows])


def _finite(*arrays):
    mask = np.ones(arrays[0].size, dtype=bool)
    for a in arrays:
        mask &= np.isfinite(a)
    return mask


def render(experiment: str, header, rows, extras: dict, path) -> None:
    fn = {
        "pareto-z": _render_pareto,
        "pareto-j": _render_pareto,
        "detect-sim": _render_detect,
        "rcs": _render_rcs,
        "jpeg": _render_jpeg,
        "profile-report": _render_profile,
    }[experiment]
    fig = fn(header, rows, extras)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def _render_pareto(header, rows, extras):
    delta = _col(header, rows, "delta")
    omega = _col(header, rows, "omega")
    rate = _col(header, rows, "rate_bits")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for d in np.unique(delta):
        m = (delta == d) & _finite(rate)
        ax1.plot(omega[m], rate[m], marker=".", label=f"distortion {d:g}")
    ax1.set_xlabel("detectability floor")
    ax1.set_ylabel("rate [bits]")
    ax1.legend(fontsize=8)
    omegas = np.unique(omega)
    for w in omegas[:: max(1, len(omegas) // 5)]:
        m = (omega == w) & _finite(rate)
        ax2.plot(delta[m], rate[m], marker=".", label=f"floor {w:.3g}")
    ax2.set_xlabel("distortion budget")
    ax2.set_ylabel("rate [bits]")
    ax2.legend(fontsize=8)
    fig.suptitle("rate / distortion / detectability trade-off")
    return fig


def _render_detect(header, rows, extras):
    delta = _col(header, rows, "delta")
    rate = _col(header, rows, "rate_bits")
    fig, ax = plt.subplots(figsize=(6, 4))
    for d in np.unique(delta):
        for det, style in (("pdet_ld", "--"), ("pdet_npd", "-")):
            p = _col(header, rows, det)
            m = (delta == d) & _finite(rate, p)
            order = np.argsort(rate[m])
            ax.plot(rate[m][order], p[m][order], style, marker=".",
                    label=f"{det[5:].upper()} distortion {d:g}")
    ax.set_xlabel("rate [bits]")
    ax.set_ylabel("detection probability")
    ax.legend(fontsize=7)
    return fig


def _render_rcs(header, rows, extras):
    rate = _col(header, rows, "rate_bits")
    dist = _col(header, rows, "distortion")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, det in zip(axes, ("pdet_ld", "pdet_npd")):
        p = _col(header, rows, det)
        sc = ax.scatter(rate, p, c=dist, s=4, cmap="viridis")
        ax.set_xlabel("rate [bits]")
        ax.set_title(det[5:].upper())
    axes[0].set_ylabel("detection probability")
    fig.colorbar(sc, ax=axes, label="distortion")
    return fig


def _render_jpeg(header, rows, extras):
    rate = _col(header, rows, "rate_bits_per_image")
    p = _col(header, rows, "pdet")
    delta = _col(header, rows, "delta")
    omega = _col(header, rows, "omega")
    fig, ax = plt.subplots(figsize=(6, 4))
    m = _finite(rate, p)
    ax.scatter(rate[m], p[m], c="tab:blue")
    for r, pd, d, w in zip(rate[m], p[m], delta[m], omega[m]):
        ax.annotate(f"d={d:g}, w={w:g}", (r, pd), fontsize=7,
                    textcoords="offset points", xytext=(4, 4))
    ax.set_xlabel("entropy rate [bits/image]")
    ax.set_ylabel("block detection probability")
    return fig


def _render_profile(header, rows, extras):
    j = _col(header, rows, "j")
    lam_ok = _col(header, rows, "lambda_ok")
    lam_ko = _col(header, rows, "lambda_ko")
    rel_cols = [h for h in header if h.startswith("theta_rel_omega_")]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True)
    ax1.semilogy(j, lam_ok, marker=".", label="normal variances")
    ax1.semilogy(j, lam_ko, marker=".", label="anomalous variances")
    ax1.legend(fontsize=8)
    ax1.set_ylabel("variance")
    for name in rel_cols:
        ax2.plot(j, _col(header, rows, name), marker=".",
                 label=name.replace("theta_rel_omega_", "floor "))
    ax2.set_xlabel("component")
    ax2.set_ylabel("relative distortion")
    ax2.legend(fontsize=8)
    return fig

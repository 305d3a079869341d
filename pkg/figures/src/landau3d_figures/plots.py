"""Publication-style figures from landau3d artifacts.

Each function reads the documented artifact files, draws one figure, and
writes it to the requested image path (PNG or SVG, batch only).  All of
them return the annotation strings they drew so callers and tests can
check the reported numbers without parsing pixels.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import check_same_config, column, read_csv, read_json

OSC_TARGET_SLOPE = -2.0
STAT_TARGET_SLOPE = -3.0


def plot_decay(field_csv, rates_json, out_path):
    """Log-log field envelope with the fitted and target slopes.

    ``field_csv`` is a linear_field.csv (t, sup_abs_e, ...) artifact and
    ``rates_json`` the rates.json fitted from it; both must carry the same
    config hash.
    """
    data, header = read_csv(field_csv)
    rates = read_json(rates_json)
    check_same_config((field_csv, header), (rates_json, rates))
    t = column(data, header, "t", 0)
    sup = column(data, header, "sup_abs_e", 1)
    fit = rates.get("decay_fit") or {}
    if "slope" not in fit:
        raise ValueError(f"{rates_json}: no decay_fit slope to annotate")

    pos = (t > 0) & (sup > 0)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.loglog(t[pos], sup[pos], color="0.3", lw=0.9, label=r"$\sup_r|E(t)|$")

    lo, hi = fit.get("window") or (t[pos][0], t[pos][-1])
    tw = np.geomspace(max(lo, t[pos][0]), min(hi, t[pos][-1]), 50)
    fitted = np.exp(fit["intercept"]) * tw ** fit["slope"]
    label = f"fitted slope {fit['slope']:.2f}"
    ax.loglog(tw, fitted, "C1", lw=1.8, label=label)
    target = fitted[len(tw) // 2] * (tw / tw[len(tw) // 2]) ** OSC_TARGET_SLOPE
    target_label = f"target slope {OSC_TARGET_SLOPE:.0f}"
    ax.loglog(tw, target, "C0--", lw=1.2, label=target_label)

    ax.set_xlabel("t")
    ax.set_ylabel("field envelope")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return {"out": str(out_path), "annotations": [label, target_label]}


def plot_dispersion(dispersion_csv, out_path):
    """Damped-root loci over the mode grid, residual on a second axis.

    The CSV stores the branch with positive real part; its mirror
    (the complex conjugate pair reflected through the imaginary axis)
    completes the locus picture.
    """
    data, header = read_csv(dispersion_csv)
    k = column(data, header, "k", 0)
    re = column(data, header, "re_lambda", 1)
    im = column(data, header, "im_lambda", 2)
    residual = column(data, header, "residual", 3)

    style = dict(ls="-", marker="") if k.size > 1 else dict(ls="", marker="o")
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.set_xscale("log")
    ax.plot(k, re, color="C0", label=r"Re $\lambda_+$", **style)
    ax.plot(k, -re, color="C0", ls="--" if k.size > 1 else "",
            marker=style["marker"], label=r"Re $\lambda_-$")
    ax.plot(k, im, color="C2", label=r"Im $\lambda$", **style)
    ax.set_xlabel("k")
    ax.set_ylabel(r"root components")

    twin = ax.twinx()
    twin.set_yscale("log")
    twin.plot(k, np.maximum(residual, 1e-300), color="0.6", lw=0.8,
              marker="." if k.size == 1 else "",
              label="dispersion residual")
    twin.set_ylabel(r"$|1+K|$ at the root")

    lines = ax.get_lines() + twin.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], frameon=False,
              loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return {"out": str(out_path), "n_modes": int(k.size)}


def plot_decomposition(decomposition_csv, out_path):
    """Static and oscillatory component envelopes with target slopes."""
    data, header = read_csv(decomposition_csv)
    t = column(data, header, "t", 0)
    stat = column(data, header, "sup_e_stat", 1)
    osc = column(data, header, "sup_e_osc", 2)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    pos = t > 0
    ax.loglog(t[pos], np.maximum(stat[pos], 1e-300), "C0",
              label="static component")
    ax.loglog(t[pos], np.maximum(osc[pos], 1e-300), "C1",
              label="oscillatory component")
    tg = np.geomspace(t[pos][0], t[pos][-1], 30)
    for series, slope, color in ((stat, STAT_TARGET_SLOPE, "C0"),
                                 (osc, OSC_TARGET_SLOPE, "C1")):
        anchor = np.interp(tg[len(tg) // 2], t[pos], series[pos])
        ax.loglog(tg, anchor * (tg / tg[len(tg) // 2]) ** slope, color + "--",
                  lw=1.0, label=f"target slope {slope:.0f}")
    ax.set_xlabel("t")
    ax.set_ylabel("component envelope")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return {"out": str(out_path)}


def plot_picard_history(picard_log_json, out_path):
    """Fixed-point update size per pass, one trace per causal window."""
    log = read_json(picard_log_json)
    rows = log.get("iterations") or []
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    if rows:
        windows = sorted({r["window"] for r in rows})
        offset = 0
        for w in windows:
            deltas = [r["delta"] for r in rows if r["window"] == w]
            ax.semilogy(np.arange(offset, offset + len(deltas)), deltas,
                        marker=".", label=f"window {w}")
            offset += len(deltas)
        if len(windows) <= 10:
            ax.legend(frameon=False, fontsize=7)
    else:
        ax.text(0.5, 0.5, "no fixed-point iterations recorded",
                ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("pass")
    ax.set_ylabel("max field update")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return {"out": str(out_path), "n_passes": len(rows)}

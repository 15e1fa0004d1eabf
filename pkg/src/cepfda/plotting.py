"""Render plot tables written by :func:`cepfda.dataio.emit_plot_data` to PNG."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}


def _weight_functions(ax, header, rows):
    data = np.array(rows, dtype=float)
    half = data[:, 0] <= 0.5
    for q in range(1, data.shape[1]):
        ax.plot(data[half, 0], data[half, q], label=header[q])
    ax.axhline(0.0, color="0.6", lw=0.5)
    ax.set_xlabel("frequency (cycles per sample)")
    ax.set_ylabel("log-spectral weight")
    if data.shape[1] > 1:
        ax.legend(frameon=False)


def _scatter(ax, header, rows):
    pts = np.array([[float(r[2]), float(r[3]) if len(r) > 3 else 0.0] for r in rows])
    for r, (d1, d2) in zip(rows, pts):
        ax.text(d1, d2, str(r[1]), ha="center", va="center", fontsize=8)
    if len(pts):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = 0.05 * (hi - lo) + 1e-9
        ax.set_xlim(lo[0] - pad[0], hi[0] + pad[0])
        ax.set_ylim(lo[1] - pad[1], hi[1] + pad[1])
    ax.set_xlabel("first discriminant")
    ax.set_ylabel("second discriminant" if len(header) > 3 else "")


def _log_spectra(ax, header, rows):
    series = defaultdict(list)
    groups = {}
    for eid, g, lam, v in rows:
        series[eid].append((float(lam), float(v)))
        groups[eid] = g
    colours = {g: f"C{i}" for i, g in enumerate(dict.fromkeys(groups.values()))}
    seen = set()
    for eid, pts in series.items():
        pts = np.array(pts)
        g = groups[eid]
        ax.plot(pts[:, 0], pts[:, 1], color=colours[g], lw=0.6, alpha=0.6,
                label=None if g in seen else (g or "unlabelled"))
        seen.add(g)
    ax.set_xlabel("frequency (cycles per sample)")
    ax.set_ylabel("log-spectrum")
    ax.legend(frameon=False)


def _cv_curve(ax, header, rows):
    pts = [(int(L), float(e)) for L, e in rows if e != "NA"]
    if pts:
        L, e = zip(*pts)
        ax.plot(L, e, marker="o")
    ax.set_xlabel("number of cepstral coefficients L")
    ax.set_ylabel("leave-one-out misclassifications")


def _rates(ax, header, rows):
    names = [r[0] for r in rows]
    means = [float(r[1]) for r in rows]
    sds = [float(r[2]) for r in rows]
    ax.bar(range(len(names)), means, yerr=sds, color="0.7", capsize=3)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("percent correctly classified")
    ax.set_ylim(0, 100)


_DRAW = {
    "weight-functions": _weight_functions,
    "discriminant-scatter": _scatter,
    "log-spectra": _log_spectra,
    "cv-curve": _cv_curve,
    "rates": _rates,
}


def render(kind, header, rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        try:
            _DRAW[kind](ax, header, rows)
            fig.tight_layout()
            fig.savefig(path, dpi=120)
        finally:
            plt.close(fig)
    return path

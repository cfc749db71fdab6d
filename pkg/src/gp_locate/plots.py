"""Figure files for a sweep.  Needs matplotlib (the ``plot`` extra).

Every figure is drawn from the rows and aggregates that were also written to
CSV, so the images carry no information the CSVs lack.
"""

from pathlib import Path

import numpy as np

FIGURES = ("rmse_vs_sigma", "bars_and_coverage", "lpd_vs_sigma", "rmse_vs_bcrlb", "rmse_vs_M")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _series(aggregates, method, m, key):
    cells = sorted((a for a in aggregates if a["method"] == method and a["M"] == m),
                   key=lambda a: a["sigma_z2"])
    return (np.array([a["sigma_z2"] for a in cells]),
            np.array([a[f"{key}_mean"] for a in cells]),
            np.array([a[f"{key}_se"] for a in cells]))


def _curves(ax, aggregates, key, label):
    for method in sorted({a["method"] for a in aggregates}):
        for m in sorted({a["M"] for a in aggregates if a["method"] == method}):
            s, mean, se = _series(aggregates, method, m, key)
            ax.errorbar(s, mean, yerr=np.nan_to_num(se), marker="o", capsize=3,
                        label=f"{method}, M={m}")
    ax.set_xlabel("shadowing variance sigma_z^2 [dB]")
    ax.set_ylabel(label)
    ax.grid(alpha=0.3)
    ax.legend(fontsize="small")


def plot_all(rows, aggregates, out_dir):
    """Write the five figure families as PNG files and return their paths."""
    plt = _pyplot()
    out = Path(out_dir)
    paths = []

    def save(fig, name):
        path = out / f"{name}.png"
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        paths.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    _curves(ax, aggregates, "rmse_m", "RMSE [m]")
    save(fig, "rmse_vs_sigma")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for method in sorted({r.method for r in rows}):
        for m in sorted({r.num_rrh for r in rows if r.method == method}):
            sel = [r for r in rows if r.method == method and r.num_rrh == m]
            sig = sorted({r.sigma_z2 for r in sel})
            bars = [np.nanmean([0.5 * (r.mean_bar2_x + r.mean_bar2_y) for r in sel
                                if r.sigma_z2 == s]) for s in sig]
            ax1.plot(sig, bars, marker="o", label=f"{method}, M={m}")
    ax1.set_xlabel("shadowing variance sigma_z^2 [dB]")
    ax1.set_ylabel("mean 2-sigma half-width [m]")
    ax1.grid(alpha=0.3)
    ax1.legend(fontsize="small")
    _curves(ax2, aggregates, "coverage_2sigma", "fraction inside 2-sigma box")
    ax2.set_ylim(-0.02, 1.02)
    save(fig, "bars_and_coverage")

    fig, ax = plt.subplots(figsize=(6, 4))
    _curves(ax, aggregates, "lpd", "log predictive density")
    save(fig, "lpd_vs_sigma")

    fig, ax = plt.subplots(figsize=(6, 4))
    _curves(ax, aggregates, "rmse_m", "RMSE [m]")
    for m in sorted({a["M"] for a in aggregates}):
        s, bound, _ = _series(aggregates, "NaGP", m, "bcrlb_m")
        if s.size:
            ax.plot(s, bound, "k--", alpha=0.6, label=f"BCRLB, M={m}")
    ax.legend(fontsize="small")
    save(fig, "rmse_vs_bcrlb")

    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted({a["method"] for a in aggregates}):
        for s2 in sorted({a["sigma_z2"] for a in aggregates}):
            cells = sorted((a for a in aggregates
                            if a["method"] == method and a["sigma_z2"] == s2), key=lambda a: a["M"])
            if len(cells) > 1:
                ax.plot([a["M"] for a in cells], [a["rmse_m_mean"] for a in cells], marker="o",
                        label=f"{method}, sigma_z^2={s2:g}")
    ax.set_xlabel("number of RRHs M")
    ax.set_ylabel("RMSE [m]")
    ax.grid(alpha=0.3)
    if ax.lines:
        ax.legend(fontsize="x-small", ncol=2)
    save(fig, "rmse_vs_M")
    return paths

"""Figure rendering for run directories (PNG, non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0
params = {
    "axes.labelsize": 9,
    "font.size": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 150,
    "lines.linewidth": 1,
}


def _save(fig, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def quasi_map(path, q, x, k, time=None, title=None):
    """Phase-space map with a diverging colour scale centred on zero."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        lim = np.max(np.abs(q)) or 1.0
        im = ax.pcolormesh(x, k, q.T, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="nearest")
        fig.colorbar(im, ax=ax, label="f (1/(nm nm^-1))")
        ax.set_xlabel("x (nm)")
        ax.set_ylabel("k (1/nm)")
        label = title or ""
        if time is not None:
            label = f"{label} t = {time:.4g} fs".strip()
        ax.set_title(label)
        return _save(fig, path)


def density_curves(path, x, curves: dict, ylabel="density (1/nm)", title=None):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for label, y in curves.items():
            ax.plot(x, y, label=label)
        ax.set_xlabel("x (nm)")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def kernel_surface(path, x, k, values):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        lim = np.max(np.abs(values)) or 1.0
        im = ax.pcolormesh(x, k, values.T, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="nearest")
        fig.colorbar(im, ax=ax, label="w (1/fs)")
        ax.set_xlabel("x (nm)")
        ax.set_ylabel("k (1/nm)")
        return _save(fig, path)


def series_convergence(path, x, reference, partials: dict):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(x, reference, color="tab:red", label="quadrature")
        for m, y in partials.items():
            ax.plot(x, y, "--", color="tab:blue", alpha=0.4 + 0.6 * (m / max(partials)), label=f"M <= {m}")
        ax.set_xlabel("x (nm)")
        ax.set_ylabel("gamma (series units)")
        ax.legend(frameon=False)
        return _save(fig, path)


def scan(path, scales, log10_ratio):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.semilogx(scales, log10_ratio, "o-")
        ax.set_xlabel("hbar scale")
        ax.set_ylabel("log10 max gamma / max gamma(1)")
        return _save(fig, path)


def timeseries(path, t, columns: dict, ylabel):
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for label, y in columns.items():
            ax.plot(t, y, label=label)
        ax.set_xlabel("t (fs)")
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        return _save(fig, path)

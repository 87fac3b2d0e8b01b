"""Optional diagnostic figures (matplotlib, Agg backend, imported lazily)."""
from __future__ import annotations

import numpy as np

from .errors import ValidationError


def _plt():
    try:
        import matplotlib
    except ImportError:  # pragma: no cover
        raise ValidationError("plotting needs matplotlib (pip install matplotlib)", "missing-dependency") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    fig.clf()


def plot_fit(trace, fit, path):
    from .synth import hanger_s21
    plt = _plt()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    f = trace.frequency
    fine = np.linspace(f[0], f[-1], 2000)
    model = hanger_s21(fit, fine)
    corr = np.exp(2j * np.pi * fit.tau * f)
    ax1.plot((trace.s21 * corr).real, (trace.s21 * corr).imag, ".", ms=3, label="data")
    mc = model * np.exp(2j * np.pi * fit.tau * fine)
    ax1.plot(mc.real, mc.imag, "-", lw=1, label="fit")
    ax1.set_aspect("equal", adjustable="datalim")
    ax1.set_xlabel("Re S21 (delay removed)")
    ax1.set_ylabel("Im S21")
    ax1.legend()
    ax2.plot((f - fit.fr) / 1e3, np.unwrap(np.angle(trace.s21 * corr)), ".", ms=3)
    ax2.plot((fine - fit.fr) / 1e3, np.unwrap(np.angle(mc)), "-", lw=1)
    ax2.set_xlabel("f - fr (kHz)")
    ax2.set_ylabel("phase (rad)")
    ax2.set_title(f"QL={fit.q_loaded:.3g}  |Qc|={fit.q_coupling_mag:.3g}  phi={fit.phi:.3f}")
    _save(fig, path)
    plt.close(fig)


def plot_power_sweep(tables, fits, path):
    """``tables``/``fits`` map a mode label to its (n, q, sigma) rows and TlsFit."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for label, table in tables.items():
        n, q, s = table[:, 0], table[:, 1], table[:, 2]
        h = ax.errorbar(n, q, yerr=2 * s, fmt="o", ms=4, capsize=2, label=label)
        fit = fits.get(label)
        if fit is not None:
            grid = np.geomspace(n.min(), n.max(), 200)
            ax.plot(grid, 1.0 / fit.loss(grid), "-", color=h[0].get_color())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mean photon number")
    ax.set_ylabel("Q_int")
    ax.legend()
    _save(fig, path)
    plt.close(fig)


def plot_budget(budget, path):
    plt = _plt()
    fr = budget.fractions
    fig, ax = plt.subplots(figsize=(5.5, 4))
    bottom = np.zeros(len(budget.mode_ids))
    for i, c in enumerate(budget.channels):
        ax.bar(budget.mode_ids, fr[:, i], bottom=bottom, label=c)
        bottom += fr[:, i]
    ax.set_ylabel("fraction of loss")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    _save(fig, path)
    plt.close(fig)


def plot_factors_vs_power(sets, path):
    plt = _plt()
    n = np.array([s.photon_number for s in sets])
    fig, axes = plt.subplots(1, len(sets[0].channels), figsize=(4 * len(sets[0].channels), 3.5))
    axes = np.atleast_1d(axes)
    for k, (ax, c) in enumerate(zip(axes, sets[0].channels)):
        v = np.array([s.values[k] for s in sets])
        e = np.array([s.sigmas[k] for s in sets])
        ax.fill_between(n, v - e, v + e, alpha=0.3)
        ax.plot(n, v)
        ax.set_xscale("log")
        ax.set_title(c)
        ax.set_xlabel("mean photon number")
    _save(fig, path)
    plt.close(fig)


def plot_sensitivity(smap, path):
    plt = _plt()
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    g1, g2 = smap.grids
    for k, ax in enumerate(axes):
        im = ax.pcolormesh(g2, g1, np.log10(smap.fractional_error[k]), shading="auto", cmap="viridis")
        ax.contour(g2, g1, smap.fractional_error[k], levels=[1.0], colors="w")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(smap.axes[1])
        ax.set_ylabel(smap.axes[0])
        ax.set_title(f"log10 sigma/Gamma of {smap.axes[k]}")
        fig.colorbar(im, ax=ax)
    _save(fig, path)
    plt.close(fig)

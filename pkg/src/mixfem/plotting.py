"""PNG figures for the report path (Agg backend, imported lazily)."""

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_probe_history(probes, path, title=None):
    """Displacement components and pressure against the load factor.

    ``probes`` is the mapping returned by :func:`mixfem.io.read_probe_csv`.
    """
    plt = _pyplot()
    fig, (ax_u, ax_p) = plt.subplots(1, 2, figsize=(9, 3.6), constrained_layout=True)
    for name, d in probes.items():
        for comp, style in (("ux", ":"), ("uy", "--"), ("uz", "-")):
            ax_u.plot(d["load_factor"], d[comp], style, marker="o", ms=3, label=f"{name} {comp}")
        ax_p.plot(d["load_factor"], d["p"], "-", marker="s", ms=3, label=name)
    ax_u.set_xlabel("load factor")
    ax_u.set_ylabel("displacement")
    ax_p.set_xlabel("load factor")
    ax_p.set_ylabel("pressure")
    ax_u.legend(fontsize=7)
    ax_p.legend(fontsize=7)
    if title:
        fig.suptitle(title)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(log, path, title=None):
    """Residual norm against iteration, one line per load step."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    for s, res in enumerate(log.residuals, start=1):
        r = np.asarray(res, dtype=float)
        ax.semilogy(np.arange(len(r)), np.maximum(r, 1e-300), marker="o", ms=3, label=f"step {s}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual norm")
    ax.grid(True, which="both", alpha=0.3)
    if len(log.residuals) <= 12:
        ax.legend(fontsize=7, ncol=2)
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(J, table, path, windows=((0.95, 1.05), (0.0, 5.0))):
    """Pressure against J for each volumetric id, one panel per J window;
    the last panel is clipped to ``|p| <= 5`` so the stiff ids stay readable."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(windows), figsize=(4.5 * len(windows), 3.6), constrained_layout=True)
    axes = np.atleast_1d(axes)
    J = np.asarray(J)
    for ax, (lo, hi) in zip(axes, windows):
        sel = (J >= lo) & (J <= hi)
        for i in sorted(table):
            ax.plot(J[sel], np.asarray(table[i])[sel], label=f"V{i}")
        ax.set_xlabel("J")
        ax.set_ylabel("p / kappa")
        ax.set_title(f"J in [{lo:g}, {hi:g}]")
        ax.grid(True, alpha=0.3)
    axes[-1].set_ylim(-5.0, 5.0)
    axes[0].legend(fontsize=7, ncol=2)
    fig.savefig(path, dpi=120)
    plt.close(fig)

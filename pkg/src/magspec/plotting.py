"""PNG figures for experiment results (matplotlib, non-interactive backend)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(table, path):
    data = np.asarray(table["rows"], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(data[:, 0], data[:, 1], "o-", ms=4)
    ax.axvline(0.5, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel(r"flux $\Phi$")
    ax.set_ylabel(r"$\lambda_1$")
    ax.set_title("first eigenvalue against flux")
    return _save(fig, path)


def plot_degeneration(table, path):
    cols = table["columns"]
    data = np.asarray(table["rows"], dtype=float)
    eps = data[:, cols.index("eps")]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, style in (("lambda1", "o-"), ("nu1", "s--"), ("rayleigh_test_function", "^:")):
        ax.loglog(eps, data[:, cols.index(name)], style, label=name.replace("_", " "))
    ax.set_xlabel(r"$\epsilon$")
    ax.set_ylabel("eigenvalue")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_convergence(table, path):
    cols = table["columns"]
    rows = table["rows"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k in sorted({r[cols.index("k")] for r in rows}):
        sel = [r for r in rows if r[cols.index("k")] == k and r[cols.index("error")] > 0]
        if sel:
            ax.loglog([r[cols.index("h")] for r in sel], [r[cols.index("error")] for r in sel], "o-", label=f"k={k}")
    ax.set_xlabel("h")
    ax.set_ylabel("eigenvalue error")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_reports(reports, path):
    fig, ax = plt.subplots(figsize=(6, 0.4 * len(reports) + 1.2))
    y = np.arange(len(reports))
    margins = [r.margin for r in reports]
    colors = ["tab:green" if r.passed else "tab:red" for r in reports]
    ax.barh(y, margins, color=colors)
    ax.set_yticks(y)
    ax.set_yticklabels([r.name for r in reports], fontsize=8)
    ax.axvline(0, color="k", lw=0.8)
    ax.set_xscale("symlog", linthresh=1e-8)
    ax.set_xlabel("margin")
    return _save(fig, path)


def plot_spectra(spectra, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for s in spectra:
        ax.plot(np.arange(1, len(s["eigenvalues"]) + 1), s["eigenvalues"], "o-", ms=3, label=f"{s['label']} {s['grid']}")
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\lambda_k$")
    if len(spectra) <= 8:
        ax.legend(fontsize=7)
    return _save(fig, path)


def render_figures(name, result, out_dir):
    """Write every applicable figure for a result; returns the paths."""
    paths = []
    tables = result.tables
    if "sweep" in tables:
        paths.append(plot_sweep(tables["sweep"], out_dir / f"{name}_sweep.png"))
    if "degeneration" in tables:
        paths.append(plot_degeneration(tables["degeneration"], out_dir / f"{name}_degeneration.png"))
    if "convergence" in tables:
        paths.append(plot_convergence(tables["convergence"], out_dir / f"{name}_convergence.png"))
    if result.reports:
        paths.append(plot_reports(result.reports, out_dir / f"{name}_margins.png"))
    if result.spectra:
        paths.append(plot_spectra(result.spectra, out_dir / f"{name}_spectra.png"))
    return paths

"""Report figures.  Rendered off-screen and saved without volatile metadata."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "save",
    "plot_position_distribution",
    "plot_bands",
    "plot_cdfs",
    "plot_assumption",
    "plot_convergence",
    "plot_distances",
    "plot_sweep",
]

DPI = 120


def save(fig, path) -> None:
    """Write a PNG with no software/date metadata so identical data gives identical bytes."""
    fig.savefig(path, format="png", dpi=DPI, metadata={"Software": None})
    plt.close(fig)


def plot_position_distribution(xs, probs, T, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(xs, probs, lw=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel(f"P(X_{T} = x)")
    fig.tight_layout()
    save(fig, path)


def plot_bands(k, lam, vel, path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for j in range(lam.shape[1]):
        ax1.plot(k, np.mod(np.angle(lam[:, j]), 2 * np.pi), ".", ms=1, label=f"band {j + 1}")
        ax2.plot(k, vel[:, j], lw=1, label=f"band {j + 1}")
    ax1.set_xlabel("k")
    ax1.set_ylabel("arg eigenvalue")
    ax2.set_xlabel("k")
    ax2.set_ylabel("group velocity")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    save(fig, path)


def plot_cdfs(v, curves: dict, path, xlabel="v") -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, y in curves.items():
        ax.step(v, y, where="post", lw=1, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.legend(fontsize=8)
    fig.tight_layout()
    save(fig, path)


def plot_assumption(xs, fwd, bwd, eps0, path) -> None:
    mask = xs > 0
    w = (1.0 + xs[mask]) ** (1.0 + eps0)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.loglog(xs[mask], np.abs(fwd[mask]) * w, lw=1, label="forward residual, scaled")
    ax.loglog(xs[mask], np.abs(bwd[mask]) * w, lw=1, label="backward residual, scaled")
    ax.set_xlabel("x")
    ax.legend(fontsize=8)
    fig.tight_layout()
    save(fig, path)


def plot_convergence(times, increments, tails, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    inc = np.asarray(increments, dtype=float)
    if np.any(inc > 0):
        ax.loglog(times, np.where(inc > 0, inc, np.nan), "o-", label="increment")
    tl = np.asarray(tails, dtype=float)
    if np.any(tl > 0):
        ax.loglog(times, np.where(tl > 0, tl, np.nan), "s--", label="coin-gap tail")
    ax.set_xlabel("t")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    save(fig, path)


def plot_distances(times, kolmogorov, cf, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.loglog(times, kolmogorov, "o-", label="Kolmogorov")
    ax.loglog(times, cf, "s-", label="max CF gap")
    ax.set_xlabel("T")
    ax.legend(fontsize=8)
    fig.tight_layout()
    save(fig, path)


def plot_sweep(ps, series: dict, metric: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, ys in series.items():
        ax.plot(ps, ys, "o-", label=label)
    ax.set_xlabel("p")
    ax.set_ylabel(metric)
    ax.legend(fontsize=8)
    fig.tight_layout()
    save(fig, path)

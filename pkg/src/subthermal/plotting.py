"""Figure rendering for the CLI report paths.

PNG files are written next to the delimited output with date metadata
stripped so repeated runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "save_pmf_figure",
    "save_moment_figure",
    "save_analysis_figure",
]

_SAVE_KW = {"dpi": 150, "metadata": {"Date": None}}


def save_pmf_figure(curves, path, title, xlabel="photon number N", ylabel="P(N)"):
    """Overlay photon-number distributions; ``curves`` is a list of
    (label, N values, probabilities)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, n, p in curves:
        ax.semilogy(n, p, marker="o", markersize=2.5, linewidth=1.0, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_moment_figure(curves, path, title, ylabel):
    """Moment-vs-m curves; ``curves`` is a list of (label, m values, y values)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, m, y in curves:
        ax.plot(m, y, marker="s", markersize=3.5, linewidth=1.0, label=label)
    ax.set_xlabel("observed modes m")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_analysis_figure(n_values, observed_freq, model_probs, path, title):
    """Histogram of conditioned samples against the model distribution."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(n_values, observed_freq, width=0.8, alpha=0.5, label="measured")
    ax.plot(n_values, model_probs, "k.-", markersize=6, linewidth=1.0, label="model")
    ax.set_xlabel("photon number N")
    ax.set_ylabel("frequency")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.25)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)

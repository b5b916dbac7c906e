"""Figure rendering for report outputs (headless matplotlib backend).

The report path writes these next to the delimited files: the shrinkage of
the candidate set per search iteration, and a per-method summary of
cardinality and wall time.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_sigma_trace", "render_method_summary"]


def render_sigma_trace(traces: dict[str, list[int]], path, dpi: int = 150) -> None:
    """Step plot of the candidate-set size after each iteration, one line
    per method; the search terminates when the size reaches zero."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for method, sigmas in traces.items():
        its = list(range(1, len(sigmas) + 1))
        ax.step(its, sigmas, where="post", marker="o", label=method)
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"remaining candidates $\sigma$")
    ax.set_title("Candidate-set reduction per iteration")
    if traces:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def render_method_summary(rows, path, dpi: int = 150) -> None:
    """Bar chart of selection cardinality and wall time per method row."""
    methods = [r.method for r in rows]
    cards = [r.cardinality if r.cardinality is not None else 0 for r in rows]
    times = [r.wall_time_s for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.6))
    ax1.bar(methods, cards, color="tab:blue")
    ax1.set_ylabel("activated sensors + actuators")
    ax1.set_title("Selection cardinality")
    ax2.bar(methods, times, color="tab:orange")
    ax2.set_ylabel("wall time [s]")
    ax2.set_title("Method runtime")
    for ax in (ax1, ax2):
        ax.grid(True, axis="y", alpha=0.3)
        ax.tick_params(axis="x", rotation=15)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)

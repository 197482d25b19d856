"""Report figures written next to CLI outputs (PNG, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from repoctx.dataset_io import SplitStats  # noqa: E402
from repoctx.eval_harness import EvalResult  # noqa: E402

_STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 100,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # no timestamp metadata, so reruns are byte-identical
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def loss_curve(losses: list[float], path, window: int = 20) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        steps = range(1, len(losses) + 1)
        ax.plot(steps, losses, lw=0.8, alpha=0.45, label="batch loss")
        if len(losses) >= window:
            smooth = [sum(losses[i - window : i]) / window for i in range(window, len(losses) + 1)]
            ax.plot(range(window, len(losses) + 1), smooth, lw=1.5, label=f"mean of {window}")
        ax.set_xlabel("step")
        ax.set_ylabel("cross-entropy (nats)")
        ax.set_yscale("log")
        ax.legend(frameon=False)
        return _save(fig, path)


def success_rates(results: dict[str, EvalResult], path) -> Path:
    """Bar per provider with a one-stderr error bar."""
    names = list(results)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        rates = [100 * results[n].success_rate for n in names]
        errs = [100 * results[n].stderr for n in names]
        ax.bar(names, rates, yerr=errs, capsize=4, color="#4c72b0")
        for i, (r, res) in enumerate(zip(rates, results.values())):
            ax.annotate(f"{r:.1f}%\nn={res.n}", (i, r), ha="center", va="bottom", xytext=(0, 3), textcoords="offset points")
        ax.set_ylim(0, 115)
        ax.set_ylabel("success rate (%)")
        return _save(fig, path)


def corpus_stats(table: dict[str, SplitStats], path) -> Path:
    splits = list(table)
    metrics = ("n_repos", "n_files", "n_holes")
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(metrics), figsize=(7.5, 2.8))
        for ax, metric in zip(axes, metrics):
            ax.bar(splits, [getattr(table[s], metric) for s in splits], color="#55a868")
            ax.set_title(metric)
        return _save(fig, path)

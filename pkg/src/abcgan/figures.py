"""Boxplot figures rendered next to the delimited report output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiments import OUTLIER_MAE_THRESHOLD


def render_mae_boxplots(
    per_model_maes: dict[str, list[float]],
    out_path: str | Path,
    title: str,
    filter_outliers: bool = False,
) -> Path:
    """One figure of per-run validation MAE boxplots, one box per model.

    Applies the same MAE >= 20 cut as the boxplot CSV when requested and
    annotates how many points were removed.
    """
    if not per_model_maes:
        raise ValueError("no model MAE lists given")
    labels, series = [], []
    removed = 0
    for model, values in per_model_maes.items():
        kept = values
        if filter_outliers:
            kept = [v for v in values if v < OUTLIER_MAE_THRESHOLD]
            removed += len(values) - len(kept)
        labels.append(model)
        series.append(kept)
    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(labels), 3.6))
    ax.boxplot(series, tick_labels=labels)
    ax.set_ylabel("validation MAE")
    note = f" ({removed} points with MAE >= {OUTLIER_MAE_THRESHOLD:g} removed)" if removed else ""
    ax.set_title(title + note, fontsize=10)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150, metadata={"Software": "abcgan"})
    plt.close(fig)
    return out_path

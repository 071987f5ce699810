"""Matplotlib rendering for the report path.

The eval command writes a PNG next to its text/CSV report; this module
keeps matplotlib optional-at-import for library users who never render.
"""

from __future__ import annotations

import numpy as np

from .evaluate import AccuracyReport, ArealComparison, ConfusionMatrix


def save_report_figure(
    cm: ConfusionMatrix,
    report: AccuracyReport,
    areal_rows: list[ArealComparison],
    path,
) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ncols = 3 if areal_rows else 2
    fig, axes = plt.subplots(1, ncols, figsize=(4.0 * ncols, 3.6))

    ax = axes[0]
    counts = cm.counts.astype(np.float64)
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(cm.labels)), cm.labels, rotation=30, ha="right")
    ax.set_yticks(range(len(cm.labels)), cm.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("reference")
    ax.set_title("Confusion matrix")
    thresh = counts.max() / 2.0 if counts.max() > 0 else 0.5
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            ax.text(
                j,
                i,
                f"{int(counts[i, j])}",
                ha="center",
                va="center",
                color="white" if counts[i, j] > thresh else "black",
                fontsize=8,
            )
    fig.colorbar(im, ax=ax, fraction=0.046)

    ax = axes[1]
    names = ["OA", "kappa"]
    vals = [report.overall_accuracy, report.kappa]
    ax.bar(names, vals, color=["#4878b0", "#6aa84f"])
    ax.set_ylim(0, 1.05)
    ax.set_title("Agreement")
    for i, v in enumerate(vals):
        ax.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=9)

    if areal_rows:
        ax = axes[2]
        idx = np.arange(len(areal_rows))
        ref = [a.reference_area for a in areal_rows]
        ext = [a.extracted_area for a in areal_rows]
        ax.bar(idx - 0.2, ref, width=0.4, label="reference")
        ax.bar(idx + 0.2, ext, width=0.4, label="extracted")
        ax.set_xticks(idx, [a.feature_name for a in areal_rows], rotation=30, ha="right")
        ax.set_ylabel("km$^2$")
        ax.set_title("Areal extent")
        ax.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

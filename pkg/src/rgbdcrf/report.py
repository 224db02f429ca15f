"""Evaluation report rendering: summary lines, classwise tables (aligned
text and CSV), and matplotlib figures written next to the delimited output."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import ClassPalette
from .metrics import ConfusionMatrix, classwise_iou, mean_accuracy, mean_iou, pixel_accuracy

PathLike = Union[str, Path]


def summary_line(cm: ConfusionMatrix) -> str:
    """The three headline criteria as 'Pixel / Mean / IoU' percentages."""
    return (
        f"Pixel {100.0 * pixel_accuracy(cm):.1f}  "
        f"Mean {100.0 * mean_accuracy(cm):.1f}  "
        f"IoU {100.0 * mean_iou(cm):.1f}"
    )


def _iou_cells(cm: ConfusionMatrix) -> list:
    ious = classwise_iou(cm)
    return [("-" if np.isnan(v) else f"{100.0 * v:.2f}") for v in ious]


def classwise_table(cm: ConfusionMatrix, names: Sequence[str], per_row: int = 12) -> str:
    """Aligned-text classwise IoU table: class columns plus a mean column."""
    if len(names) != cm.num_classes:
        raise ValueError("need one name per class")
    cells = _iou_cells(cm)
    columns = list(zip(names, cells)) + [("mean", f"{100.0 * mean_iou(cm):.2f}")]
    lines = []
    for start in range(0, len(columns), per_row):
        chunk = columns[start : start + per_row]
        widths = [max(len(n), len(v)) for n, v in chunk]
        lines.append("  ".join(n.rjust(w) for (n, _), w in zip(chunk, widths)))
        lines.append("  ".join(v.rjust(w) for (_, v), w in zip(chunk, widths)))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def classwise_csv(cm: ConfusionMatrix, names: Sequence[str]) -> str:
    """CSV with one column per class plus the mean, IoU values in percent."""
    if len(names) != cm.num_classes:
        raise ValueError("need one name per class")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(list(names) + ["mean"])
    writer.writerow(_iou_cells(cm) + [f"{100.0 * mean_iou(cm):.2f}"])
    return buf.getvalue()


def write_classwise_csv(cm: ConfusionMatrix, names: Sequence[str], path: PathLike) -> None:
    Path(path).write_text(classwise_csv(cm, names))


def render_iou_figure(
    cm: ConfusionMatrix,
    names: Sequence[str],
    path: PathLike,
    title: str = "Classwise IoU",
) -> None:
    """Bar chart of classwise IoU with the mean marked, saved to path."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ious = classwise_iou(cm)
    xs = np.arange(len(ious))
    heights = np.where(np.isnan(ious), 0.0, ious) * 100.0

    fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(ious) + 2.0), 4.0))
    ax.bar(xs, heights, color="#4878cf")
    mean_value = 100.0 * mean_iou(cm)
    ax.axhline(mean_value, color="#d65f5f", linestyle="--", linewidth=1.2,
               label=f"mean {mean_value:.1f}")
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=90, fontsize=7)
    ax.set_ylabel("IoU (%)")
    ax.set_ylim(0, 100)
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_search_figure(
    objectives: Sequence[float],
    rounds: Sequence[int],
    path: PathLike,
    title: str = "Random search progress",
) -> None:
    """Objective-vs-trial scatter colored by round, with the incumbent line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    objectives = np.asarray(objectives, dtype=np.float64)
    rounds = np.asarray(rounds)
    xs = np.arange(len(objectives))
    incumbent = np.maximum.accumulate(objectives)

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for r in np.unique(rounds):
        sel = rounds == r
        ax.scatter(xs[sel], objectives[sel], s=18, label=f"round {int(r)}")
    ax.plot(xs, incumbent, color="black", linewidth=1.0, label="best so far")
    ax.set_xlabel("trial")
    ax.set_ylabel("mean IoU")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def palette_names(palette: Optional[ClassPalette], k: int) -> Sequence[str]:
    """Class names from a palette, or generated defaults for k classes."""
    if palette is not None and len(palette) == k:
        return palette.names
    return [f"class_{i}" for i in range(k)]

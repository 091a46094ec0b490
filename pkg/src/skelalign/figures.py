"""Matplotlib renderers for the reporting CLI paths.

Figures are written to files next to the delimited outputs; the Agg backend
keeps everything headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalReport, MapReport
from .geometry import ViewSphere


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_loss_history(
    history: list[tuple[int, float, float, float]], path: str | Path
) -> Path:
    """Training curves: total loss plus its two terms, per epoch."""
    epochs = [row[0] for row in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(epochs, [row[1] for row in history], label="total", lw=2)
    ax.plot(epochs, [row[2] for row in history], label="rotation", lw=1)
    ax.plot(epochs, [row[3] for row in history], label="reconstruction", lw=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_per_class_accuracy(report: EvalReport, path: str | Path) -> Path:
    """Horizontal bars, one per class, with the overall accuracy marked."""
    names = [n for n in sorted(report.per_class) if not np.isnan(report.per_class[n])]
    values = [report.per_class[n] for n in names]
    fig, ax = plt.subplots(figsize=(7, 0.4 * max(len(names), 4) + 1.5))
    ypos = np.arange(len(names))
    ax.barh(ypos, values, color="#4878a8")
    ax.axvline(report.accuracy, color="#b04030", ls="--", lw=1, label="overall")
    ax.set_yticks(ypos)
    ax.set_yticklabels(names)
    ax.set_xlim(0, 1.02)
    ax.set_xlabel("accuracy")
    ax.invert_yaxis()
    ax.legend(frameon=False, loc="lower right")
    ax.grid(axis="x", alpha=0.3)
    cfg = report.config
    t_n = "all" if cfg.t_n is None else cfg.t_n
    ax.set_title(
        f"{cfg.ways}-way {cfg.shots}-shot, {cfg.method}/order {cfg.order}/t_n {t_n}"
    )
    return _save(fig, path)


def plot_per_class_ap(report: MapReport, path: str | Path) -> Path:
    names = sorted(report.per_class)
    values = [report.per_class[n] for n in names]
    fig, ax = plt.subplots(figsize=(7, 0.4 * max(len(names), 4) + 1.5))
    ypos = np.arange(len(names))
    ax.barh(ypos, values, color="#55885f")
    ax.axvline(report.mean_ap, color="#b04030", ls="--", lw=1, label="mean")
    ax.set_yticks(ypos)
    ax.set_yticklabels(names)
    ax.set_xlim(0, 102)
    ax.set_xlabel(f"average precision (IoU {report.iou_threshold})")
    ax.invert_yaxis()
    ax.legend(frameon=False, loc="lower right")
    ax.grid(axis="x", alpha=0.3)
    return _save(fig, path)


def plot_view_sphere(
    sphere: ViewSphere,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    path: str | Path,
) -> Path:
    """3D scatter of candidate viewpoints, split into train and held-out."""
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    train = sphere.vertices[train_idx]
    test = sphere.vertices[test_idx]
    ax.scatter(train[:, 0], train[:, 1], train[:, 2], s=18, label="train")
    ax.scatter(
        test[:, 0], test[:, 1], test[:, 2], s=26, marker="^", label="held-out"
    )
    ax.set_box_aspect((1, 1, 1))
    ax.set_title(f"view sphere, frequency {sphere.frequency}")
    ax.legend(frameon=False)
    return _save(fig, path)

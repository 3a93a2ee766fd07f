"""Report figures, rendered off-screen to PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_confusion(counts, labels, path, title: str = "confusion matrix") -> None:
    counts = np.asarray(counts)
    fig, ax = plt.subplots(figsize=(6.4, 5.4))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(title)
    hi = counts.max() if counts.size else 0
    for (i, j), v in np.ndenumerate(counts):
        ax.text(j, i, str(v), ha="center", va="center", color="white" if v > hi / 2 else "black")
    fig.colorbar(im, ax=ax, fraction=0.046)
    _save(fig, path)


def plot_history(history: list, path, title: str = "training history") -> None:
    epochs = [h["epoch"] for h in history]
    fig, (ax_l, ax_a) = plt.subplots(1, 2, figsize=(9, 3.6))
    for key, style in (("train_loss", "-o"), ("val_loss", "-s")):
        ax_l.plot(epochs, [h[key] for h in history], style, ms=3, label=key.replace("_", " "))
    for key, style in (("train_accuracy", "-o"), ("val_accuracy", "-s")):
        ax_a.plot(epochs, [h[key] for h in history], style, ms=3, label=key.replace("_", " "))
    ax_l.set_xlabel("epoch")
    ax_l.set_ylabel("cross-entropy")
    ax_a.set_xlabel("epoch")
    ax_a.set_ylabel("accuracy")
    ax_a.set_ylim(0, 1)
    for ax in (ax_l, ax_a):
        ax.grid(alpha=0.3)
        ax.legend()
    fig.suptitle(title)
    _save(fig, path)


def plot_compare(table: dict, path) -> None:
    arms = list(table["arms"])
    acc = [table["arms"][a]["mean_accuracy"] for a in arms]
    f1 = [table["arms"][a]["mean_macro_f1"] for a in arms]
    x = np.arange(len(arms))
    fig, ax = plt.subplots(figsize=(6.4, 3.8))
    ax.bar(x - 0.2, acc, 0.4, label="accuracy")
    ax.bar(x + 0.2, f1, 0.4, label="macro F1")
    ax.axhline(1 / 7, color="gray", ls="--", lw=1, label="chance")
    ax.set_xticks(x, arms)
    ax.set_ylim(0, 1)
    ax.legend()
    ax.set_title("preprocessing arms")
    _save(fig, path)


def plot_gallery(images: list, titles: list, path, ncols: int = 4) -> None:
    nrows = -(-len(images) // ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.6 * nrows), squeeze=False)
    for ax in axes.flat:
        ax.axis("off")
    for ax, img, title in zip(axes.flat, images, titles):
        ax.imshow(img, cmap="gray", aspect="auto", vmin=0, vmax=255)
        ax.set_title(title, fontsize=9)
    _save(fig, path)

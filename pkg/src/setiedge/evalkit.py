"""Confusion matrices, per-class metrics, and the stratified fold protocol.

Rows of a confusion matrix are the actual class, columns the predicted class.
One-vs-rest counts for class ``c``::

    TP = M[c, c]   FP = column sum - TP   FN = row sum - TP   TN = rest

Any 0/0 ratio evaluates to 0.  Macro averages run over classes with nonzero
support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sigsim import CLASS_LABELS

SPLITS = ("train", "val", "test")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # int64 (n, n)

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {self.counts.shape}")
        if not np.issubdtype(self.counts.dtype, np.integer):
            if not np.all(self.counts == np.round(self.counts)):
                raise ValueError("confusion matrix counts must be integers")
        self.counts = self.counts.astype(np.int64)
        if (self.counts < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, c: int):
        """``(TP, FP, FN, TN)`` for class ``c``."""
        tp = int(self.counts[c, c])
        fp = int(self.counts[:, c].sum()) - tp
        fn = int(self.counts[c, :].sum()) - tp
        return tp, fp, fn, self.total - tp - fp - fn


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    per_class: list
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    support: int
    confusion: ConfusionMatrix
    labels: tuple = field(default=CLASS_LABELS)

    def to_dict(self) -> dict:
        return {
            "per_class": {
                lab: {"precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}
                for lab, m in zip(self.labels, self.per_class)
            },
            "macro_avg": {"precision": self.macro_precision, "recall": self.macro_recall,
                          "f1": self.macro_f1, "support": self.support},
            "accuracy": self.accuracy,
            "support": self.support,
            "labels": list(self.labels),
            "confusion_matrix": self.confusion.counts.tolist(),
        }

    def to_text(self) -> str:
        """Per-class table, accuracy and macro rows, then the raw matrix."""
        width = max(len(s) for s in self.labels + ("macro avg",)) + 2
        lines = [f"{'':{width}}{'Precision':>10}{'Recall':>10}{'F1-score':>10}{'Support':>9}"]
        for lab, m in zip(self.labels, self.per_class):
            lines.append(f"{lab:{width}}{m.precision:10.4f}{m.recall:10.4f}{m.f1:10.4f}{m.support:9d}")
        lines.append(f"{'accuracy':{width}}{'':20}{self.accuracy:10.4f}{self.support:9d}")
        lines.append(f"{'macro avg':{width}}{self.macro_precision:10.4f}{self.macro_recall:10.4f}"
                     f"{self.macro_f1:10.4f}{self.support:9d}")
        lines.append("")
        lines.append("confusion matrix (rows = actual, columns = predicted)")
        cw = max(6, len(str(self.confusion.counts.max())) + 2)
        lines.append(f"{'':{width}}" + "".join(f"{i:>{cw}d}" for i in range(self.confusion.n_classes)))
        for lab, row in zip(self.labels, self.confusion.counts):
            lines.append(f"{lab:{width}}" + "".join(f"{v:>{cw}d}" for v in row))
        return "\n".join(lines) + "\n"


def confusion_matrix(actual, predicted, n_classes: int = 7) -> ConfusionMatrix:
    a = np.asarray(actual, dtype=np.int64).reshape(-1)
    p = np.asarray(predicted, dtype=np.int64).reshape(-1)
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted labels")
    for arr in (a, p):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"labels must lie in [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (a, p), 1)
    return ConfusionMatrix(counts)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def class_metrics(cm: ConfusionMatrix, c: int) -> ClassMetrics:
    tp, fp, fn, _ = cm.one_vs_rest(c)
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return ClassMetrics(precision, recall, f1, tp + fn)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy is undefined for an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def _macro(cm: ConfusionMatrix, attr: str) -> float:
    if cm.total == 0:
        raise ValueError("macro averages are undefined for an empty confusion matrix")
    ms = [class_metrics(cm, c) for c in range(cm.n_classes)]
    vals = [getattr(m, attr) for m in ms if m.support > 0]
    return float(np.mean(vals))


def macro_f1(cm: ConfusionMatrix) -> float:
    return _macro(cm, "f1")


def evaluate(cm: ConfusionMatrix, labels=CLASS_LABELS) -> EvalReport:
    if len(labels) != cm.n_classes:
        labels = tuple(str(i) for i in range(cm.n_classes))
    per_class = [class_metrics(cm, c) for c in range(cm.n_classes)]
    return EvalReport(per_class, _macro(cm, "precision"), _macro(cm, "recall"), macro_f1(cm),
                      accuracy(cm), cm.total, cm, tuple(labels))


@dataclass
class FoldAssignment:
    """Per-sample fold index; the split of a sample depends on the round.

    In round ``r`` fold ``r`` is held out: within each class, the first half of
    its fold members (in shuffled order) is validation and the rest is test.
    """

    folds: np.ndarray  # int, per sample
    heldout_role: np.ndarray  # "val" or "test" if the sample's fold is held out
    k: int

    def splits(self, round_index: int) -> np.ndarray:
        if not 0 <= round_index < self.k:
            raise ValueError(f"round must lie in [0, {self.k})")
        out = np.full(self.folds.shape, "train", dtype=object)
        held = self.folds == round_index
        out[held] = self.heldout_role[held]
        return out

    def indices(self, round_index: int, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        return np.flatnonzero(self.splits(round_index) == split)


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> FoldAssignment:
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds = np.full(labels.shape, -1, dtype=np.int64)
    role = np.full(labels.shape, "", dtype=object)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < k:
            raise ValueError(f"class {c} has {members.size} samples, fewer than k={k}")
        for f, chunk in enumerate(np.array_split(rng.permutation(members), k)):
            folds[chunk] = f
            half = chunk.size // 2
            role[chunk[:half]] = "val"
            role[chunk[half:]] = "test"
    return FoldAssignment(folds, role, k)

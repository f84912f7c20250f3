"""Classification metrics: confusion matrix, per-class precision/recall/F1,
accuracy, and binary ROC/AUC.

Zero-denominator cases report 0 rather than NaN. ROC thresholds sweep the
distinct scores descending with ties grouped, and AUC is the trapezoidal
area, which equals the pairwise ordering probability.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, LabelOutOfRange, LengthMismatch, SingleClassInput
from .jsonutil import dump_json


@dataclass
class ConfusionMatrix:
    """counts[t][p]: rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (self.counts < 0).any():
            raise ValueError("confusion matrix entries must be >= 0")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self, class_names=None) -> str:
        obj = {"counts": self.counts.tolist()}
        if class_names is not None:
            obj["classes"] = list(class_names)
        return dump_json(obj)

    def to_csv(self, class_names=None) -> str:
        names = list(class_names) if class_names is not None \
            else [f"class{i}" for i in range(self.k)]
        buf = io.StringIO()
        buf.write("true\\predicted," + ",".join(names) + "\n")
        for i, name in enumerate(names):
            buf.write(name + "," + ",".join(str(int(v))
                                            for v in self.counts[i]) + "\n")
        return buf.getvalue()


@dataclass
class ClassReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    class_names: list[str] | None = None

    def to_json(self) -> str:
        names = self.class_names or [f"class{i}"
                                     for i in range(len(self.precision))]
        rows = {name: {"precision": float(p), "recall": float(r),
                       "f1": float(f), "support": int(s)}
                for name, p, r, f, s in zip(names, self.precision, self.recall,
                                            self.f1, self.support)}
        return dump_json(rows)

    def to_csv(self) -> str:
        names = self.class_names or [f"class{i}"
                                     for i in range(len(self.precision))]
        buf = io.StringIO()
        buf.write("class,precision,recall,f1,support\n")
        for name, p, r, f, s in zip(names, self.precision, self.recall,
                                    self.f1, self.support):
            buf.write(f"{name},{p:.6g},{r:.6g},{f:.6g},{int(s)}\n")
        return buf.getvalue()


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def confusion_matrix(true_labels, predicted_labels, k: int) -> ConfusionMatrix:
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.shape != predicted_labels.shape:
        raise LengthMismatch("label lists differ in length")
    for arr in (true_labels, predicted_labels):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise LabelOutOfRange(f"labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true_labels, predicted_labels), 1)
    return ConfusionMatrix(counts)


def f1_from_precision_recall(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def precision_recall_f1(cm: ConfusionMatrix, class_index: int):
    """Per-class (precision, recall, f1); zero denominators give 0."""
    tp = int(cm.counts[class_index, class_index])
    fp = int(cm.counts[:, class_index].sum()) - tp
    fn = int(cm.counts[class_index, :].sum()) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall, f1_from_precision_recall(precision, recall)


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix holds no samples")
    return float(np.trace(cm.counts)) / total


def classification_report(cm: ConfusionMatrix,
                          class_names=None) -> ClassReport:
    rows = [precision_recall_f1(cm, i) for i in range(cm.k)]
    return ClassReport(
        precision=np.array([r[0] for r in rows]),
        recall=np.array([r[1] for r in rows]),
        f1=np.array([r[2] for r in rows]),
        support=cm.counts.sum(axis=1),
        class_names=list(class_names) if class_names is not None else None)


def roc_auc(scores, labels) -> RocCurve:
    """ROC curve and trapezoidal AUC for binary labels and real scores."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise LengthMismatch("scores and labels differ in length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("both classes must be present")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tps = np.cumsum(sorted_labels == 1)
    fps = np.cumsum(sorted_labels == 0)
    # keep only the last index of each tied-score group
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    idx = np.concatenate([distinct, [scores.size - 1]])
    tpr = np.concatenate([[0.0], tps[idx] / n_pos])
    fpr = np.concatenate([[0.0], fps[idx] / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, auc=auc)

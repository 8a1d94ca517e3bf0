"""Classification metrics: confusion matrix, precision/recall/F1, ROC/AUC.

Undefined precision or recall (a zero denominator on a degenerate split)
is reported as 0 together with an explicit per-class flag; silent NaNs are
never produced. The ROC builder sweeps thresholds over the distinct scores
in descending order, grouping ties, and integrates by trapezoid; the
Mann-Whitney statistic is kept as an independent route to the same AUC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_labels, as_vector


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """K x K counts; entry (i, j) = samples with true class i predicted as j."""
    y_true = as_labels(y_true, n_classes, "y_true")
    y_pred = as_labels(y_pred, n_classes, "y_pred")
    if y_true.shape != y_pred.shape:
        raise ValueError(
            f"y_true has {y_true.shape[0]} entries, y_pred has {y_pred.shape[0]}"
        )
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy plus per-class and macro precision/recall/F1.

    ``zero_division_flags[k]`` is True when class k had an undefined
    precision or recall (reported as 0).
    """

    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    zero_division_flags: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": [
                {
                    "precision": float(p),
                    "recall": float(r),
                    "f1": float(f),
                    "support": int(s),
                    "zero_division": bool(z),
                }
                for p, r, f, s, z in zip(
                    self.precision, self.recall, self.f1, self.support,
                    self.zero_division_flags,
                )
            ],
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }


def metrics_from_confusion(cm) -> MetricsReport:
    """Derive the full report from a confusion matrix."""
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] < 1:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    if (cm < 0).any():
        raise ValueError("confusion matrix entries must be nonnegative")
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix holds no samples")
    k = cm.shape[0]
    diag = np.diag(cm).astype(np.float64)
    col = cm.sum(axis=0).astype(np.float64)
    row = cm.sum(axis=1).astype(np.float64)
    flags = (col == 0) | (row == 0)
    precision = np.divide(diag, col, out=np.zeros(k), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(k), where=row > 0)
    f1 = np.array([f1_score(p, r) for p, r in zip(precision, recall)])
    return MetricsReport(
        accuracy=float(diag.sum() / total),
        precision=precision,
        recall=recall,
        f1=f1,
        support=cm.sum(axis=1),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        zero_division_flags=flags,
    )


@dataclass(frozen=True)
class RocCurve:
    """Points of a binary ROC curve plus its trapezoid AUC.

    ``thresholds[i]`` is the score cutoff producing point i; the (0, 0)
    anchor carries an infinite threshold. Both coordinate sequences are
    nondecreasing and run from (0, 0) to (1, 1) exactly.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def _check_binary(scores, labels):
    scores = as_vector(scores, "scores")
    labels = as_labels(labels, 2, "labels")
    if scores.shape != labels.shape:
        raise ValueError(
            f"{scores.shape[0]} scores for {labels.shape[0]} labels"
        )
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present; AUC is undefined otherwise")
    return scores, labels, n_pos, n_neg


def roc_curve(scores, labels) -> RocCurve:
    """Binary ROC over descending score thresholds, ties grouped."""
    scores, labels, n_pos, n_neg = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # Last index of every tie group.
    group_end = np.nonzero(np.diff(sorted_scores))[0]
    group_end = np.append(group_end, scores.shape[0] - 1)
    tp = np.cumsum(sorted_labels)[group_end]
    fp = group_end + 1 - tp
    fpr = np.concatenate(([0.0], fp / n_neg))
    tpr = np.concatenate(([0.0], tp / n_pos))
    thresholds = np.concatenate(([np.inf], sorted_scores[group_end]))
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1])) / 2.0)
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


def auc_mann_whitney(scores, labels) -> float:
    """AUC as (#correctly ordered pos/neg pairs + half the ties) / (P * N).

    Computed from tie-averaged ranks, independently of the ROC sweep.
    """
    scores, labels, n_pos, n_neg = _check_binary(scores, labels)
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(scores.shape[0])
    start = 0
    for end in range(1, scores.shape[0] + 1):
        if end == scores.shape[0] or sorted_scores[end] != sorted_scores[start]:
            ranks[order[start:end]] = 0.5 * (start + end - 1) + 1.0
            start = end
    rank_sum = ranks[labels == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))

"""Classification metrics for single splits and across repeated splits.

AUC uses the one-vs-rest construction with a descending threshold sweep
over distinct score values (ties grouped), integrated by the trapezoid
rule, which equals the Mann-Whitney statistic with ties counted half.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


def _check_labels(y_true, y_pred, n_categories):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.ndim != 1 or y_true.shape != y_pred.shape:
        raise ValueError("truth and predictions must be equal-length 1-D arrays")
    if y_true.size == 0:
        raise ValueError("no samples to score")
    for name, arr in (("truth", y_true), ("predictions", y_pred)):
        if arr.min() < 0 or arr.max() >= n_categories:
            raise ValueError(f"{name} contains labels outside [0, n_categories)")
    return y_true, y_pred


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("truth and predictions must be equal-length non-empty")
    return float(np.mean(y_true == y_pred))


def confusion_matrix(y_true, y_pred, n_categories: int) -> np.ndarray:
    """Counts with true categories as rows, predicted as columns."""
    y_true, y_pred = _check_labels(y_true, y_pred, n_categories)
    flat = y_true * n_categories + y_pred
    counts = np.bincount(flat, minlength=n_categories * n_categories)
    return counts.reshape(n_categories, n_categories)


@dataclass(frozen=True, eq=False)
class Metrics:
    """One split's classification quality.

    precision, recall and f1 are per-category vectors; a category with an
    empty denominator (never predicted, or absent from the truth) scores
    0 for that quantity. confusion has true categories as rows. macro_auc
    is present only when a score matrix was supplied.
    """

    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray
    macro_auc: float | None = None

    def scalars(self) -> dict[str, float]:
        out = {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }
        if self.macro_auc is not None:
            out["macro_auc"] = self.macro_auc
        return out


def compute_metrics(predictions, truth, n_categories: int,
                    scores: np.ndarray | None = None) -> Metrics:
    """Standard multi-category metrics for one prediction run.

    Pass the (n_categories, m) score matrix to include one-vs-rest macro
    AUC.
    """
    cm = confusion_matrix(truth, predictions, n_categories)
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    actual = cm.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros(n_categories),
                          where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros(n_categories),
                       where=actual > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros(n_categories),
                   where=pr > 0)
    macro_auc = None
    if scores is not None:
        macro_auc = roc_one_vs_rest(scores, truth).macro_auc
    return Metrics(
        accuracy=accuracy(truth, predictions),
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        confusion=cm,
        macro_auc=macro_auc,
    )


def roc_points(truth: np.ndarray, scores: np.ndarray):
    """ROC sweep for one binary problem: (fpr, tpr), both starting at 0.

    truth is boolean (positive class), scores higher-means-more-positive.
    Thresholds visit each distinct score once, descending.
    """
    truth = np.asarray(truth, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if truth.shape != scores.shape or truth.ndim != 1:
        raise ValueError("truth and scores must be equal-length 1-D arrays")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both positive and negative samples")
    order = np.argsort(-scores, kind="stable")
    sorted_truth = truth[order]
    sorted_scores = scores[order]
    group_end = np.r_[np.nonzero(np.diff(sorted_scores))[0],
                      scores.size - 1]
    tp = np.cumsum(sorted_truth)[group_end]
    fp = (group_end + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return fpr, tpr


@dataclass(frozen=True, eq=False)
class RocCurve:
    """One-vs-rest ROC sweep over every category.

    curves[c] is the (fpr, tpr) point pair for category c, or None when
    the truth holds no sample of that category; auc matches, with NaN for
    the missing ones. macro_auc averages the defined entries.
    """

    curves: tuple[tuple[np.ndarray, np.ndarray] | None, ...]
    auc: np.ndarray
    macro_auc: float

    def to_text(self) -> str:
        """Tab-separated points (category, fpr, tpr), plus AUC comments."""
        lines = ["category\tfpr\ttpr"]
        for c, curve in enumerate(self.curves):
            if curve is None:
                continue
            for x, y in zip(*curve):
                lines.append(f"{c}\t{x!r}\t{y!r}")
        for c, a in enumerate(self.auc):
            if not np.isnan(a):
                lines.append(f"# auc[{c}] = {a!r}")
        lines.append(f"# macro_auc = {self.macro_auc!r}")
        return "\n".join(lines) + "\n"


def roc_one_vs_rest(scores: np.ndarray, truth) -> RocCurve:
    """Per-category ROC curves and trapezoid AUC from a score matrix.

    scores is (n_categories, m); row c scores category c, higher means
    more likely. Categories absent from the truth get no curve and NaN
    AUC and are excluded from the macro average. Raises if the truth
    holds fewer than two distinct categories (no binary problem exists).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError("scores must be (n_categories, m)")
    n_categories, m = scores.shape
    truth = np.asarray(truth, dtype=np.int64)
    if truth.shape != (m,):
        raise ValueError("truth length must match score columns")
    if truth.size and (truth.min() < 0 or truth.max() >= n_categories):
        raise ValueError("truth contains labels outside [0, n_categories)")
    if np.unique(truth).size < 2:
        raise ValueError("ROC needs at least two distinct categories")
    curves: list[tuple[np.ndarray, np.ndarray] | None] = []
    auc = np.full(n_categories, np.nan)
    for c in range(n_categories):
        positives = truth == c
        if not positives.any():
            curves.append(None)
            continue
        fpr, tpr = roc_points(positives, scores[c])
        curves.append((fpr, tpr))
        auc[c] = np.trapezoid(tpr, fpr)
    return RocCurve(curves=tuple(curves), auc=auc,
                    macro_auc=float(np.nanmean(auc)))


def auc_one_vs_rest(y_true, scores: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-category AUC vector and macro average (curve points dropped)."""
    curve = roc_one_vs_rest(scores, y_true)
    return curve.auc, curve.macro_auc


def aggregate_splits(records: Sequence) -> dict:
    """Mean and population standard deviation of each scalar metric.

    records holds Metrics values (or plain mappings); only scalar fields
    present in every record are aggregated.
    """
    if len(records) == 0:
        raise ValueError("no split records to aggregate")
    rows = [r.scalars() if isinstance(r, Metrics) else dict(r)
            for r in records]
    keys = [k for k in rows[0]
            if all(k in r and np.isscalar(r[k]) for r in rows)]
    out = {}
    for k in keys:
        values = np.array([float(r[k]) for r in rows])
        out[k] = (float(values.mean()), float(values.std()))
    return out

"""Accuracy, one-vs-all equal error rate and confusion matrices.

EER uses a deterministic threshold sweep over the midpoints of consecutive
unique scores plus the two infinities: FAR(t) is the fraction of negatives
scoring >= t, FRR(t) the fraction of positives scoring < t, and the EER is
(FAR+FRR)/2 at the threshold minimizing |FAR-FRR| (ties broken by smaller
FAR+FRR). ``method="interpolated"`` instead linearly interpolates the
FAR/FRR crossing for comparability with ROC-based tooling.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError


def accuracy(preds, labels):
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise DataError(f"shape mismatch: {preds.shape} vs {labels.shape}")
    if preds.size == 0:
        raise DataError("accuracy undefined on empty input")
    return float((preds == labels).mean())


def predict_labels(probs):
    """Argmax per row; ties resolve to the smallest class index."""
    return np.argmax(np.asarray(probs), axis=1)


def _sweep_rates(scores, positive):
    """FAR and FRR at the midpoint thresholds plus -inf and +inf."""
    pos_scores = scores[positive]
    neg_scores = scores[~positive]
    uniq = np.unique(scores)
    thresholds = np.concatenate(([-np.inf], (uniq[:-1] + uniq[1:]) / 2.0, [np.inf]))
    # counts via sorted insertion: negatives >= t, positives < t
    neg_sorted = np.sort(neg_scores)
    pos_sorted = np.sort(pos_scores)
    n_neg_ge = len(neg_scores) - np.searchsorted(neg_sorted, thresholds, side="left")
    n_pos_lt = np.searchsorted(pos_sorted, thresholds, side="left")
    far = n_neg_ge / len(neg_scores)
    frr = n_pos_lt / len(pos_scores)
    return thresholds, far, frr


def eer_binary(scores, is_positive, method="midpoint"):
    """Equal error rate of a binary score column."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(is_positive, dtype=bool)
    if scores.shape != positive.shape or scores.ndim != 1:
        raise DataError("scores and flags must be equal-length vectors")
    if positive.all() or not positive.any():
        raise DataError("EER undefined without both positives and negatives")
    _, far, frr = _sweep_rates(scores, positive)
    if method == "midpoint":
        gap = np.abs(far - frr)
        best = np.lexsort((far + frr, gap))[0]
        return float((far[best] + frr[best]) / 2.0)
    if method == "interpolated":
        # far is non-increasing, frr non-decreasing along the sweep; find the
        # sign change of (frr - far) and interpolate the crossing linearly
        diff = frr - far
        idx = int(np.argmax(diff >= 0))
        if idx == 0:
            return float((far[0] + frr[0]) / 2.0)
        d0, d1 = diff[idx - 1], diff[idx]
        if d1 == d0:
            w = 0.0
        else:
            w = -d0 / (d1 - d0)
        far_c = far[idx - 1] + w * (far[idx] - far[idx - 1])
        frr_c = frr[idx - 1] + w * (frr[idx] - frr[idx - 1])
        return float((far_c + frr_c) / 2.0)
    raise DataError(f"unknown EER method {method!r}")


def eer_ova(probs, labels, method="midpoint"):
    """Per-class one-vs-all EER over probability columns, plus the unweighted mean."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = probs.shape[1]
    present = np.unique(labels)
    for c in range(n_classes):
        if c not in present:
            raise DataError(f"class {c} absent from labels")
    per_class = np.array(
        [eer_binary(probs[:, c], labels == c, method=method) for c in range(n_classes)]
    )
    return per_class, float(per_class.mean())


def confusion_matrix(preds, labels, n_classes):
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    for name, arr in (("prediction", preds), ("label", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise DataError(f"{name} out of range for {n_classes} classes")
    flat = labels * n_classes + preds
    return np.bincount(flat, minlength=n_classes * n_classes).reshape(
        n_classes, n_classes
    )


@dataclass
class MetricsReport:
    accuracy: float
    eer_per_class: np.ndarray
    eer_avg: float
    confusion: np.ndarray
    n: int
    class_names: list

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "eer_avg": self.eer_avg,
            "eer_per_class": [float(v) for v in self.eer_per_class],
            "confusion": self.confusion.astype(int).tolist(),
            "n": int(self.n),
            "class_names": list(self.class_names),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def write_confusion_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred"] + list(self.class_names))
            for name, row in zip(self.class_names, self.confusion):
                writer.writerow([name] + [int(v) for v in row])

    def summary_line(self):
        return f"acc={100 * self.accuracy:.2f} eer={100 * self.eer_avg:.2f}"


def report_from_probs(probs, labels, class_names, eer_method="midpoint"):
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    preds = predict_labels(probs)
    n_classes = len(class_names)
    per_class, avg = eer_ova(probs, labels, method=eer_method)
    return MetricsReport(
        accuracy=accuracy(preds, labels),
        eer_per_class=per_class,
        eer_avg=avg,
        confusion=confusion_matrix(preds, labels, n_classes),
        n=int(labels.size),
        class_names=list(class_names),
    )

"""Confusion matrices, support-weighted precision/recall/F1, accuracy and the
timing / accuracy-delta arithmetic used by the comparison tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .data import label_code
from .errors import ConfigMismatch, EmptyMatrix, LengthMismatch, NonpositiveBaseline


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class
    classes: tuple

    @property
    def row_normalized(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.counts / totals
        return np.where(totals > 0, out, 0.0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, normalized: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        codes = [label_code(c) for c in self.classes]
        w.writerow(["true\\pred"] + codes)
        data = self.row_normalized if normalized else self.counts
        for code, row in zip(codes, data):
            w.writerow([code] + ([f"{v:.4f}" for v in row] if normalized else [int(v) for v in row]))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        classes = tuple(int(c[1:]) for c in rows[0][1:])
        counts = np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64)
        return cls(counts, classes)


def confusion(y_true, y_pred, classes=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{len(y_true)} true labels vs {len(y_pred)} predictions")
    if classes is None:
        classes = np.union1d(y_true, y_pred)
    classes = tuple(int(c) for c in classes)
    pos = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[pos[int(t)], pos[int(p)]] += 1
    return ConfusionMatrix(counts, classes)


@dataclass
class MetricsReport:
    classes: tuple
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    precision_avg: float
    recall_avg: float
    f1_avg: float
    accuracy: float  # percent
    zero_division: list = field(default_factory=list)  # (class, metric) pairs set to 0 by convention

    def as_percentages(self) -> dict:
        return {
            "Accuracy": self.accuracy,
            "Precision": 100.0 * self.precision_avg,
            "Recall": 100.0 * self.recall_avg,
            "F1-score": 100.0 * self.f1_avg,
        }

    def to_dict(self) -> dict:
        return {
            "classes": [label_code(c) for c in self.classes],
            "per_class": {
                label_code(c): {"precision": float(p), "recall": float(r), "f1": float(f), "support": int(s)}
                for c, p, r, f, s in zip(self.classes, self.precision, self.recall, self.f1, self.support)
            },
            "precision_avg": self.precision_avg,
            "recall_avg": self.recall_avg,
            "f1_avg": self.f1_avg,
            "accuracy": self.accuracy,
            "zero_division": [[label_code(c), m] for c, m in self.zero_division],
        }


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class one-vs-rest precision/recall/F1 and their support-weighted means.

    Zero denominators give 0 and are listed in ``zero_division``.
    """
    C = cm.counts.astype(np.float64)
    total = C.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix holds no predictions")
    tp = np.diag(C)
    pred_pos = C.sum(axis=0)
    support = C.sum(axis=1)
    flags = []
    P = np.zeros(len(tp))
    R = np.zeros(len(tp))
    F = np.zeros(len(tp))
    for i, c in enumerate(cm.classes):
        if pred_pos[i] > 0:
            P[i] = tp[i] / pred_pos[i]
        else:
            flags.append((c, "precision"))
        if support[i] > 0:
            R[i] = tp[i] / support[i]
        else:
            flags.append((c, "recall"))
        if P[i] + R[i] > 0:
            F[i] = 2 * P[i] * R[i] / (P[i] + R[i])
        else:
            flags.append((c, "f1"))
    w = support / total
    return MetricsReport(
        cm.classes, P, R, F, support.astype(np.int64),
        float(w @ P), float(w @ R), float(w @ F),
        float(tp.sum() / total * 100.0), flags,
    )


@dataclass(frozen=True)
class TimingRecord:
    seconds_without_fs: float
    seconds_with_fs: float

    @property
    def improvement_percent(self) -> float:
        return improvement(self.seconds_without_fs, self.seconds_with_fs)


def improvement(t_without: float, t_with: float) -> float:
    """Relative time saved by feature selection, in percent."""
    if not t_without > 0:
        raise NonpositiveBaseline(f"baseline time must be positive, got {t_without}")
    return (t_without - t_with) / t_without * 100.0


def average_improvement(records) -> float:
    return float(np.mean([r.improvement_percent for r in records]))


def accuracy_delta(report_without, report_with) -> float:
    """Accuracy lost by feature selection, in percentage points.

    Accepts :class:`MetricsReport` objects or bare accuracy percentages.
    """
    if isinstance(report_without, MetricsReport) and isinstance(report_with, MetricsReport):
        if tuple(report_without.classes) != tuple(report_with.classes):
            raise ConfigMismatch("reports cover different class sets")
        return report_without.accuracy - report_with.accuracy
    acc_wo = report_without.accuracy if isinstance(report_without, MetricsReport) else float(report_without)
    acc_w = report_with.accuracy if isinstance(report_with, MetricsReport) else float(report_with)
    return acc_wo - acc_w


def fmt2(x: float) -> str:
    """Two-decimal rendering used in every table."""
    return f"{x:.2f}"

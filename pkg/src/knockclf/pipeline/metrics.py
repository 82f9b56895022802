"""Confusion matrices, one-vs-rest metrics and the Welch t-test model comparison."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

N_CLASSES = 3

# Published indicator values: accuracy, macro precision, macro recall, F1 (percent).
PUBLISHED_RNN_LSTM = {
    "rnn": (97.42, 97.28, 97.32, 97.22),
    "lstm": (97.42, 97.23, 97.32, 97.20),
}
# Accuracy and F1 of the deep and classical models (percent).
PUBLISHED_MODELS = {
    "rnn": (97.42, 97.22),
    "lstm": (97.42, 97.20),
    "ann": (81.74, 79.27),
    "rf": (83.48, 81.35),
    "svm": (80.00, 76.67),
}


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true labels, columns predicted labels."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (N_CLASSES, N_CLASSES) or np.any(c < 0):
            raise ValueError("confusion counts must be a non-negative 3x3 matrix")
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, c: int):
        """``(TP, FP, FN, TN)`` for class ``c``."""
        m = self.counts
        tp = int(m[c, c])
        fp = int(m[:, c].sum() - tp)
        fn = int(m[c, :].sum() - tp)
        return tp, fp, fn, self.total - tp - fp - fn


def confusion(pairs) -> ConfusionMatrix:
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in pairs:
        if not (0 <= t < N_CLASSES and 0 <= p < N_CLASSES):
            raise ValueError(f"label pair ({t}, {p}) out of range")
        counts[t, p] += 1
    return ConfusionMatrix(counts)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False


@dataclass
class MetricsReport:
    """Percentages in [0, 100]; macro values are unweighted means over classes."""

    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    per_class: list
    confusion: ConfusionMatrix
    extra: dict = field(default_factory=dict)

    @property
    def indicators(self) -> tuple:
        return (self.accuracy, self.precision_macro, self.recall_macro, self.f1_macro)

    def to_dict(self) -> dict:
        d = {
            "version": 1,
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "per_class": [
                {
                    "label": i,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                    "degenerate": c.degenerate,
                }
                for i, c in enumerate(self.per_class)
            ],
            "confusion": self.confusion.counts.tolist(),
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        per_class = [
            ClassMetrics(c["precision"], c["recall"], c["f1"], c["support"], c.get("degenerate", False))
            for c in d["per_class"]
        ]
        known = {"version", "accuracy", "precision_macro", "recall_macro", "f1_macro", "per_class", "confusion"}
        extra = {k: v for k, v in d.items() if k not in known}
        return cls(d["accuracy"], d["precision_macro"], d["recall_macro"], d["f1_macro"],
                   per_class, ConfusionMatrix(np.array(d["confusion"])), extra)


def _ratio(num: float, den: float):
    return (num / den, False) if den > 0 else (0.0, True)


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy plus one-vs-rest precision, recall (TP / (TP + FN)) and F1."""
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    per_class = []
    for c in range(N_CLASSES):
        tp, fp, fn, _ = cm.one_vs_rest(c)
        precision, bad_p = _ratio(tp, tp + fp)
        recall, bad_r = _ratio(tp, tp + fn)
        f1, bad_f = _ratio(2 * precision * recall, precision + recall)
        per_class.append(ClassMetrics(100 * precision, 100 * recall, 100 * f1, tp + fn, bad_p or bad_r or bad_f))
    accuracy = 100.0 * np.trace(cm.counts) / cm.total
    return MetricsReport(
        accuracy=float(accuracy),
        precision_macro=float(np.mean([c.precision for c in per_class])),
        recall_macro=float(np.mean([c.recall for c in per_class])),
        f1_macro=float(np.mean([c.f1 for c in per_class])),
        per_class=per_class,
        confusion=cm,
    )


def welch_p_value(a, b) -> float:
    """Two-sided Welch t-test; zero-variance samples with equal means give 1."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    if np.array_equal(np.sort(a), np.sort(b)):
        return 1.0
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 and vb == 0:
        return 1.0 if a.mean() == b.mean() else 0.0
    p = stats.ttest_ind(a, b, equal_var=False).pvalue
    return float(np.clip(p, 0.0, 1.0))


def comparison_vector(report, include_class_recall: bool = False) -> tuple:
    """Values entering the test: the four indicators, optionally followed by per-class recalls."""
    if not isinstance(report, MetricsReport):
        return tuple(report)
    values = report.indicators
    if include_class_recall:
        values = values + tuple(c.recall for c in report.per_class)
    return values


def compare_models(report_a, report_b, include_class_recall: bool = False) -> float:
    """p-value of a Welch t-test on the two models' indicator vectors.

    Accepts MetricsReports or plain sequences of percentages. With
    ``include_class_recall`` the per-class recalls (the diagonal of the
    row-normalized confusion matrix) are appended to each sample.
    """
    a = comparison_vector(report_a, include_class_recall)
    b = comparison_vector(report_b, include_class_recall)
    return welch_p_value(a, b)


def verdict(p_value: float, alpha: float = 0.05) -> str:
    return "no significant difference" if p_value > alpha else "significant difference"

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from sklearn.metrics import accuracy_score, precision_recall_fscore_support

from csae.errors import EmptyDatasetError, TensorShapeError


@dataclass
class ClassMetrics:
    label: int
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    accuracy: float
    weighted_f1: float
    per_class: List[ClassMetrics] = field(default_factory=list)

    def as_dict(self) -> Dict[str, float]:
        return {"accuracy": self.accuracy, "weighted_f1": self.weighted_f1}


def _validate(y_true, y_pred):
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise TensorShapeError(f"Label vectors differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise EmptyDatasetError("Metrics need at least one sample")
    return y_true, y_pred


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = _validate(y_true, y_pred)
    return float(accuracy_score(y_true, y_pred))


def _per_class(y_true, y_pred):
    # every label seen in either vector; labels absent from y_true get support 0
    labels = np.union1d(y_true, y_pred)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, zero_division=0
    )
    return labels, precision, recall, f1, support


def weighted_f1(y_true, y_pred) -> float:
    """Per-class F1 averaged with weights proportional to true-label support."""
    y_true, y_pred = _validate(y_true, y_pred)
    _, _, _, f1, support = _per_class(y_true, y_pred)
    return float(np.sum(f1 * support) / np.sum(support))


def metrics_report(y_true, y_pred) -> MetricsReport:
    y_true, y_pred = _validate(y_true, y_pred)
    labels, precision, recall, f1, support = _per_class(y_true, y_pred)
    per_class = [
        ClassMetrics(int(c), float(p), float(r), float(f), int(s))
        for c, p, r, f, s in zip(labels, precision, recall, f1, support)
    ]
    return MetricsReport(
        accuracy=float(accuracy_score(y_true, y_pred)),
        weighted_f1=float(np.sum(f1 * support) / np.sum(support)),
        per_class=per_class,
    )

"""Classification metrics for trained models."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    average_precision_score,
    f1_score,
    roc_auc_score,
)
from sklearn.preprocessing import label_binarize


@dataclass(frozen=True)
class EvalMetrics:
    pr_auc: float
    roc_auc: float
    accuracy: float
    f1: float
    f1_weighted: float
    f1_macro: float
    f1_micro: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(model, records, y=None) -> EvalMetrics:
    """Score a fitted model on records (labels from the records unless given)."""
    labels = np.asarray([r.label for r in records] if y is None else y, dtype=int)
    probs = model.predict_proba(records)
    preds = probs.argmax(axis=1)
    n_classes = probs.shape[1]
    binary = n_classes == 2
    try:
        # A degenerate split (single class present) makes the ranking metrics
        # undefined; sklearn warns and/or raises, we report NaN quietly.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if binary:
                if len(np.unique(labels)) < 2:
                    raise ValueError("one class present")
                roc = roc_auc_score(labels, probs[:, 1])
                pr = average_precision_score(labels, probs[:, 1])
            else:
                roc = roc_auc_score(
                    labels, probs, multi_class="ovr", average="macro", labels=np.arange(n_classes)
                )
                onehot = label_binarize(labels, classes=np.arange(n_classes))
                pr = average_precision_score(onehot, probs, average="macro")
    except ValueError:
        roc, pr = float("nan"), float("nan")
    f1_plain = f1_score(
        labels, preds, average="binary" if binary else "macro", zero_division=0
    )
    return EvalMetrics(
        pr_auc=float(pr),
        roc_auc=float(roc),
        accuracy=float(accuracy_score(labels, preds)),
        f1=float(f1_plain),
        f1_weighted=float(f1_score(labels, preds, average="weighted", zero_division=0)),
        f1_macro=float(f1_score(labels, preds, average="macro", zero_division=0)),
        f1_micro=float(f1_score(labels, preds, average="micro", zero_division=0)),
        n=len(records),
    )

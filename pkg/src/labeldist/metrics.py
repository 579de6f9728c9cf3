"""Accuracy family, Cohen's kappa and test-set cross-entropies."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .calibration import Predictions
from .labels import one_hot
from .network import loss_ce


@dataclass
class ScoreReport:
    oa: float
    maa: float
    waa: float
    kappa: float
    ce_onehot: float
    ce_distr: float
    n: int
    inf_ce_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(true_class, predicted_class, k: int | None = None) -> np.ndarray:
    """Rows are reference (majority) classes, columns predicted classes."""
    t = np.asarray(true_class, dtype=np.int64)
    p = np.asarray(predicted_class, dtype=np.int64)
    if k is None:
        k = int(max(t.max(), p.max())) + 1
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def accuracy_suite(cm) -> tuple[float, float, float]:
    """Overall, macro-average and weighted-average accuracy.

    MAA averages per-class recall over classes that occur in the reference
    labels. WAA is the support-weighted mean of the one-vs-rest accuracy
    ``(TP + TN) / n`` of each class.
    """
    cm = np.asarray(cm, dtype=float)
    n = cm.sum()
    if n == 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    oa = tp.sum() / n
    has = support > 0
    maa = float(np.mean(tp[has] / support[has]))
    tn = n - support - predicted + tp
    binary_acc = (tp + tn) / n
    waa = float(np.sum(support * binary_acc) / n)
    return float(oa), maa, waa


def kappa(cm) -> float:
    """Cohen's kappa; 0 when chance agreement is already 1."""
    cm = np.asarray(cm, dtype=float)
    n = cm.sum()
    p_o = np.trace(cm) / n
    p_e = float(np.sum(cm.sum(axis=1) * cm.sum(axis=0))) / n**2
    if p_e == 1.0:
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def generalization_ce(preds: Predictions) -> tuple[float, float, int]:
    """Mean CE against one-hot majority labels and against distributional labels.

    Samples with an infinite cross-entropy are counted in the third return
    value; the means then are ``inf``.
    """
    ce_hot = loss_ce(one_hot(preds.true_class, preds.n_classes), preds.probs)
    ce_dist = loss_ce(preds.true_dist, preds.probs)
    inf_count = int(np.sum(~np.isfinite(ce_hot) | ~np.isfinite(ce_dist)))
    return float(np.mean(ce_hot)), float(np.mean(ce_dist)), inf_count


def score(preds: Predictions) -> ScoreReport:
    cm = confusion(preds.true_class, preds.predicted_class, preds.n_classes)
    oa, maa, waa = accuracy_suite(cm)
    ce_hot, ce_dist, inf_count = generalization_ce(preds)
    return ScoreReport(oa=oa, maa=maa, waa=waa, kappa=kappa(cm), ce_onehot=ce_hot,
                       ce_distr=ce_dist, n=len(preds), inf_ce_count=inf_count)


def confusion_csv(cm) -> str:
    """Confusion matrix with 1-based class indices on the header row and column."""
    cm = np.asarray(cm)
    k = cm.shape[0]
    lines = ["true\\pred," + ",".join(str(c + 1) for c in range(k))]
    for r in range(k):
        lines.append(f"{r + 1}," + ",".join(str(int(v)) for v in cm[r]))
    return "\n".join(lines) + "\n"

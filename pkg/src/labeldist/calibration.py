"""Binned calibration errors, reliability tables and temperature scaling.

Confidence bins are the right-closed intervals ``((m-1)/M, m/M]`` for
``m = 1..M``; accuracy and confidence inside a bin are within-bin means.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .network import log_softmax, softmax

DEFAULT_BIN_COUNTS = (10, 15, 20, 25)


class CalibrationError(ValueError):
    pass


@dataclass
class Predictions:
    """Predicted distributions for a set of samples plus their reference labels.

    ``true_class`` is the majority-vote class; ``true_dist`` the
    distributional label (defaults to the one-hot of ``true_class``).
    """

    probs: np.ndarray
    true_class: np.ndarray
    true_dist: np.ndarray | None = None
    sample_ids: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        self.true_class = np.asarray(self.true_class, dtype=np.int64).reshape(-1)
        n, k = self.probs.shape
        if len(self.true_class) != n:
            raise CalibrationError("probs and true_class disagree on sample count")
        if n and (self.true_class.min() < 0 or self.true_class.max() >= k):
            raise CalibrationError("true_class outside 0..K-1")
        if self.true_dist is None:
            self.true_dist = np.eye(k)[self.true_class]
        else:
            self.true_dist = np.atleast_2d(np.asarray(self.true_dist, dtype=float))

    def __len__(self):
        return len(self.probs)

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    @property
    def confidence(self) -> np.ndarray:
        return self.probs.max(axis=1)

    @property
    def predicted_class(self) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. lowest index on ties
        return self.probs.argmax(axis=1)

    @property
    def correct(self) -> np.ndarray:
        return self.predicted_class == self.true_class


@dataclass(frozen=True)
class BinStatistics:
    index: int
    lower: float
    upper: float
    count: int
    mean_accuracy: float | None
    mean_confidence: float | None

    @property
    def empty(self) -> bool:
        return self.count == 0

    @property
    def gap(self) -> float | None:
        if self.empty:
            return None
        return abs(self.mean_accuracy - self.mean_confidence)


def bin_edges(n_bins: int) -> np.ndarray:
    return np.arange(n_bins + 1) / n_bins


def bin_index(values, n_bins: int) -> np.ndarray:
    """0-based bin of each value under right-closed bins ``(m-1)/M < v <= m/M``.

    Values of exactly 0 fall in the first bin.
    """
    edges = bin_edges(n_bins)
    idx = np.searchsorted(edges, np.asarray(values, dtype=float), side="left") - 1
    return np.clip(idx, 0, n_bins - 1)


def assign_bins(confidence, correct, n_bins: int) -> list[BinStatistics]:
    """Group predictions into equal-width confidence bins.

    Parameters
    ----------
    confidence : (n,) array
        Top predicted probability per sample, each in (0, 1].
    correct : (n,) bool array
        Whether the predicted class equals the reference class.
    n_bins : int
    """
    conf = np.asarray(confidence, dtype=float).reshape(-1)
    hit = np.asarray(correct, dtype=float).reshape(-1)
    if n_bins < 1:
        raise CalibrationError("n_bins must be >= 1")
    if conf.size == 0:
        raise CalibrationError("no predictions to bin")
    if conf.shape != hit.shape:
        raise CalibrationError("confidence and correct must have the same length")
    if np.any(~(conf > 0) | (conf > 1)):
        raise CalibrationError("confidences must lie in (0, 1]")
    idx = bin_index(conf, n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    acc_sum = np.bincount(idx, weights=hit, minlength=n_bins)
    conf_sum = np.bincount(idx, weights=conf, minlength=n_bins)
    edges = bin_edges(n_bins)
    out = []
    for m in range(n_bins):
        c = int(counts[m])
        out.append(BinStatistics(
            index=m + 1,
            lower=float(edges[m]),
            upper=float(edges[m + 1]),
            count=c,
            mean_accuracy=float(acc_sum[m] / c) if c else None,
            mean_confidence=float(conf_sum[m] / c) if c else None,
        ))
    return out


def bins_for(preds: Predictions, n_bins: int) -> list[BinStatistics]:
    return assign_bins(preds.confidence, preds.correct, n_bins)


def ece(bins: list[BinStatistics]) -> float:
    n = sum(b.count for b in bins)
    return float(sum(b.count / n * b.gap for b in bins if not b.empty))


def mce(bins: list[BinStatistics]) -> float:
    gaps = [b.gap for b in bins if not b.empty]
    return float(max(gaps)) if gaps else 0.0


def sce(preds: Predictions, n_bins: int) -> float:
    """Static (class-wise) calibration error.

    For every class, samples are binned by their predicted probability for
    that class; the bin accuracy is the share of samples whose reference
    class is that class. Bin weights are bin sizes over ``n``.
    """
    n, k = preds.probs.shape
    total = 0.0
    for c in range(k):
        p = preds.probs[:, c]
        idx = bin_index(p, n_bins)
        counts = np.bincount(idx, minlength=n_bins)
        hits = np.bincount(idx, weights=(preds.true_class == c).astype(float), minlength=n_bins)
        conf = np.bincount(idx, weights=p, minlength=n_bins)
        nz = counts > 0
        gaps = np.abs(hits[nz] - conf[nz]) / counts[nz]
        total += float(np.sum(counts[nz] / n * gaps))
    return total / k


@dataclass
class ReliabilityRow:
    bin: int
    lower: float
    upper: float
    count: int
    accuracy: float | None
    confidence: float | None
    gap: float | None


@dataclass
class ReliabilityTable:
    rows: list[ReliabilityRow]
    overall_accuracy: float
    mean_confidence: float
    n: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin", "lower", "upper", "count", "accuracy", "confidence", "gap"])
        fmt = lambda v: "" if v is None else repr(v)  # noqa: E731
        for r in self.rows:
            w.writerow([r.bin, repr(r.lower), repr(r.upper), r.count,
                        fmt(r.accuracy), fmt(r.confidence), fmt(r.gap)])
        w.writerow(["summary", "0.0", "1.0", self.n, repr(self.overall_accuracy),
                    repr(self.mean_confidence),
                    repr(abs(self.overall_accuracy - self.mean_confidence))])
        return buf.getvalue()


def reliability_data(bins: list[BinStatistics], preds: Predictions) -> ReliabilityTable:
    rows = [ReliabilityRow(b.index, b.lower, b.upper, b.count,
                           b.mean_accuracy, b.mean_confidence, b.gap) for b in bins]
    return ReliabilityTable(
        rows=rows,
        overall_accuracy=float(np.mean(preds.correct)),
        mean_confidence=float(np.mean(preds.confidence)),
        n=len(preds),
    )


def reliability_svg(table: ReliabilityTable, title: str = "", size: int = 360) -> str:
    """Reliability diagram as a standalone SVG string.

    Blue bars show per-bin accuracy, red hatched boxes the gap to the bin's
    mean confidence, and the dashed diagonal marks perfect calibration.
    """
    pad = 40
    plot = size - 2 * pad
    x = lambda v: pad + v * plot  # noqa: E731
    y = lambda v: size - pad - v * plot  # noqa: E731
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">',
        f'<rect x="{pad}" y="{pad}" width="{plot}" height="{plot}" fill="white" stroke="black"/>',
    ]
    for r in table.rows:
        if r.count == 0:
            continue
        left, width = x(r.lower), (r.upper - r.lower) * plot
        parts.append(f'<rect x="{left:.2f}" y="{y(r.accuracy):.2f}" width="{width:.2f}" '
                     f'height="{r.accuracy * plot:.2f}" fill="#3b6fb6" stroke="#1d3c6b"/>')
        lo, hi = sorted((r.accuracy, r.confidence))
        parts.append(f'<rect x="{left:.2f}" y="{y(hi):.2f}" width="{width:.2f}" '
                     f'height="{(hi - lo) * plot:.2f}" fill="#d9534f" fill-opacity="0.35" '
                     f'stroke="#d9534f"/>')
    parts.append(f'<line x1="{x(0)}" y1="{y(0)}" x2="{x(1)}" y2="{y(1)}" '
                 f'stroke="gray" stroke-dasharray="4 3"/>')
    parts.append(f'<text x="{size / 2}" y="{size - 8}" text-anchor="middle">confidence</text>')
    parts.append(f'<text x="12" y="{size / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 12 {size / 2})">accuracy</text>')
    label = (f"acc {table.overall_accuracy:.3f} / conf {table.mean_confidence:.3f}")
    parts.append(f'<text x="{pad + 6}" y="{pad + 16}">{label}</text>')
    if title:
        parts.append(f'<text x="{size / 2}" y="{pad - 12}" text-anchor="middle">{title}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def calibration_report(preds: Predictions, bin_counts=DEFAULT_BIN_COUNTS) -> list[dict]:
    """ECE/MCE/SCE for each bin count, as raw fractions and percentages."""
    out = []
    for m in bin_counts:
        bins = bins_for(preds, m)
        e, mx, s = ece(bins), mce(bins), sce(preds, m)
        out.append({"bins": int(m), "n": len(preds), "ece": e, "mce": mx, "sce": s,
                    "ece_pct": 100 * e, "mce_pct": 100 * mx, "sce_pct": 100 * s})
    return out


def apply_temperature(logits, t: float) -> np.ndarray:
    """``softmax(logits / t)``."""
    if not (np.isfinite(t) and t > 0):
        raise CalibrationError(f"temperature must be positive and finite, got {t}")
    return softmax(np.asarray(logits, dtype=float) / t)


def temperature_nll(logits, true_class, t: float) -> float:
    z = np.atleast_2d(np.asarray(logits, dtype=float)) / t
    y = np.asarray(true_class, dtype=np.int64)
    return float(-np.mean(log_softmax(z)[np.arange(len(y)), y]))


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 0.01
    max_iter: int = 10_000
    t_min: float = 0.05
    t_max: float = 20.0
    tol: float = 1e-12


def fit_temperature(logits, true_class, config: FitConfig = FitConfig()) -> float:
    """Fit a temperature on validation logits by minimising mean NLL.

    Gradient descent runs on ``log T`` and is clamped to
    ``[t_min, t_max]``. The result is never worse than ``T = 1``.
    """
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    y = np.asarray(true_class, dtype=np.int64)
    if len(z) == 0 or len(z) != len(y):
        raise CalibrationError("need matching, non-empty logits and labels")
    nll_one = temperature_nll(z, y, 1.0)
    if not np.isfinite(nll_one):
        raise CalibrationError("validation NLL at T=1 is not finite")

    rows = np.arange(len(y))
    zy = z[rows, y]
    lo, hi = np.log(config.t_min), np.log(config.t_max)
    s = 0.0
    for _ in range(config.max_iter):
        t = np.exp(s)
        p = softmax(z / t)
        # d NLL / d s = mean(zy - E_p[z]) / t
        grad = float(np.mean(zy - (p * z).sum(axis=1))) / t
        s_new = min(max(s - config.learning_rate * grad, lo), hi)
        if abs(s_new - s) < config.tol:
            s = s_new
            break
        s = s_new
    t = float(np.exp(s))
    return t if temperature_nll(z, y, t) <= nll_one else 1.0

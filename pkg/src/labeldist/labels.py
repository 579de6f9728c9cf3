"""Labels from annotator votes.

Turns raw per-sample votes into vote counts, majority (one-hot) labels,
distributional labels and smoothed labels, and measures how much the
annotators disagree (vote entropy, voter-vs-majority confusion).

Class indices are 0-based everywhere in Python. The CSV formats in
:mod:`labeldist.io` use 1-based indices and convert at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class LabelError(ValueError):
    """Raised for votes, counts or labels outside their valid domain."""


@dataclass(frozen=True)
class VoteRecord:
    sample_id: str
    group_id: str
    votes: tuple[int, ...]


@dataclass(frozen=True)
class MajorityResult:
    label: np.ndarray
    winner: int
    tied: bool


def tally_votes(record: VoteRecord, k: int) -> np.ndarray:
    """Count the votes of one record into a length-``k`` integer vector."""
    votes = np.asarray(record.votes, dtype=np.int64)
    if votes.size == 0:
        raise LabelError(f"sample {record.sample_id!r} has no votes")
    bad = (votes < 0) | (votes >= k)
    if bad.any():
        raise LabelError(
            f"sample {record.sample_id!r}: vote {int(votes[bad][0])} outside 0..{k - 1}"
        )
    return np.bincount(votes, minlength=k)


def tally_matrix(votes: np.ndarray, k: int) -> np.ndarray:
    """Vectorised :func:`tally_votes` for an ``(n, J)`` vote matrix."""
    votes = np.asarray(votes, dtype=np.int64)
    if votes.ndim != 2:
        raise LabelError("vote matrix must be 2-d (samples x annotators)")
    if votes.size and (votes.min() < 0 or votes.max() >= k):
        row = int(np.argwhere((votes < 0) | (votes >= k))[0, 0])
        raise LabelError(f"row {row}: vote outside 0..{k - 1}")
    n = votes.shape[0]
    counts = np.zeros((n, k), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(n), votes.shape[1]), votes.ravel()), 1)
    return counts


def _check_counts(counts) -> np.ndarray:
    counts = np.asarray(counts)
    if np.any(counts < 0):
        raise LabelError("vote counts must be non-negative")
    if np.any(counts.sum(axis=-1) == 0):
        raise LabelError("vote counts sum to zero")
    return counts


def majority_label(counts) -> MajorityResult:
    """Majority vote of one count vector.

    Ties go to the lowest class index; ``tied`` reports whether one happened.
    """
    counts = _check_counts(counts)
    winner = int(np.argmax(counts))
    tied = int(np.sum(counts == counts[winner])) > 1
    label = np.zeros(counts.shape[-1])
    label[winner] = 1.0
    return MajorityResult(label=label, winner=winner, tied=tied)


def majority_winners(counts) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise majority winners and tie flags for an ``(n, K)`` count matrix."""
    counts = _check_counts(counts)
    winners = np.argmax(counts, axis=1)
    top = counts[np.arange(len(counts)), winners]
    tied = (counts == top[:, None]).sum(axis=1) > 1
    return winners, tied


def one_hot(classes, k: int) -> np.ndarray:
    classes = np.asarray(classes, dtype=np.int64)
    out = np.zeros(classes.shape + (k,))
    np.put_along_axis(out, classes[..., None], 1.0, axis=-1)
    return out


def distributional_label(counts) -> np.ndarray:
    """Empirical vote distribution ``counts / M``; works row-wise on matrices."""
    counts = _check_counts(counts)
    return counts / counts.sum(axis=-1, keepdims=True)


def smooth_label(label, alpha: float) -> np.ndarray:
    """Mix ``label`` with the uniform distribution: ``alpha/K + (1 - alpha) * label``."""
    if not 0.0 <= alpha <= 1.0:
        raise LabelError(f"smoothing alpha must lie in [0, 1], got {alpha}")
    label = np.asarray(label, dtype=float)
    k = label.shape[-1]
    return alpha / k + (1.0 - alpha) * label


def vote_entropy(label) -> np.ndarray | float:
    """Shannon entropy in nats; zero-probability classes contribute exactly 0."""
    p = np.asarray(label, dtype=float)
    terms = np.zeros_like(p)
    nz = p > 0
    terms[nz] = p[nz] * np.log(p[nz])
    h = -terms.sum(axis=-1)
    # -0.0 for one-hot rows
    h = h + 0.0
    return float(h) if np.ndim(h) == 0 else h


def voter_confusion(records: Iterable[VoteRecord], k: int) -> np.ndarray:
    """Individual votes (columns) against the sample's majority class (rows)."""
    records = list(records)
    if not records:
        raise LabelError("voter_confusion needs at least one record")
    cm = np.zeros((k, k), dtype=np.int64)
    for rec in records:
        counts = tally_votes(rec, k)
        cm[majority_label(counts).winner] += counts
    return cm


def voter_confusion_from_counts(counts) -> np.ndarray:
    counts = _check_counts(counts)
    winners, _ = majority_winners(counts)
    k = counts.shape[1]
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, winners, counts)
    return cm


def filter_class_subset(counts, keep: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Restrict count vectors to a subset of classes.

    Samples whose majority (over all classes) falls outside ``keep`` are
    dropped. The surviving rows lose their votes for classes outside the
    subset, so their vote total shrinks accordingly.

    Returns
    -------
    mask : (n,) bool
        Which input rows survive.
    counts : (n_kept, len(keep)) int
        Counts re-indexed so column ``i`` is class ``keep[i]``.
    """
    counts = _check_counts(counts)
    keep = np.asarray(keep, dtype=np.int64)
    if keep.size == 0:
        raise LabelError("class subset is empty")
    winners, _ = majority_winners(counts)
    mask = np.isin(winners, keep)
    return mask, counts[mask][:, keep]

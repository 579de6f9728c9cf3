"""Dataset container and the CSV file formats.

Vote files: ``sample_id,group_id,v1,...,vJ`` (one 1-based class index per
annotator) or ``sample_id,group_id,c1,...,cK`` (vote counts per class).
Feature files: ``sample_id,group_id,f1,...,fD``. Latent files:
``sample_id,p1,...,pK``.
"""

from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .labels import (LabelError, VoteRecord, distributional_label, majority_winners,
                     tally_matrix)


class FormatError(ValueError):
    pass


@dataclass
class Dataset:
    """Parallel arrays describing ``n`` samples.

    ``counts`` is always present; ``votes`` (``(n, J)``, 0-based) only when
    individual votes are known. ``latent`` holds the generator's true class
    distribution when the data are synthetic.
    """

    sample_ids: np.ndarray
    group_ids: np.ndarray
    counts: np.ndarray
    features: np.ndarray | None = None
    votes: np.ndarray | None = None
    latent: np.ndarray | None = None

    def __post_init__(self):
        self.sample_ids = np.asarray(self.sample_ids, dtype=object)
        self.group_ids = np.asarray(self.group_ids, dtype=object)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.sample_ids)
        if len(self.group_ids) != n or len(self.counts) != n:
            raise ValueError("dataset arrays disagree on sample count")

    @classmethod
    def from_votes(cls, sample_ids, group_ids, votes, k, **kw) -> "Dataset":
        votes = np.asarray(votes, dtype=np.int64)
        return cls(sample_ids, group_ids, tally_matrix(votes, k), votes=votes, **kw)

    def __len__(self):
        return len(self.sample_ids)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def majority(self) -> np.ndarray:
        return majority_winners(self.counts)[0]

    @property
    def tied(self) -> np.ndarray:
        return majority_winners(self.counts)[1]

    @property
    def distributional(self) -> np.ndarray:
        return distributional_label(self.counts)

    def subset(self, index) -> "Dataset":
        pick = lambda a: None if a is None else a[index]  # noqa: E731
        return Dataset(self.sample_ids[index], self.group_ids[index], self.counts[index],
                       pick(self.features), pick(self.votes), pick(self.latent))

    def records(self):
        if self.votes is None:
            raise LabelError("dataset only carries vote counts")
        for sid, gid, v in zip(self.sample_ids, self.group_ids, self.votes):
            yield VoteRecord(str(sid), str(gid), tuple(int(x) for x in v))

    def digest(self) -> str:
        """SHA-256 over ids, counts and features; identifies a data set."""
        h = hashlib.sha256()
        h.update("\x1f".join(map(str, self.sample_ids)).encode())
        h.update(np.ascontiguousarray(self.counts, dtype="<i8").tobytes())
        if self.features is not None:
            h.update(np.ascontiguousarray(self.features, dtype="<f8").tobytes())
        return h.hexdigest()


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        return header, [(i + 2, row) for i, row in enumerate(reader) if row]


def _numbered(header, prefix) -> bool:
    tail = header[2:]
    return bool(tail) and all(re.fullmatch(prefix + r"\d+", h) for h in tail)


def read_votes(path, k: int | None = None) -> Dataset:
    """Read a vote CSV in either per-annotator or count form (by header)."""
    header, rows = _read_rows(path)
    if header[:2] != ["sample_id", "group_id"]:
        raise FormatError(f"{path}:1: header must start with sample_id,group_id")
    if _numbered(header, "v"):
        kind = "votes"
    elif _numbered(header, "c"):
        kind = "counts"
    else:
        raise FormatError(f"{path}:1: expected v1..vJ or c1..cK columns")
    width = len(header) - 2
    ids, groups, values = [], [], []
    for line, row in rows:
        if len(row) != width + 2:
            raise FormatError(f"{path}:{line}: expected {width + 2} fields, got {len(row)}")
        try:
            values.append([int(x) for x in row[2:]])
        except ValueError:
            raise FormatError(f"{path}:{line}: non-integer vote entry") from None
        ids.append(row[0])
        groups.append(row[1])
    values = np.asarray(values, dtype=np.int64).reshape(len(rows), width)
    if kind == "counts":
        if k is not None and k != width:
            raise FormatError(f"{path}: file has {width} classes, expected {k}")
        if np.any(values < 0):
            line = rows[int(np.argwhere(values < 0)[0, 0])][0]
            raise FormatError(f"{path}:{line}: negative vote count")
        return Dataset(ids, groups, values)
    if k is None:
        k = int(values.max()) if values.size else 1
    bad = (values < 1) | (values > k)
    if bad.any():
        r = int(np.argwhere(bad)[0, 0])
        raise FormatError(f"{path}:{rows[r][0]}: sample {ids[r]!r} has a vote outside 1..{k}")
    return Dataset.from_votes(ids, groups, values - 1, k)


def write_votes(ds: Dataset, path, form: str = "votes") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if form == "votes" and ds.votes is not None:
            w.writerow(["sample_id", "group_id"] + [f"v{j + 1}" for j in range(ds.votes.shape[1])])
            for sid, gid, v in zip(ds.sample_ids, ds.group_ids, ds.votes):
                w.writerow([sid, gid, *(int(x) + 1 for x in v)])
        else:
            w.writerow(["sample_id", "group_id"] + [f"c{c + 1}" for c in range(ds.n_classes)])
            for sid, gid, c in zip(ds.sample_ids, ds.group_ids, ds.counts):
                w.writerow([sid, gid, *(int(x) for x in c)])


def write_features(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "group_id"] + [f"f{d + 1}" for d in range(ds.features.shape[1])])
        for sid, gid, f in zip(ds.sample_ids, ds.group_ids, ds.features):
            w.writerow([sid, gid, *(repr(float(x)) for x in f)])


def read_features(path) -> tuple[list[str], np.ndarray]:
    header, rows = _read_rows(path)
    if header[:2] != ["sample_id", "group_id"] or not _numbered(header, "f"):
        raise FormatError(f"{path}:1: header must be sample_id,group_id,f1,...,fD")
    ids, feats = [], []
    for line, row in rows:
        if len(row) != len(header):
            raise FormatError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        try:
            feats.append([float(x) for x in row[2:]])
        except ValueError:
            raise FormatError(f"{path}:{line}: non-numeric feature") from None
        ids.append(row[0])
    return ids, np.asarray(feats, dtype=float).reshape(len(rows), len(header) - 2)


def write_latent(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id"] + [f"p{c + 1}" for c in range(ds.latent.shape[1])])
        for sid, p in zip(ds.sample_ids, ds.latent):
            w.writerow([sid, *(repr(float(x)) for x in p)])


def read_latent(path) -> tuple[list[str], np.ndarray]:
    header, rows = _read_rows(path)
    ids = [row[0] for _, row in rows]
    vals = np.asarray([[float(x) for x in row[1:]] for _, row in rows], dtype=float)
    return ids, vals.reshape(len(rows), len(header) - 1)


def save_dataset(ds: Dataset, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_votes(ds, d / "votes.csv")
    if ds.features is not None:
        write_features(ds, d / "features.csv")
    if ds.latent is not None:
        write_latent(ds, d / "latent.csv")


def load_dataset(directory, k: int | None = None) -> Dataset:
    d = Path(directory)
    ds = read_votes(d / "votes.csv", k)
    index = {sid: i for i, sid in enumerate(ds.sample_ids)}
    if (d / "features.csv").exists():
        ids, feats = read_features(d / "features.csv")
        ds.features = _align(ids, feats, index, "features.csv")
    if (d / "latent.csv").exists():
        ids, lat = read_latent(d / "latent.csv")
        ds.latent = _align(ids, lat, index, "latent.csv")
    return ds


def _align(ids, values, index, name):
    if len(ids) != len(index):
        raise FormatError(f"{name}: {len(ids)} rows but {len(index)} samples in votes.csv")
    out = np.empty_like(values)
    for sid, row in zip(ids, values):
        if sid not in index:
            raise FormatError(f"{name}: unknown sample_id {sid!r}")
        out[index[sid]] = row
    return out

"""Seeded synthetic multi-annotator data and group-level splitting.

Every sample belongs to a group (a stand-in for a city). Features are drawn
around a class center shifted by a per-group offset, so that groups held out
from training look systematically different. Each sample also gets a latent
class distribution that leaks mass from its generating class to classes
whose centers lie close to the sample; the annotators vote independently
from that distribution.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .labels import majority_winners, one_hot, vote_entropy

RNG_NAME = "numpy.Philox"
RNG_VERSION = 1


class ConfigError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class GroupSpec:
    group_id: str
    samples_per_class: tuple[int, ...] | int

    def counts(self, k: int) -> np.ndarray:
        spc = self.samples_per_class
        out = np.full(k, spc, dtype=np.int64) if np.isscalar(spc) else np.asarray(spc, dtype=np.int64)
        if out.shape != (k,) or np.any(out < 0):
            raise ConfigError(f"group {self.group_id!r}: samples_per_class must be "
                              f"a non-negative int or {k} of them")
        return out


@dataclass(frozen=True)
class GeneratorConfig:
    class_count: int = 10
    feature_dim: int = 16
    groups: tuple[GroupSpec, ...] = ()
    annotators: int = 10
    class_separation: float = 3.0
    ambiguity: float = 1.0
    group_shift: float = 1.0
    feature_noise: float = 1.0
    leak_width: float = 1.0
    seed: int = 0

    def __post_init__(self):
        groups = tuple(g if isinstance(g, GroupSpec) else GroupSpec(**g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if self.class_count < 2:
            raise ConfigError("class_count must be >= 2")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.class_count > 2 * self.feature_dim:
            raise ConfigError(f"{self.class_count} classes do not fit in "
                              f"{self.feature_dim} feature dimensions (max {2 * self.feature_dim})")
        if self.annotators < 1:
            raise ConfigError("annotators must be >= 1")
        if not self.class_separation > 0:
            raise ConfigError("class_separation must be > 0")
        if self.ambiguity < 0 or self.group_shift < 0 or self.feature_noise < 0:
            raise ConfigError("ambiguity, group_shift and feature_noise must be >= 0")
        if not self.leak_width > 0:
            raise ConfigError("leak_width must be > 0")
        if len({g.group_id for g in groups}) != len(groups):
            raise ConfigError("group ids must be unique")
        for g in groups:
            g.counts(self.class_count)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = [{"group_id": g.group_id,
                        "samples_per_class": g.samples_per_class if np.isscalar(g.samples_per_class)
                        else list(g.samples_per_class)} for g in self.groups]
        return d


@dataclass(frozen=True)
class SplitSpec:
    train_groups: tuple[str, ...]
    holdout_groups: tuple[str, ...]
    val_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "train_groups", tuple(self.train_groups))
        object.__setattr__(self, "holdout_groups", tuple(self.holdout_groups))
        if set(self.train_groups) & set(self.holdout_groups):
            raise SplitError("train and holdout groups overlap")
        if not 0.0 <= self.val_fraction <= 1.0:
            raise SplitError("val_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train_groups"] = list(self.train_groups)
        d["holdout_groups"] = list(self.holdout_groups)
        return d


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; same seed gives the same stream on every platform."""
    return np.random.Generator(np.random.Philox(seed))


def class_centers(config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((config.class_count, config.feature_dim))
    # expected squared distance between two centers is class_separation**2
    return g * config.class_separation / np.sqrt(2 * config.feature_dim)


def latent_distribution(x_clean: np.ndarray, true_class: np.ndarray, centers: np.ndarray,
                        ambiguity: float, leak_width: float) -> np.ndarray:
    """``(1 - w) * onehot(true) + w * softmax(-d^2 / (2 leak_width^2))``, ``w = a / (1 + a)``.

    ``d`` is the distance from the group-free feature vector to each class center.
    """
    k = centers.shape[0]
    hot = one_hot(true_class, k)
    if ambiguity == 0:
        return hot
    d2 = ((x_clean[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    s = -d2 / (2 * leak_width**2)
    s -= s.max(axis=1, keepdims=True)
    leak = np.exp(s)
    leak /= leak.sum(axis=1, keepdims=True)
    w = ambiguity / (1.0 + ambiguity)
    return (1.0 - w) * hot + w * leak


def sample_votes(latent: np.ndarray, n_votes: int, rng: np.random.Generator) -> np.ndarray:
    """Independent categorical draws, ``(n, n_votes)`` 0-based class indices."""
    cdf = np.cumsum(latent, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((latent.shape[0], n_votes))
    votes = (u[:, :, None] >= cdf[:, None, :]).sum(axis=2)
    return np.minimum(votes, latent.shape[1] - 1)


def generate(config: GeneratorConfig) -> Dataset:
    """Draw a full synthetic data set; deterministic in ``config.seed``.

    Features are standardised (zero mean, unit variance per dimension) over
    the whole generated set.
    """
    if not config.groups:
        raise ConfigError("at least one group is required")
    rng = make_rng(config.seed)
    k, dim = config.class_count, config.feature_dim
    centers = class_centers(config, rng)
    shifts = rng.standard_normal((len(config.groups), dim)) * config.group_shift / np.sqrt(dim)

    ids, groups, classes, shift_rows = [], [], [], []
    for gi, g in enumerate(config.groups):
        for c, m in enumerate(g.counts(k)):
            classes.extend([c] * int(m))
            groups.extend([g.group_id] * int(m))
            shift_rows.extend([gi] * int(m))
    n = len(classes)
    ids = [f"s{i:06d}" for i in range(n)]
    classes = np.asarray(classes, dtype=np.int64)
    if n == 0:
        raise ConfigError("configuration produces no samples")

    x_clean = centers[classes] + config.feature_noise * rng.standard_normal((n, dim))
    features = x_clean + shifts[np.asarray(shift_rows, dtype=np.int64)]
    latent = latent_distribution(x_clean, classes, centers, config.ambiguity, config.leak_width)
    votes = sample_votes(latent, config.annotators, rng)

    std = features.std(axis=0)
    features = (features - features.mean(axis=0)) / np.where(std > 0, std, 1.0)
    return Dataset.from_votes(ids, groups, votes, k, features=features, latent=latent)


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Group-level split: train groups whole, holdout groups halved sample-wise."""
    train_set, hold_set = set(spec.train_groups), set(spec.holdout_groups)
    unknown = sorted({str(g) for g in data.group_ids} - train_set - hold_set)
    if unknown:
        raise SplitError(f"group ids not covered by the split spec: {unknown}")
    is_train = np.array([g in train_set for g in data.group_ids], dtype=bool)
    hold_idx = np.flatnonzero(~is_train)
    to_val = make_rng(spec.seed).random(len(hold_idx)) < spec.val_fraction
    return (data.subset(np.flatnonzero(is_train)),
            data.subset(hold_idx[to_val]),
            data.subset(hold_idx[~to_val]))


def split_assignment(data: Dataset, spec: SplitSpec) -> dict[str, str]:
    parts = split(data, spec)
    return {str(s): name for name, part in zip(("train", "val", "test"), parts)
            for s in part.sample_ids}


@dataclass
class FrequencyReport:
    """Per class (rows), the share of its samples in train / val / test."""

    fractions: np.ndarray
    class_totals: np.ndarray
    set_totals: np.ndarray
    set_names: tuple[str, ...] = ("train", "val", "test")

    def to_rows(self) -> list[list]:
        rows = [["class", *self.set_names, "total"]]
        for c, (fr, tot) in enumerate(zip(self.fractions, self.class_totals)):
            rows.append([c + 1, *(float(f) for f in fr), int(tot)])
        rows.append(["total", *(int(t) for t in self.set_totals), int(self.set_totals.sum())])
        return rows


def class_frequency_report(train: Dataset, val: Dataset, test: Dataset) -> FrequencyReport:
    k = train.n_classes
    per_set = np.stack([np.bincount(majority_winners(d.counts)[0], minlength=k)
                        if len(d) else np.zeros(k, dtype=np.int64)
                        for d in (train, val, test)], axis=1)
    totals = per_set.sum(axis=1)
    fractions = np.divide(per_set, totals[:, None], out=np.zeros(per_set.shape),
                          where=totals[:, None] > 0)
    return FrequencyReport(fractions, totals, per_set.sum(axis=0))


@dataclass
class EntropySummary:
    edges: np.ndarray
    histograms: dict[str, np.ndarray] = field(default_factory=dict)
    means: dict[str, float] = field(default_factory=dict)
    sizes: dict[str, int] = field(default_factory=dict)


def entropy_summary(data: Dataset, class_groups: dict[str, list[int]] | None = None,
                    n_buckets: int = 10) -> EntropySummary:
    """Histogram of vote entropies, grouped by the majority class.

    ``class_groups`` maps a name to the classes it covers; by default all
    samples form a single group ``"all"``. Bucket edges span ``[0, ln(min(J, K))]``
    where ``J`` is the largest vote total.
    """
    if class_groups is None:
        class_groups = {"all": list(range(data.n_classes))}
    h = vote_entropy(data.distributional)
    winners = data.majority
    m = int(data.counts.sum(axis=1).max())
    top = np.log(max(min(m, data.n_classes), 2))
    edges = np.linspace(0.0, top, n_buckets + 1)
    out = EntropySummary(edges=edges)
    for name, classes in class_groups.items():
        mask = np.isin(winners, classes)
        if not classes or not mask.any():
            raise ValueError(f"class group {name!r} selects no samples")
        hist, _ = np.histogram(np.clip(h[mask], 0.0, top), bins=edges)
        out.histograms[name] = hist
        out.means[name] = float(h[mask].mean())
        out.sizes[name] = int(mask.sum())
    return out


def load_generator_config(path) -> tuple[GeneratorConfig, SplitSpec | None]:
    """Read ``{"generator": {...}, "split": {...}}`` from a JSON document."""
    doc = json.loads(Path(path).read_text())
    gen = GeneratorConfig(**doc["generator"])
    sp = SplitSpec(**doc["split"]) if "split" in doc else None
    return gen, sp

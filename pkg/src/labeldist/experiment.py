"""End-to-end experiments: data, labels, training, calibration, scoring.

One experiment config fixes a data set (generated once from the generator
seed), a label regime and optional calibration steps; it is then trained
once per entry of ``seeds`` and the per-seed scores are aggregated.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import calibration as cal
from .data import Dataset, save_dataset
from .labels import one_hot, smooth_label
from .metrics import confusion, confusion_csv, score
from .network import (Network, NetworkSpec, TrainConfig, forward, predict, save_network,
                      softmax, train)
from .synth import GeneratorConfig, GroupSpec, SplitSpec, generate, split

logger = logging.getLogger(__name__)

LABEL_MODES = ("onehot", "distributional")
DEFAULT_LOSS = {"onehot": "ce_onehot", "distributional": "kl_distr"}
SCORE_KEYS = ("ce_onehot", "ce_distr", "oa", "maa", "waa", "kappa")
CALIBRATION_KEYS = ("ece", "mce", "sce")


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig
    split: SplitSpec
    hidden_dims: tuple[int, ...] = (64, 64)
    dropout_rate: float = 0.2
    train: TrainConfig = TrainConfig()
    label_mode: str = "onehot"
    loss_kind: str | None = None
    allow_loss_override: bool = False
    smoothing_alpha: float | None = None
    temperature_scaling: bool = False
    temperature_fit: cal.FitConfig = cal.FitConfig()
    mc_dropout_passes: int | None = None
    bin_counts: tuple[int, ...] = cal.DEFAULT_BIN_COUNTS
    report_bins: int = 20
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        object.__setattr__(self, "bin_counts", tuple(int(b) for b in self.bin_counts))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.label_mode not in LABEL_MODES:
            raise ExperimentError(f"label_mode must be one of {LABEL_MODES}")
        if self.loss_kind is not None and self.loss_kind != DEFAULT_LOSS[self.label_mode] \
                and not self.allow_loss_override:
            raise ExperimentError(
                f"label_mode {self.label_mode!r} trains with {DEFAULT_LOSS[self.label_mode]!r}; "
                "set allow_loss_override to use a different loss")
        if self.smoothing_alpha is not None and not 0 <= self.smoothing_alpha <= 1:
            raise ExperimentError("smoothing_alpha must lie in [0, 1]")
        if self.mc_dropout_passes is not None and self.mc_dropout_passes < 1:
            raise ExperimentError("mc_dropout_passes must be >= 1")
        if not self.bin_counts or min(self.bin_counts) < 1:
            raise ExperimentError("bin_counts must be positive")
        if self.report_bins not in self.bin_counts:
            raise ExperimentError("report_bins must be one of bin_counts")
        if not self.seeds:
            raise ExperimentError("at least one seed is required")

    @property
    def effective_loss(self) -> str:
        return self.loss_kind or DEFAULT_LOSS[self.label_mode]

    @property
    def network_spec(self) -> NetworkSpec:
        return NetworkSpec(self.generator.feature_dim, self.hidden_dims,
                           self.generator.class_count, self.dropout_rate)

    @property
    def variant(self) -> str:
        name = "One-hot" if self.label_mode == "onehot" else "Distr."
        extras = []
        if self.smoothing_alpha:
            extras.append("LS")
        if self.temperature_scaling:
            extras.append("TS")
        if self.mc_dropout_passes:
            extras.append("MC-Drop")
        return name + (" + " + " & ".join(extras) if extras else "")

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["generator"] = self.generator.to_dict()
        d["split"] = self.split.to_dict()
        d["train"] = asdict(self.train)
        d["temperature_fit"] = asdict(self.temperature_fit)
        for key in ("hidden_dims", "bin_counts", "seeds"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        try:
            doc["generator"] = GeneratorConfig(**doc["generator"])
            doc["split"] = SplitSpec(**doc["split"])
        except KeyError as exc:
            raise ExperimentError(f"config is missing the {exc.args[0]!r} section") from None
        if "train" in doc:
            doc["train"] = TrainConfig(**doc["train"])
        if "temperature_fit" in doc:
            doc["temperature_fit"] = cal.FitConfig(**doc["temperature_fit"])
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ExperimentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def benchmark_config(label_mode: str = "onehot", seeds=(0, 1, 2, 3, 4), **overrides) -> ExperimentConfig:
    """Paired benchmark: 10 classes, 16 features, about 6000/1000/1000 samples.

    Six training groups of 100 samples per class; four held-out groups of 50
    per class split between validation and test. Strong group shifts plus a
    wide network and a fast schedule make one-hot training overconfident on
    the held-out groups, which is the regime the distributional labels target.
    """
    train_groups = tuple(GroupSpec(f"t{i}", 100) for i in range(6))
    holdout = tuple(GroupSpec(f"h{i}", 50) for i in range(4))
    gen = GeneratorConfig(class_count=10, feature_dim=16, groups=train_groups + holdout,
                          ambiguity=1.5, group_shift=3.0, class_separation=3.0, seed=7)
    sp = SplitSpec([g.group_id for g in train_groups], [g.group_id for g in holdout], seed=1)
    params = dict(generator=gen, split=sp, hidden_dims=(256, 256), dropout_rate=0.2,
                  train=TrainConfig(initial_lr=0.02, lr_decay_every_epochs=5),
                  label_mode=label_mode, seeds=tuple(seeds))
    params.update(overrides)
    return ExperimentConfig(**params)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))


def build_targets(data: Dataset, config: ExperimentConfig) -> np.ndarray:
    """Training targets for the configured label mode, smoothed if requested."""
    if config.label_mode == "onehot":
        y = one_hot(data.majority, data.n_classes)
    else:
        y = data.distributional
    if config.smoothing_alpha:
        y = smooth_label(y, config.smoothing_alpha)
    return y


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        return _finite(obj)
    return obj


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


@dataclass
class SeedResult:
    seed: int
    scores: dict
    calibration: list[dict]
    temperature: float | None
    best_epoch: int
    epochs_run: int
    network: Network | None = None
    predictions: cal.Predictions | None = None

    def to_dict(self) -> dict:
        return {"seed": self.seed, "scores": self.scores, "calibration": self.calibration,
                "temperature": self.temperature, "best_epoch": self.best_epoch,
                "epochs_run": self.epochs_run}


@dataclass
class RunSummary:
    variant: str
    test_digest: str
    seeds: dict[int, SeedResult] = field(default_factory=dict)
    failures: dict[int, str] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def metric(self, key: str, bins: int | None = None) -> np.ndarray:
        """Per-seed values of a score (``bins=None``) or calibration metric."""
        vals = []
        for s in sorted(self.seeds):
            r = self.seeds[s]
            if bins is None:
                vals.append(r.scores[key])
            else:
                vals.append(next(c[key] for c in r.calibration if c["bins"] == bins))
        return np.asarray(vals, dtype=float)

    def aggregate(self) -> dict:
        out = {"scores": {}, "calibration": {}}
        for key in SCORE_KEYS:
            out["scores"][key] = mean_sd(self.metric(key)) if self.seeds else None
        bin_counts = self.config.get("bin_counts", [])
        for b in bin_counts:
            out["calibration"][str(b)] = {
                key: mean_sd(self.metric(key, b)) if self.seeds else None
                for key in CALIBRATION_KEYS}
        return out

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "test_digest": self.test_digest,
            "config": self.config,
            "seeds": {str(s): r.to_dict() for s, r in sorted(self.seeds.items())},
            "failures": {str(s): msg for s, msg in sorted(self.failures.items())},
            "aggregate": self.aggregate(),
        }


def mean_sd(values) -> dict:
    """Mean and sample (n-1) standard deviation; ``sd`` is ``None`` for one value."""
    v = np.asarray(values, dtype=float)
    sd = float(np.std(v, ddof=1)) if len(v) > 1 else None
    return {"mean": float(np.mean(v)), "sd": sd, "n": int(len(v))}


def prepare_data(config: ExperimentConfig) -> tuple[Dataset, tuple[Dataset, Dataset, Dataset]]:
    data = generate(config.generator)
    return data, split(data, config.split)


def run_seed(config: ExperimentConfig, seed: int, train_set: Dataset, val_set: Dataset,
             test_set: Dataset):
    """Train, optionally calibrate, and evaluate one seed.

    Returns the :class:`SeedResult` and the raw training result (for logs).
    """
    spec = config.network_spec
    tcfg = replace(config.train, seed=seed, loss_kind=config.effective_loss)
    result = train(spec, (train_set.features, build_targets(train_set, config)),
                   (val_set.features, build_targets(val_set, config)), tcfg)
    net = result.network

    temperature = None
    if config.temperature_scaling:
        temperature = cal.fit_temperature(forward(net, val_set.features), val_set.majority,
                                          config.temperature_fit)

    if config.mc_dropout_passes:
        if temperature is None:
            probs = predict(net, test_set.features, mode="mc_dropout",
                            n_passes=config.mc_dropout_passes, seed=seed)
        else:
            rng = np.random.default_rng(seed)
            probs = np.mean([cal.apply_temperature(forward(net, test_set.features, dropout=rng),
                                                   temperature)
                             for _ in range(config.mc_dropout_passes)], axis=0)
    else:
        logits = forward(net, test_set.features)
        probs = softmax(logits) if temperature is None else cal.apply_temperature(logits, temperature)

    preds = cal.Predictions(probs, test_set.majority, test_set.distributional, test_set.sample_ids)
    return SeedResult(
        seed=seed,
        scores=score(preds).to_dict(),
        calibration=cal.calibration_report(preds, config.bin_counts),
        temperature=temperature,
        best_epoch=result.best_epoch,
        epochs_run=len(result.log),
        network=net,
        predictions=preds,
    ), result


def run_experiment(config: ExperimentConfig, out_dir=None, seeds=None) -> RunSummary:
    """Run every seed of ``config``; write artifacts to ``out_dir`` if given.

    A failing seed is recorded in ``RunSummary.failures`` and the remaining
    seeds still run.
    """
    data, (train_set, val_set, test_set) = prepare_data(config)
    if len(train_set) == 0 or len(val_set) == 0 or len(test_set) == 0:
        raise ExperimentError("split leaves an empty train, validation or test set")
    seeds = config.seeds if seeds is None else tuple(seeds)
    summary = RunSummary(variant=config.variant, test_digest=test_set.digest(),
                         config=config.to_dict())
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        dump_json(config.to_dict(), out / "config.json")
        save_dataset(data, out / "data")
        _write_split(out / "data" / "split.csv", train_set, val_set, test_set)

    for seed in seeds:
        try:
            res, train_result = run_seed(config, seed, train_set, val_set, test_set)
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            logger.warning("seed %d failed: %s", seed, exc)
            summary.failures[seed] = f"{type(exc).__name__}: {exc}"
            continue
        summary.seeds[seed] = res
        if out is not None:
            _write_seed(out / f"seed-{seed}", res, train_result, config)

    if out is not None:
        dump_json(summary.to_dict(), out / "summary.json")
    return summary


def _write_split(path, train_set, val_set, test_set):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("sample_id,set\n")
        for name, part in (("train", train_set), ("val", val_set), ("test", test_set)):
            for sid in part.sample_ids:
                fh.write(f"{sid},{name}\n")


def _write_seed(d: Path, res: SeedResult, train_result, config: ExperimentConfig):
    d.mkdir(parents=True, exist_ok=True)
    save_network(res.network, d / "model.json")
    dump_json(res.scores, d / "scores.json")
    dump_json({"temperature": res.temperature, "metrics": res.calibration}, d / "calibration.json")
    preds = res.predictions
    table = cal.reliability_data(cal.bins_for(preds, config.report_bins), preds)
    (d / "reliability.csv").write_text(table.to_csv())
    (d / "reliability.svg").write_text(cal.reliability_svg(table, config.variant))
    cm = confusion(preds.true_class, preds.predicted_class, preds.n_classes)
    (d / "confusion.csv").write_text(confusion_csv(cm))
    dump_json([asdict(e) for e in train_result.log], d / "train_log.json")


def load_summary(run_dir) -> dict:
    path = Path(run_dir)
    if path.is_dir():
        path = path / "summary.json"
    return json.loads(path.read_text())


def aggregate_from_seed_files(run_dir) -> dict:
    """Recompute the aggregate block of ``summary.json`` from per-seed files."""
    run_dir = Path(run_dir)
    cfg = json.loads((run_dir / "config.json").read_text())
    summary = RunSummary(variant="", test_digest="", config=cfg)
    for d in sorted(run_dir.glob("seed-*")):
        seed = int(d.name.split("-", 1)[1])
        scores = json.loads((d / "scores.json").read_text())
        calib = json.loads((d / "calibration.json").read_text())
        summary.seeds[seed] = SeedResult(seed, scores, calib["metrics"], calib["temperature"], -1, -1)
    return _clean(summary.aggregate())


class CompareError(ValueError):
    pass


COMPARE_COLUMNS = (
    # key, header, source, lower-is-better, scale
    ("ce_onehot", "CE One-hot", "scores", True, 1.0),
    ("ce_distr", "CE Distr.", "scores", True, 1.0),
    ("ece", "ECE", "calibration", True, 100.0),
    ("mce", "MCE", "calibration", True, 100.0),
    ("sce", "SCE", "calibration", True, 100.0),
    ("oa", "OA", "scores", False, 100.0),
    ("maa", "MAA", "scores", False, 100.0),
    ("waa", "WAA", "scores", False, 100.0),
    ("kappa", "kappa", "scores", False, 100.0),
)


@dataclass
class Comparison:
    headers: list[str]
    names: list[str]
    means: list[list[float | None]]
    sds: list[list[float | None]]
    best: list[int | None]
    bins: int

    def differences(self) -> list[float | None]:
        """Second run minus first run, per column."""
        a, b = self.means[0], self.means[1]
        return [None if x is None or y is None else y - x for x, y in zip(a, b)]

    def render(self) -> str:
        def cell(m, s, star):
            if m is None:
                return "n/a"
            txt = f"{m:.2f}" if s is None else f"{m:.2f} ± {s:.2f}"
            return txt + (" *" if star else "")

        rows = [["", *self.headers]]
        for i, name in enumerate(self.names):
            rows.append([name, *(cell(m, s, self.best[j] == i)
                                 for j, (m, s) in enumerate(zip(self.means[i], self.sds[i])))])
        if len(self.names) == 2:
            rows.append(["difference", *("n/a" if d is None else f"{d:+.2f}"
                                         for d in self.differences())])
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
        note = (f"calibration errors from {self.bins} bins; ECE/MCE/SCE and accuracies in %; "
                "* marks the best value per column")
        return "\n".join(lines) + "\n" + note + "\n"

    def to_dict(self) -> dict:
        return {"bins": self.bins, "headers": self.headers, "runs": [
            {"name": n, "mean": m, "sd": s} for n, m, s in zip(self.names, self.means, self.sds)],
            "best": self.best}


def compare(*runs, bins: int = 20, names=None) -> Comparison:
    """Side-by-side mean ± sd table of several runs on the same test data.

    ``runs`` are run directories, ``summary.json`` paths, or already loaded
    summary dicts. Runs whose test-set digests differ are refused.
    """
    if len(runs) < 2:
        raise CompareError("need at least two runs to compare")
    docs = [r if isinstance(r, dict) else load_summary(r) for r in runs]
    digests = {d["test_digest"] for d in docs}
    if len(digests) != 1:
        raise CompareError("runs were evaluated on different test data")
    names = list(names) if names else [d.get("variant", f"run {i}") for i, d in enumerate(docs)]

    means, sds = [], []
    for d in docs:
        agg = d.get("aggregate", {})
        mrow, srow = [], []
        for key, _, source, _, scale in COMPARE_COLUMNS:
            if source == "scores":
                entry = agg.get("scores", {}).get(key)
            else:
                entry = agg.get("calibration", {}).get(str(bins), {}).get(key)
            if not entry or entry.get("mean") is None:
                mrow.append(None)
                srow.append(None)
                continue
            mrow.append(entry["mean"] * scale)
            srow.append(None if entry.get("sd") is None else entry["sd"] * scale)
        means.append(mrow)
        sds.append(srow)

    best = []
    for j, (_, _, _, lower, _) in enumerate(COMPARE_COLUMNS):
        col = [(m[j], i) for i, m in enumerate(means) if m[j] is not None]
        if not col:
            best.append(None)
            continue
        best.append((min if lower else max)(col)[1])
    return Comparison([c[1] for c in COMPARE_COLUMNS], names, means, sds, best, bins)

"""
Paired experiment: one-hot versus distributional labels
=======================================================

Both runs share the data set (same generator seed, same split) and the
training seeds, so each seed gives a paired comparison. The full benchmark
takes a minute or two on a laptop.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from labeldist.experiment import benchmark_config, compare, run_experiment
from labeldist.labels import vote_entropy
from labeldist.synth import class_frequency_report, entropy_summary, generate, split

seeds = (0, 1, 2, 3, 4) if "--quick" not in sys.argv else (0, 1)
hot_cfg = benchmark_config("onehot", seeds=seeds)
dist_cfg = benchmark_config("distributional", seeds=seeds)

# What the annotators disagree about.
data = generate(hot_cfg.generator)
print("mean vote entropy", vote_entropy(data.distributional).mean())
summary = entropy_summary(data, {"classes 1-5": [0, 1, 2, 3, 4], "classes 6-10": [5, 6, 7, 8, 9]})
for name, hist in summary.histograms.items():
    print(f"{name:13s} mean {summary.means[name]:.3f}  buckets {hist.tolist()}")

# Group-level split: held-out groups are halved into validation and test.
rep = class_frequency_report(*split(data, hot_cfg.split))
print("set sizes", rep.set_totals.tolist())

with tempfile.TemporaryDirectory() as tmp:
    hot = run_experiment(hot_cfg, Path(tmp) / "onehot")
    dist = run_experiment(dist_cfg, Path(tmp) / "distr")
    ece_h, ece_d = hot.metric("ece", 20), dist.metric("ece", 20)
    ce_h, ce_d = hot.metric("ce_distr"), dist.metric("ce_distr")
    print("per-seed ECE     ", np.round(100 * ece_h, 2), "->", np.round(100 * ece_d, 2))
    print("per-seed CE-Distr", np.round(ce_h, 3), "->", np.round(ce_d, 3))
    print(compare(Path(tmp) / "onehot", Path(tmp) / "distr", bins=20).render())

"""
Calibration metrics and temperature scaling
===========================================

Confidence is binned into equal-width, right-closed bins. ECE averages the
gap between accuracy and confidence over bins, MCE takes the largest gap,
and SCE repeats the exercise for every class probability.
"""

import numpy as np

from labeldist.calibration import (Predictions, assign_bins, bins_for, ece, fit_temperature, mce,
                                   reliability_data, sce, temperature_nll)
from labeldist.metrics import accuracy_suite, confusion, kappa, score

# Four predictions in two bins.
bins = assign_bins([0.9, 0.8, 0.6, 0.4], [1, 0, 1, 0], 2)
print("ECE", ece(bins), "MCE", mce(bins))
print("SCE", sce(Predictions([[0.7, 0.3], [0.6, 0.4]], [0, 1]), 1))

# Accuracy family and kappa from a confusion matrix.
cm = confusion([0, 0, 1, 1], [0, 0, 0, 1])
print("OA/MAA/WAA", accuracy_suite(cm), "kappa", kappa(cm))

# An overconfident model: right 60% of the time, but sure of itself.
rng = np.random.default_rng(0)
n, k = 1000, 5
truth = rng.integers(0, k, n)
pred = np.where(rng.random(n) < 0.6, truth, rng.integers(0, k, n))
logits = rng.normal(scale=0.5, size=(n, k))
logits[np.arange(n), pred] += 4.0

val, test = slice(0, 500), slice(500, None)
t = fit_temperature(logits[val], truth[val])
print(f"fitted T {t:.3f}; val NLL {temperature_nll(logits[val], truth[val], 1.0):.3f} "
      f"-> {temperature_nll(logits[val], truth[val], t):.3f}")

for name, temp in (("raw", 1.0), ("scaled", t)):
    z = logits[test] / temp
    probs = np.exp(z - z.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    preds = Predictions(probs, truth[test])
    print(f"{name:7s} ECE {100 * ece(bins_for(preds, 15)):.2f}%  OA {score(preds).oa:.3f}")

# Reliability table as CSV, ready for plotting.
print(reliability_data(bins_for(preds, 10), preds).to_csv())

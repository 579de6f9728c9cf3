"""
Training under one-hot and distributional targets
=================================================

A small softmax network is trained twice on the same synthetic data: once
with cross-entropy on majority labels and once with KL divergence on the
vote distributions.
"""

import numpy as np

from labeldist.labels import one_hot
from labeldist.network import NetworkSpec, TrainConfig, batch_loss, loss_ce, loss_kl, predict, train
from labeldist.synth import GeneratorConfig, GroupSpec, SplitSpec, generate, split

# Cross-entropy splits into the target's entropy plus the KL divergence.
y, p = np.array([0.3, 0.7]), np.array([0.5, 0.5])
print("CE", loss_ce(y, p), "= H + KL", -(y * np.log(y)).sum() + loss_kl(y, p))

# Synthetic data: four groups, two of them held out.
groups = tuple(GroupSpec(f"g{i}", 60) for i in range(4))
data = generate(GeneratorConfig(class_count=5, feature_dim=8, groups=groups, ambiguity=1.0,
                                group_shift=1.5, seed=1))
tr, va, te = split(data, SplitSpec(["g0", "g1"], ["g2", "g3"], seed=0))
print(f"train {len(tr)}, val {len(va)}, test {len(te)}")

spec = NetworkSpec(input_dim=8, hidden_dims=(32, 32), class_count=5)
targets = {
    "ce_onehot": lambda d: one_hot(d.majority, 5),
    "kl_distr": lambda d: d.distributional,
}
for kind, make in targets.items():
    cfg = TrainConfig(loss_kind=kind, initial_lr=0.02, max_epochs=200, seed=0)
    res = train(spec, (tr.features, make(tr)), (va.features, make(va)), cfg)
    probs = predict(res.network, te.features)
    acc = np.mean(probs.argmax(axis=1) == te.majority)
    print(f"{kind:10s} best epoch {res.best_epoch:3d}  test acc {acc:.3f}  "
          f"test KL {batch_loss(res.network, te.features, te.distributional, 'kl_distr'):.3f}")

# MC dropout averages several stochastic passes.
mc = predict(res.network, te.features, mode="mc_dropout", n_passes=20, seed=0)
print("MC dropout mean confidence", mc.max(axis=1).mean())

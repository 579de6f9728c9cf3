"""A small fully-connected softmax classifier written directly in numpy.

The network is ``Linear -> ReLU -> Dropout`` repeated once per hidden layer,
followed by a linear output layer producing logits. Training supports
cross-entropy against one-hot or distributional targets and the KL
divergence against distributional targets, with Nesterov-momentum SGD, a
step learning-rate schedule, early stopping on validation loss and
best-checkpoint restoration.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

LOSS_KINDS = ("ce_onehot", "ce_distr", "kl_distr")


class ShapeError(ValueError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    class_count: int
    dropout_rate: float = 0.2
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.class_count < 2:
            raise ValueError("input_dim must be >= 1 and class_count >= 2")
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ValueError("need at least one hidden layer of positive width")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim, *self.hidden_dims, self.class_count]


@dataclass
class Network:
    """A ``NetworkSpec`` plus per-layer ``weights[i]`` of shape (fan_in, fan_out) and ``biases[i]``."""

    spec: NetworkSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None

    def copy(self) -> "Network":
        return Network(self.spec, [w.copy() for w in self.weights],
                       [b.copy() for b in self.biases], self.seed)

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    initial_lr: float = 2e-3
    lr_decay_factor: float = 0.5
    lr_decay_every_epochs: int = 5
    max_epochs: int = 200
    early_stop_patience: int = 20
    seed: int = 0
    loss_kind: str = "ce_onehot"
    momentum: float = 0.9
    optimizer: str = "sgd_nesterov"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must lie in (0, 1]")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")
        if self.lr_decay_every_epochs < 1 or self.max_epochs < 1:
            raise ValueError("lr_decay_every_epochs and max_epochs must be >= 1")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.optimizer != "sgd_nesterov":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate used during 0-based ``epoch``."""
        return self.initial_lr * self.lr_decay_factor ** (epoch // self.lr_decay_every_epochs)


def init_network(spec: NetworkSpec, seed: int) -> Network:
    """Uniform init in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``."""
    rng = np.random.default_rng(seed)
    dims = spec.layer_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return Network(spec, weights, biases, seed)


def _as_rng(dropout) -> np.random.Generator | None:
    if dropout is None or dropout is False:
        return None
    if isinstance(dropout, np.random.Generator):
        return dropout
    return np.random.default_rng(dropout)


def _forward_cache(net: Network, X: np.ndarray, rng: np.random.Generator | None):
    rate = net.spec.dropout_rate
    acts = [X]
    pre = []
    masks = []
    h = X
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ W + b
        if i == last:
            return z, (acts, pre, masks)
        pre.append(z)
        h = np.maximum(z, 0.0)
        if rng is not None and rate > 0.0:
            mask = (rng.random(h.shape) >= rate) / (1.0 - rate)
            h = h * mask
        else:
            mask = None
        masks.append(mask)
        acts.append(h)
    raise AssertionError("unreachable")


def forward(net: Network, features, dropout=None) -> np.ndarray:
    """Logits for a feature vector or an ``(n, D)`` feature matrix.

    ``dropout`` is ``None`` (off) or a seed / ``numpy.random.Generator``
    used to sample inverted-dropout masks after every hidden layer.
    """
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.ndim != 2 or X2.shape[1] != net.spec.input_dim:
        raise ShapeError(f"expected {net.spec.input_dim} features, got shape {X.shape}")
    z, _ = _forward_cache(net, X2, _as_rng(dropout))
    return z[0] if single else z


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("softmax received non-finite logits")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _xlogy_terms(target: np.ndarray, pred: np.ndarray) -> tuple[np.ndarray, bool]:
    """Per-entry ``target * log(pred)`` with 0 where target is 0; flag support violations."""
    out = np.zeros(np.broadcast(target, pred).shape)
    t = np.broadcast_to(target, out.shape)
    p = np.broadcast_to(pred, out.shape)
    nz = t > 0
    bad = nz & (p <= 0)
    ok = nz & ~bad
    out[ok] = t[ok] * np.log(p[ok])
    out[bad] = -np.inf
    return out, bool(bad.any())


def loss_ce(target, pred):
    """Cross-entropy ``-sum_k target_k log pred_k`` (nats), row-wise.

    A zero prediction on a class the target supports gives ``inf``.
    """
    t = np.asarray(target, dtype=float)
    p = np.asarray(pred, dtype=float)
    terms, bad = _xlogy_terms(t, p)
    if bad:
        logger.debug("loss_ce: zero predicted probability on a supported class")
    out = -terms.sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def loss_kl(target, pred):
    """``KL(target || pred)`` in nats, with ``0 log 0 = 0``; row-wise."""
    t = np.asarray(target, dtype=float)
    p = np.asarray(pred, dtype=float)
    cross, bad = _xlogy_terms(t, p)
    self_terms, _ = _xlogy_terms(t, t)
    if bad:
        logger.debug("loss_kl: zero predicted probability on a supported class")
    out = (self_terms - cross).sum(axis=-1)
    out = np.where(np.isfinite(out), np.maximum(out, 0.0), out)
    return float(out) if np.ndim(out) == 0 else out


def _loss_from_logits(logits: np.ndarray, targets: np.ndarray, loss_kind: str) -> np.ndarray:
    logp = log_softmax(logits)
    t = np.asarray(targets, dtype=float)
    ce = -(np.where(t > 0, t * logp, 0.0)).sum(axis=1)
    if loss_kind == "kl_distr":
        self_terms, _ = _xlogy_terms(t, t)
        return ce + self_terms.sum(axis=1)
    return ce


def _check_loss_kind(loss_kind):
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {loss_kind!r}")


def batch_loss(net: Network, features, targets, loss_kind: str, dropout=None) -> float:
    """Mean per-sample loss over a batch. The KL variant is non-negative."""
    _check_loss_kind(loss_kind)
    X = np.atleast_2d(np.asarray(features, dtype=float))
    T = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(X) == 0:
        raise ValueError("empty batch")
    logits = forward(net, X, dropout=dropout)
    return float(np.mean(_loss_from_logits(logits, T, loss_kind)))


def loss_and_gradient(net: Network, features, targets, loss_kind: str, dropout=None):
    """Batch loss and its exact gradient by backpropagation.

    Returns ``(loss, grad_weights, grad_biases)``. The output-layer error
    is ``(softmax(z) - target) / m`` for all loss kinds, since targets sum
    to one and the KL differs from the cross-entropy by a constant.
    """
    _check_loss_kind(loss_kind)
    X = np.atleast_2d(np.asarray(features, dtype=float))
    T = np.atleast_2d(np.asarray(targets, dtype=float))
    m = len(X)
    if m == 0:
        raise ValueError("empty batch")
    if X.shape[1] != net.spec.input_dim:
        raise ShapeError(f"expected {net.spec.input_dim} features, got {X.shape[1]}")
    logits, (acts, pre, masks) = _forward_cache(net, X, _as_rng(dropout))
    loss = float(np.mean(_loss_from_logits(logits, T, loss_kind)))

    delta = (softmax(logits) - T) / m
    n_layers = len(net.weights)
    gW = [None] * n_layers
    gb = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ net.weights[i].T
        if masks[i - 1] is not None:
            delta = delta * masks[i - 1]
        delta = delta * (pre[i - 1] > 0)
    return loss, gW, gb


def gradient(net: Network, features, targets, loss_kind: str, dropout=None):
    """Gradient of :func:`batch_loss`, shaped like ``(weights, biases)``."""
    _, gW, gb = loss_and_gradient(net, features, targets, loss_kind, dropout)
    return gW, gb


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    improved: bool


@dataclass
class TrainResult:
    network: Network
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    stopped_early: bool = False


def train(spec: NetworkSpec, train_set, val_set, config: TrainConfig) -> TrainResult:
    """Fit a network; returns the checkpoint with the lowest validation loss.

    ``train_set`` and ``val_set`` are ``(features, targets)`` pairs. The
    validation loss is evaluated with dropout off. Training stops once the
    validation loss has not strictly decreased for ``early_stop_patience``
    consecutive epochs, or after ``max_epochs``.
    """
    Xtr, Ttr = (np.asarray(a, dtype=float) for a in train_set)
    Xva, Tva = (np.asarray(a, dtype=float) for a in val_set)
    if len(Xtr) == 0 or len(Xva) == 0:
        raise ValueError("train and validation sets must be non-empty")
    for X, T in ((Xtr, Ttr), (Xva, Tva)):
        if X.ndim != 2 or X.shape[1] != spec.input_dim or T.shape != (len(X), spec.class_count):
            raise ShapeError("features/targets do not match the network layout")

    rng = np.random.default_rng(config.seed)
    net = init_network(spec, int(rng.integers(2**63)))
    net.seed = config.seed
    velocity = [np.zeros_like(p) for p in net.params()]
    result = TrainResult(network=net.copy())
    stale = 0
    n = len(Xtr)
    mu = config.momentum

    # divergence surfaces as a non-finite loss below, so overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.max_epochs):
            lr = config.lr_at(epoch)
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                loss, gW, gb = loss_and_gradient(net, Xtr[idx], Ttr[idx], config.loss_kind, dropout=rng)
                total += loss * len(idx)
                for p, g, v in zip(net.params(), [*gW, *gb], velocity):
                    v *= mu
                    v += g
                    p -= lr * (g + mu * v)
            train_loss = total / n
            if not np.isfinite(train_loss):
                raise TrainingError(epoch, "training loss is not finite")
            val_loss = batch_loss(net, Xva, Tva, config.loss_kind)
            if not np.isfinite(val_loss):
                raise TrainingError(epoch, "validation loss is not finite")

            improved = val_loss < result.best_val_loss
            if improved:
                result.best_val_loss = val_loss
                result.best_epoch = epoch
                result.network = net.copy()
                stale = 0
            else:
                stale += 1
            result.log.append(EpochLog(epoch, lr, float(train_loss), float(val_loss), improved))
            logger.debug("epoch %d lr=%.3g train=%.5f val=%.5f", epoch, lr, train_loss, val_loss)
            if stale >= config.early_stop_patience:
                result.stopped_early = True
                break
    return result


def predict(net: Network, features, mode: str = "plain", n_passes: int = 20, seed: int = 0) -> np.ndarray:
    """Class distributions for ``features``.

    ``mode="plain"`` runs the network with dropout off. ``mode="mc_dropout"``
    averages the softmax outputs of ``n_passes`` forward passes with dropout
    sampled from a generator seeded with ``seed``.
    """
    if mode == "plain":
        return softmax(forward(net, features))
    if mode != "mc_dropout":
        raise ValueError(f"unknown prediction mode {mode!r}")
    if n_passes < 1:
        raise ValueError("n_passes must be >= 1")
    rng = np.random.default_rng(seed)
    acc = None
    for _ in range(n_passes):
        p = softmax(forward(net, features, dropout=rng))
        acc = p if acc is None else acc + p
    return acc / n_passes


def network_to_dict(net: Network) -> dict:
    spec = asdict(net.spec)
    spec["hidden_dims"] = list(spec["hidden_dims"])
    return {
        "format": "labeldist.network/1",
        "spec": spec,
        "seed": net.seed,
        "layers": [
            {"shape": list(W.shape), "weights": W.ravel(order="C").tolist(), "bias": b.tolist()}
            for W, b in zip(net.weights, net.biases)
        ],
    }


def network_from_dict(doc: dict) -> Network:
    spec = NetworkSpec(**doc["spec"])
    weights, biases = [], []
    for layer in doc["layers"]:
        weights.append(np.asarray(layer["weights"], dtype=float).reshape(layer["shape"]))
        biases.append(np.asarray(layer["bias"], dtype=float))
    net = Network(spec, weights, biases, doc.get("seed"))
    dims = spec.layer_dims
    if [w.shape for w in weights] != list(zip(dims[:-1], dims[1:])):
        raise ShapeError("stored layer shapes do not match the network layout")
    return net


def save_network(net: Network, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n")


def load_network(path) -> Network:
    return network_from_dict(json.loads(Path(path).read_text()))

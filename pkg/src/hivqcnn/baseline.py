"""Classical matched-parameter counterparts and the classical NQE front-end."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .nqe import CosineEncoder, DenseNet, NQEResult, NQETrainConfig, train_nqe
from .optim import SGD
from .presets import BaselineSpec, NQEPreset, count_layers


class BaselineError(ValueError):
    pass


def count_params(spec: BaselineSpec | None) -> int:
    return 0 if spec is None else count_layers(spec.layers)


def _class_index(labels) -> np.ndarray:
    return (np.asarray(labels) > 0).astype(int)


def softmax_ce(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over 2 logits (column 1 = positive class) and d/dlogits."""
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    k = _class_index(labels)
    n = len(k)
    loss = float(-np.mean(np.log(np.clip(p[np.arange(n), k], 1e-300, None))))
    g = p.copy()
    g[np.arange(n), k] -= 1
    return loss, g / n


def sigmoid_bce(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on a single logit and d/dlogit."""
    z = logits[:, 0]
    t = _class_index(labels).astype(float)
    loss = float(np.mean(np.logaddexp(0, z) - t * z))
    p = 1 / (1 + np.exp(-z))
    return loss, ((p - t) / len(t))[:, None]


def _loss_fn(out_dim: int):
    if out_dim == 2:
        return softmax_ce
    if out_dim == 1:
        return sigmoid_bce
    raise BaselineError(f"classifier head must have 1 or 2 outputs, got {out_dim}")


def predict_labels(net: DenseNet, x) -> np.ndarray:
    out = net.forward(x)
    if out.shape[1] == 2:
        return np.where(out[:, 1] >= out[:, 0], 1, -1)
    return np.where(out[:, 0] >= 0, 1, -1)


@dataclass
class BaselineResult:
    spec: BaselineSpec
    net: DenseNet
    loss_history: list[float]
    train_accuracy: float
    test_accuracy: float
    wallclock_s: float = 0.0
    extra: dict = field(default_factory=dict)


def train_baseline(spec: BaselineSpec, train: tuple, test: tuple, seed: int = 0,
                   iterations: int | None = None, learning_rate: float | None = None) -> BaselineResult:
    """Plain mini-batch gradient descent on cross-entropy."""
    if spec.skipped:
        raise BaselineError(f"{spec.table}#{spec.row} has no published architecture")
    t0 = time.perf_counter()
    x_tr, y_tr = np.asarray(train[0], dtype=float), np.asarray(train[1])
    x_te, y_te = np.asarray(test[0], dtype=float), np.asarray(test[1])
    if x_tr.shape[1] != spec.layers[0][0]:
        raise BaselineError(f"{spec.table}#{spec.row} expects {spec.layers[0][0]} features, got {x_tr.shape[1]}")
    rng = np.random.default_rng(seed)
    net = DenseNet.init(spec.layers, rng)
    loss_fn = _loss_fn(net.out_dim)
    opt = SGD(learning_rate or spec.learning_rate)
    theta = net.flat()
    history = []
    for _ in range(iterations or spec.iterations):
        idx = rng.permutation(len(y_tr))[:min(spec.batch_size, len(y_tr))]
        cur = net.with_flat(theta)
        out, cache = cur._forward(x_tr[idx])
        loss, g = loss_fn(out, y_tr[idx])
        if not np.isfinite(loss):
            raise BaselineError("non-finite baseline loss")
        theta = opt.step(theta, cur.backward(cache, g))
        history.append(loss)
    net = net.with_flat(theta)
    acc_tr = float(np.mean(predict_labels(net, x_tr) == y_tr))
    acc_te = float(np.mean(predict_labels(net, x_te) == y_te))
    return BaselineResult(spec, net, history, acc_tr, acc_te, time.perf_counter() - t0)


def cosine_similarity_sq(a, b) -> np.ndarray:
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    return np.sum(a * b, axis=1) ** 2 / (np.sum(a * a, axis=1) * np.sum(b * b, axis=1))


def train_classical_nqe_counterpart(preset: NQEPreset, splits, seed: int = 0, **overrides) -> NQEResult:
    """Same loop as the quantum front-end, with fidelity replaced by squared cosine similarity."""
    config = NQETrainConfig.from_preset(preset, seed, **overrides)
    return train_nqe(splits, CosineEncoder(), config, preset.layers, measure_td=False)

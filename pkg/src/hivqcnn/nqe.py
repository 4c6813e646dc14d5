"""Neural quantum embedding: a dense ReLU network trained with a fidelity loss.

The network maps one-hot octamers to embedding features. Training pushes the
fidelity of each (a, b) pair toward 1 for equal labels and 0 otherwise.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from . import embed
from .embed import Embedding
from .optim import Adam
from .presets import Layers, NQEPreset
from .qsim import NoisePlan

log = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "hivqcnn.densenet"
SNAPSHOT_VERSION = 1
DEGENERATE_NORM = 1e-8


class NQEError(ValueError):
    pass


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

class DenseNet:
    """Affine layers with ReLU between them (none after the last).

    Weights follow the (out, in) layout, so a layer computes ``x @ W.T + b``.
    """

    def __init__(self, layers: Layers, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray | None]):
        layers = tuple((int(i), int(o), bool(b)) for i, o, b in layers)
        if not layers:
            raise NQEError("network needs at least one layer")
        for (_, o1, _), (i2, _, _) in zip(layers[:-1], layers[1:]):
            if o1 != i2:
                raise NQEError(f"layer widths do not chain: {o1} -> {i2}")
        self.layers = layers
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [None if b is None else np.asarray(b, dtype=float) for b in biases]
        for (i, o, hb), w, b in zip(layers, self.weights, self.biases):
            if w.shape != (o, i):
                raise NQEError(f"weight shape {w.shape} != {(o, i)}")
            if hb != (b is not None) or (b is not None and b.shape != (o,)):
                raise NQEError("bias vector does not match the layer's bias flag")

    @classmethod
    def init(cls, layers: Layers, rng: np.random.Generator | int = 0) -> "DenseNet":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
        rng = np.random.default_rng(rng)
        ws, bs = [], []
        for i, o, b in layers:
            k = 1.0 / np.sqrt(i)
            ws.append(rng.uniform(-k, k, size=(o, i)))
            bs.append(rng.uniform(-k, k, size=o) if b else None)
        return cls(layers, ws, bs)

    @classmethod
    def zeros(cls, layers: Layers) -> "DenseNet":
        return cls(layers, [np.zeros((o, i)) for i, o, _ in layers],
                   [np.zeros(o) if b else None for _, o, b in layers])

    @property
    def in_dim(self) -> int:
        return self.layers[0][0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][1]

    @property
    def n_params(self) -> int:
        return sum(i * o + (o if b else 0) for i, o, b in self.layers)

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            if b is not None:
                parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, theta) -> "DenseNet":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise NQEError(f"expected {self.n_params} parameters, got {theta.shape}")
        ws, bs, k = [], [], 0
        for i, o, hb in self.layers:
            ws.append(theta[k:k + i * o].reshape(o, i))
            k += i * o
            if hb:
                bs.append(theta[k:k + o])
                k += o
            else:
                bs.append(None)
        return DenseNet(self.layers, [w.copy() for w in ws], [None if b is None else b.copy() for b in bs])

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None]
        if x.shape[1] != self.in_dim:
            raise NQEError(f"network expects {self.in_dim} inputs, got {x.shape[1]}")
        inputs = []
        h = x
        last = len(self.layers) - 1
        for j, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w.T
            if b is not None:
                h = h + b
            if j < last:
                h = np.maximum(h, 0.0)
        return h, inputs

    def forward(self, x) -> np.ndarray:
        return self._forward(x)[0]

    def backward(self, inputs: list[np.ndarray], g_out: np.ndarray) -> np.ndarray:
        """Flat parameter gradient given the cached layer inputs and d(loss)/d(output)."""
        grads_w, grads_b = [None] * len(self.layers), [None] * len(self.layers)
        g = g_out
        for j in range(len(self.layers) - 1, -1, -1):
            h = inputs[j]
            grads_w[j] = g.T @ h
            if self.biases[j] is not None:
                grads_b[j] = g.sum(axis=0)
            if j > 0:
                g = (g @ self.weights[j]) * (h > 0)
        parts = []
        for gw, gb in zip(grads_w, grads_b):
            parts.append(gw.ravel())
            if gb is not None:
                parts.append(gb)
        return np.concatenate(parts)

    # -- snapshot ------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION,
            "layers": [list(l) for l in self.layers],
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [None if b is None else b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNet":
        if d.get("format") != SNAPSHOT_FORMAT or d.get("version") != SNAPSHOT_VERSION:
            raise NQEError("not a supported network snapshot")
        layers = tuple((i, o, b) for i, o, b in d["layers"])
        ws = [np.array(w, dtype=float).reshape(o, i) for (i, o, _), w in zip(layers, d["weights"])]
        bs = [None if b is None else np.array(b, dtype=float) for b in d["biases"]]
        return cls(layers, ws, bs)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict()))
        return path

    @classmethod
    def load(cls, path) -> "DenseNet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def net_forward(net: DenseNet, x) -> np.ndarray:
    out = net.forward(x)
    return out[0] if np.ndim(x) == 1 else out


# ---------------------------------------------------------------------------
# encoders and the pair loss
# ---------------------------------------------------------------------------

class Encoder(Protocol):
    def states(self, x) -> np.ndarray: ...
    def vjp(self, x, cot) -> np.ndarray: ...


class CosineEncoder:
    """Unit-normalised raw vectors; their squared overlap is the squared cosine similarity."""
    kind = "cosine"

    def states(self, x) -> np.ndarray:
        return embed.amplitude_states(x)

    def vjp(self, x, cot) -> np.ndarray:
        return embed.amplitude_vjp(x, cot)


def _needs_norm(encoder) -> bool:
    return isinstance(encoder, CosineEncoder) or getattr(encoder, "kind", None) == "amplitude"


def regularize_features(f: np.ndarray, encoder) -> np.ndarray:
    """Nudge near-zero outputs before normalising encoders see them."""
    if not _needs_norm(encoder):
        return f
    norms = np.linalg.norm(f, axis=1)
    bad = norms < DEGENERATE_NORM
    if np.any(bad):
        log.info("regularised %d near-zero feature vector(s)", int(bad.sum()))
        f = f.copy()
        f[bad, 0] += DEGENERATE_NORM
    return f


def pair_targets(ya, yb) -> np.ndarray:
    ya, yb = np.asarray(ya), np.asarray(yb)
    if not (np.all(np.isin(ya, (-1, 1))) and np.all(np.isin(yb, (-1, 1)))):
        raise NQEError("labels must be -1 or +1")
    return 0.5 * (1 + ya * yb)


def _pair_fidelity_and_cots(encoder, fa, fb, plan: NoisePlan | None, need_grad: bool):
    """Fidelities per pair plus callables turning dL/dF into feature gradients."""
    if plan is None:
        a, b = encoder.states(fa), encoder.states(fb)
        ov = np.sum(np.conj(a) * b, axis=1)
        fid = np.abs(ov) ** 2
        if not need_grad:
            return fid, None
        def back(gf):
            ga = encoder.vjp(fa, (2 * gf * np.conj(ov))[:, None] * b)
            gb = encoder.vjp(fb, (2 * gf * ov)[:, None] * a)
            return ga, gb
        return fid, back
    rho_a = encoder.noisy_states(fa, plan)
    rho_b = encoder.noisy_states(fb, plan)
    fid = np.real(np.sum(rho_a * np.conj(rho_b), axis=(1, 2)))
    if not need_grad:
        return fid, None
    def back(gf):
        _, ga = encoder.noisy_vjp(fa, rho_b, plan)
        _, gb = encoder.noisy_vjp(fb, rho_a, plan)
        return gf[:, None] * ga, gf[:, None] * gb
    return fid, back


def loss_and_grad(net: DenseNet, encoder, xa, ya, xb, yb, plan: NoisePlan | None = None,
                  need_grad: bool = True) -> tuple[float, np.ndarray | None]:
    xa, xb = np.asarray(xa, dtype=float), np.asarray(xb, dtype=float)
    if len(xa) == 0 or len(xa) != len(xb):
        raise NQEError("pair batches must be non-empty and of equal length")
    target = pair_targets(ya, yb)
    fa_raw, cache_a = net._forward(xa)
    fb_raw, cache_b = net._forward(xb)
    fa, fb = regularize_features(fa_raw, encoder), regularize_features(fb_raw, encoder)
    fid, back = _pair_fidelity_and_cots(encoder, fa, fb, plan, need_grad)
    resid = fid - target
    loss = float(np.mean(resid ** 2))
    if not need_grad:
        return loss, None
    gf = 2 * resid / len(resid)
    ga, gb = back(gf)
    return loss, net.backward(cache_a, ga) + net.backward(cache_b, gb)


def nqe_pair_loss(net: DenseNet, embedding, batch_a, batch_b, noise: NoisePlan | None = None) -> float:
    """Mean squared gap between pair fidelity and the label-agreement target."""
    (xa, ya), (xb, yb) = batch_a, batch_b
    return loss_and_grad(net, embedding, xa, ya, xb, yb, noise, need_grad=False)[0]


def nqe_gradient(net: DenseNet, embedding, batch_a, batch_b, noise: NoisePlan | None = None) -> np.ndarray:
    (xa, ya), (xb, yb) = batch_a, batch_b
    return loss_and_grad(net, embedding, xa, ya, xb, yb, noise)[1]


# ---------------------------------------------------------------------------
# ensemble trace distance of embedded data
# ---------------------------------------------------------------------------

def class_mean_states(encoder, feats, labels, plan: NoisePlan | None = None, chunk: int = 64):
    """Mean density matrix of each class, accumulated in chunks to bound memory."""
    feats = regularize_features(np.asarray(feats, dtype=float), encoder)
    labels = np.asarray(labels)
    means = []
    for cls in (1, -1):
        rows = feats[labels == cls]
        if len(rows) == 0:
            raise NQEError(f"class {cls:+d} is empty")
        acc = None
        for s in range(0, len(rows), chunk):
            part = rows[s:s + chunk]
            if plan is None:
                psi = encoder.states(part)
                m = psi.T @ np.conj(psi)
            else:
                m = encoder.noisy_states(part, plan).sum(axis=0)
            acc = m if acc is None else acc + m
        means.append(acc / len(rows))
    return means[0], means[1]


def embedded_trace_distance(encoder, feats, labels, plan: NoisePlan | None = None) -> float:
    rho, sigma = class_mean_states(encoder, feats, labels, plan)
    return embed.trace_distance(rho, sigma)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class NQETrainConfig:
    batch_size: int
    learning_rate: float
    max_iterations: int
    validation_period: int = 10
    patience: int = 4
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        for name in ("batch_size", "learning_rate", "max_iterations", "validation_period", "patience"):
            if not getattr(self, name) > 0:
                raise NQEError(f"{name} must be positive")

    @classmethod
    def from_preset(cls, preset: NQEPreset, seed: int = 0, **overrides) -> "NQETrainConfig":
        kw = dict(batch_size=preset.batch_size, learning_rate=preset.learning_rate,
                  max_iterations=preset.iterations, seed=seed)
        kw.update(overrides)
        return cls(**kw)


@dataclass
class NQEResult:
    net: DenseNet
    initial_net: DenseNet
    history: list[tuple[int, float, float]]
    best_iteration: int
    stopped_iteration: int
    trace_distance: dict[str, float] = field(default_factory=dict)
    wallclock_s: float = 0.0

    @property
    def td_regressed(self) -> bool:
        td = self.trace_distance
        return bool(td) and td["train_after"] < td["train_before"]

    def write_history(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "train_loss", "val_loss"])
            for it, tr, va in self.history:
                w.writerow([it, repr(tr), "" if np.isnan(va) else repr(va)])
        return path


def _batch_indices(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    return rng.permutation(n)[:min(size, n)]


def train_nqe(splits, encoder, config: NQETrainConfig, layers: Layers,
              noise: NoisePlan | None = None, measure_td: bool = True) -> NQEResult:
    """Adam on the pair loss with periodic validation and early stopping.

    Returns the best-validation network; trace distances are measured on the
    initial and the returned network for the train and test splits.
    """
    t0 = time.perf_counter()
    x_tr, y_tr = np.asarray(splits.x_train, dtype=float), np.asarray(splits.y_train)
    x_va, y_va = np.asarray(splits.x_val, dtype=float), np.asarray(splits.y_val)
    if len(y_tr) < 2 or len(y_va) < 2:
        raise NQEError("train and validation splits need at least two samples each")
    rng = np.random.default_rng(config.seed)
    net0 = DenseNet.init(layers, rng)
    val_perm = rng.permutation(len(y_va))
    theta = net0.flat()
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    best_theta, best_val, best_it = theta.copy(), np.inf, 0
    history: list[tuple[int, float, float]] = []
    bad_checks = 0
    stopped = config.max_iterations
    for it in range(1, config.max_iterations + 1):
        ia = _batch_indices(rng, len(y_tr), config.batch_size)
        ib = _batch_indices(rng, len(y_tr), config.batch_size)
        net = net0.with_flat(theta)
        loss, grad = loss_and_grad(net, encoder, x_tr[ia], y_tr[ia], x_tr[ib], y_tr[ib], noise)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise NQEError(f"non-finite NQE loss/gradient at iteration {it} (loss={loss})")
        theta = opt.step(theta, grad)
        val = np.nan
        if it % config.validation_period == 0:
            val, _ = loss_and_grad(net0.with_flat(theta), encoder, x_va, y_va, x_va[val_perm], y_va[val_perm],
                                   noise, need_grad=False)
            if not np.isfinite(val):
                raise NQEError(f"non-finite validation loss at iteration {it}")
            if val < best_val:
                best_val, best_theta, best_it, bad_checks = val, theta.copy(), it, 0
            else:
                bad_checks += 1
        history.append((it, loss, val))
        if bad_checks >= config.patience:
            stopped = it
            break
    if not np.isfinite(best_val):
        best_theta, best_it = theta.copy(), stopped
    best = net0.with_flat(best_theta)
    result = NQEResult(best, net0, history, best_it, stopped)
    if measure_td:
        td = {}
        for name, x, y in (("train", x_tr, y_tr), ("test", splits.x_test, splits.y_test)):
            td[f"{name}_before"] = embedded_trace_distance(encoder, net0.forward(x), y, noise)
            td[f"{name}_after"] = embedded_trace_distance(encoder, best.forward(x), y, noise)
        result.trace_distance = td
        if result.td_regressed:
            log.warning("NQE training lowered the train trace distance: %.4f -> %.4f",
                        td["train_before"], td["train_after"])
    result.wallclock_s = time.perf_counter() - t0
    return result

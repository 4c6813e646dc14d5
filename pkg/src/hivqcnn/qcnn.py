"""Quantum convolutional neural network: ansatz library, layered circuit, training."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import qsim
from .embed import Embedding
from .optim import Nesterov
from .presets import PARAMS_PER_BLOCK, QCNN_LAYERS
from .qsim import Circuit, DensityMatrix, NoisePlan, PureState

ANSATZ_KINDS = ("TTN", "U15", "U13", "U6", "SU4")
SNAPSHOT_FORMAT = "hivqcnn.qcnn"
SNAPSHOT_VERSION = 1


class QCNNError(ValueError):
    pass


# ---------------------------------------------------------------------------
# two-qubit blocks
# ---------------------------------------------------------------------------

def _crz(c: Circuit, slot: int, control: int, target: int):
    c.rz(target, slot=slot, scale=0.5)
    c.cnot(control, target)
    c.rz(target, slot=slot, scale=-0.5)
    c.cnot(control, target)


def _crx(c: Circuit, slot: int, control: int, target: int):
    c.h(target)
    _crz(c, slot, control, target)
    c.h(target)


def _u3(c: Circuit, q: int, slot: int):
    # U3(theta, phi, lam) = RZ(phi) RY(theta) RZ(lam) up to a global phase
    c.rz(q, slot=slot + 2)
    c.ry(q, slot=slot)
    c.rz(q, slot=slot + 1)


def build_ansatz_block(kind: str) -> Circuit:
    """Two-qubit block compiled to single-angle rotations and CNOTs.

    Parameters are numbered in gate order, top wire first.
    """
    if kind not in PARAMS_PER_BLOCK:
        raise QCNNError(f"unknown ansatz {kind!r}; expected one of {ANSATZ_KINDS}")
    c = Circuit(2, PARAMS_PER_BLOCK[kind])
    if kind == "TTN":
        c.ry(0, slot=0).ry(1, slot=1).cnot(0, 1)
    elif kind == "U15":
        c.ry(0, slot=0).ry(1, slot=1).cnot(1, 0)
        c.ry(0, slot=2).ry(1, slot=3).cnot(0, 1)
    elif kind == "U13":
        c.ry(0, slot=0).ry(1, slot=1)
        _crz(c, 2, 1, 0)
        c.ry(0, slot=3).ry(1, slot=4)
        _crz(c, 5, 0, 1)
    elif kind == "U6":
        c.rx(0, slot=0).rx(1, slot=1).rz(0, slot=2).rz(1, slot=3)
        _crx(c, 4, 1, 0)
        _crx(c, 5, 0, 1)
        c.rx(0, slot=6).rx(1, slot=7).rz(0, slot=8).rz(1, slot=9)
    else:  # SU4
        _u3(c, 0, 0)
        _u3(c, 1, 3)
        c.cnot(0, 1)
        c.ry(0, slot=6).rz(1, slot=7)
        c.cnot(1, 0)
        c.ry(0, slot=8)
        c.cnot(0, 1)
        _u3(c, 0, 9)
        _u3(c, 1, 12)
    return c


# ---------------------------------------------------------------------------
# layered circuit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QCNNArchitecture:
    n_qubits: int
    ansatz: str
    pooling: bool
    layers: tuple[tuple[int, ...], ...]   # surviving qubits entering each layer
    readout: int

    @property
    def params_per_block(self) -> int:
        return PARAMS_PER_BLOCK[self.ansatz]

    @property
    def n_params(self) -> int:
        return len(self.layers) * self.params_per_block

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "ansatz": self.ansatz, "pooling": self.pooling,
                "layers": [list(l) for l in self.layers], "readout": self.readout}


def layer_pairs(surviving) -> list[tuple[int, int]]:
    """Even pairs, then odd pairs closing the ring; a lone pair is used once."""
    s = list(surviving)
    m = len(s)
    if m == 2:
        return [(s[0], s[1])]
    even = [(s[i], s[i + 1]) for i in range(0, m, 2)]
    odd = [(s[i], s[(i + 1) % m]) for i in range(1, m, 2)]
    return even + odd


def build_qcnn(n_qubits: int, kind: str, pooling: bool = True) -> tuple[Circuit, QCNNArchitecture]:
    if n_qubits not in QCNN_LAYERS:
        raise QCNNError(f"QCNN width must be one of {sorted(QCNN_LAYERS)}, got {n_qubits}")
    block = build_ansatz_block(kind)
    ppb = block.n_params
    n_layers = QCNN_LAYERS[n_qubits]
    circ = Circuit(n_qubits, n_layers * ppb)
    surviving = tuple(range(n_qubits))
    layers = []
    for l in range(n_layers):
        layers.append(surviving)
        for a, b in layer_pairs(surviving):
            circ.extend(block, qubit_map=[a, b], slot_offset=l * ppb)
        discarded, retained = surviving[0::2], surviving[1::2]
        if pooling:
            for d, r in zip(discarded, retained):
                circ.cnot(d, r)
        surviving = retained
    arch = QCNNArchitecture(n_qubits, kind, pooling, tuple(layers), surviving[-1])
    return circ, arch


# ---------------------------------------------------------------------------
# prediction and losses
# ---------------------------------------------------------------------------

def predict(circuit: Circuit, params, state: PureState | DensityMatrix, readout: int | None = None,
            noise: NoisePlan | None = None) -> float:
    """<Z> on the readout qubit (default: highest index) after the circuit."""
    if state.n_qubits != circuit.n_qubits:
        raise QCNNError(f"state has {state.n_qubits} qubits, circuit {circuit.n_qubits}")
    q = circuit.n_qubits - 1 if readout is None else readout
    if isinstance(state, PureState) and noise is None:
        return qsim.expectation_z(qsim.run_circuit(circuit, params, state), q)
    dm = state if isinstance(state, DensityMatrix) else state.density_matrix()
    z = qsim.expectation_z(qsim.run_circuit_dm(circuit, params, dm, noise), q)
    if noise is not None:
        slope, off = noise.readout_affine()
        z = slope * z + off
    return float(z)


def classify(yhat) -> np.ndarray:
    """Sign with ties broken toward +1."""
    return np.where(np.asarray(yhat) >= 0, 1, -1)


def _check_pair(labels, preds):
    y = np.asarray(labels, dtype=float)
    p = np.asarray(preds, dtype=float)
    if y.size == 0 or y.shape != p.shape:
        raise QCNNError("labels and predictions must be non-empty and of equal length")
    return y, p


def linear_loss(labels, predictions) -> float:
    y, p = _check_pair(labels, predictions)
    return float(np.mean(0.5 * (1 - y * p)))


def mse_loss(labels, predictions) -> float:
    y, p = _check_pair(labels, predictions)
    return float(np.mean((y - p) ** 2))


def accuracy(labels, predictions) -> float:
    y, p = _check_pair(labels, predictions)
    return float(np.mean(classify(p) == y))


# ---------------------------------------------------------------------------
# batched evaluation over embedded data
# ---------------------------------------------------------------------------

class EmbeddedInputs:
    """Features plus the encoding that turns them into circuit inputs.

    Noiseless inputs are cached pure states; noisy inputs are density matrices
    produced on demand by running the encoding circuit under the noise plan.
    """

    def __init__(self, embedding: Embedding, features, noise: NoisePlan | None = None):
        self.embedding = embedding
        self.features = np.asarray(features, dtype=float)
        self.noise = noise
        self._pure = None if noise is not None else embedding.states(self.features)

    def __len__(self):
        return len(self.features)

    def pure(self, idx) -> np.ndarray:
        return self._pure[idx]

    def dms(self, idx) -> np.ndarray:
        if self.noise is None:
            psi = self._pure[idx]
            return np.einsum("bi,bj->bij", psi, np.conj(psi))
        return self.embedding.noisy_states(self.features[idx], self.noise)


def _z_observable(n: int, q: int) -> np.ndarray:
    return np.diag(qsim.z_signs(n, q)).astype(complex)


def predictions(circuit: Circuit, params, inputs: EmbeddedInputs, readout: int, chunk: int = 64) -> np.ndarray:
    out = []
    n = circuit.n_qubits
    for s in range(0, len(inputs), chunk):
        idx = np.arange(s, min(s + chunk, len(inputs)))
        if inputs.noise is None:
            psi = qsim.run_batch(circuit, params, inputs.pure(idx))
            out.append(qsim.expectation_z_batch(psi, n, readout))
        else:
            rho = qsim.run_dm_batch(circuit, params, inputs.dms(idx), inputs.noise)
            slope, off = inputs.noise.readout_affine()
            out.append(slope * qsim.dm_expectation_z_batch(rho, n, readout) + off)
    return np.concatenate(out) if out else np.zeros(0)


def batch_loss_and_grad(circuit: Circuit, params, inputs: EmbeddedInputs, labels, idx,
                        readout: int) -> tuple[float, np.ndarray]:
    """Linear loss over ``idx`` and its exact parameter gradient (reverse mode)."""
    y = np.asarray(labels, dtype=float)[idx]
    n = circuit.n_qubits
    if inputs.noise is None:
        e, g = qsim.adjoint_expectation_gradient(circuit, params, inputs.pure(idx), readout)
        yhat, dyhat = e, g
    else:
        e, g = qsim.adjoint_dm_gradient(circuit, params, inputs.dms(idx), _z_observable(n, readout), inputs.noise)
        slope, off = inputs.noise.readout_affine()
        yhat, dyhat = slope * e + off, slope * g
    loss = float(np.mean(0.5 * (1 - y * yhat)))
    grad = (-0.5 * y / len(y)) @ dyhat
    return loss, grad


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class QCNNTrainConfig:
    batch_size: int
    learning_rate: float
    iterations: int
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.batch_size <= 0 or self.learning_rate <= 0 or self.iterations <= 0:
            raise QCNNError("batch_size, learning_rate and iterations must be positive")


@dataclass
class QCNNResult:
    params: np.ndarray
    architecture: QCNNArchitecture
    loss_history: list[float]
    train_loss_final: float
    test_accuracy: float
    train_accuracy: float
    test_predictions: np.ndarray = field(repr=False, default=None)
    wallclock_s: float = 0.0

    def snapshot(self) -> dict:
        return {"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION,
                "architecture": self.architecture.to_dict(), "params": self.params.tolist()}

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.snapshot()))
        return path

    def write_history(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "batch_loss"])
            for i, l in enumerate(self.loss_history, 1):
                w.writerow([i, repr(l)])
        return path


def load_snapshot(path) -> tuple[Circuit, QCNNArchitecture, np.ndarray]:
    d = json.loads(Path(path).read_text())
    if d.get("format") != SNAPSHOT_FORMAT or d.get("version") != SNAPSHOT_VERSION:
        raise QCNNError("not a supported QCNN snapshot")
    a = d["architecture"]
    circ, arch = build_qcnn(a["n_qubits"], a["ansatz"], a["pooling"])
    params = np.array(d["params"], dtype=float)
    if params.shape != (arch.n_params,):
        raise QCNNError("snapshot parameter count does not match its architecture")
    return circ, arch, params


def train_qcnn(embedding: Embedding, train: tuple, test: tuple, ansatz: str,
               config: QCNNTrainConfig, pooling: bool = True,
               noise: NoisePlan | None = None) -> QCNNResult:
    """Nesterov-momentum mini-batch training on the linear loss.

    ``train`` and ``test`` are ``(features, labels)`` already in the embedding's
    input space (front-end outputs or rescaled PCA features).
    """
    t0 = time.perf_counter()
    circuit, arch = build_qcnn(embedding.n_qubits, ansatz, pooling)
    x_tr, y_tr = train
    x_te, y_te = test
    y_tr, y_te = np.asarray(y_tr), np.asarray(y_te)
    inp_tr = EmbeddedInputs(embedding, x_tr, noise)
    inp_te = EmbeddedInputs(embedding, x_te, noise)
    rng = np.random.default_rng(config.seed)
    params = rng.standard_normal(arch.n_params)
    opt = Nesterov(config.learning_rate, config.momentum)
    history = []
    n = len(y_tr)
    for it in range(config.iterations):
        idx = np.sort(rng.permutation(n)[:min(config.batch_size, n)])
        look = opt.lookahead(params)
        loss, grad = batch_loss_and_grad(circuit, look, inp_tr, y_tr, idx, arch.readout)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise QCNNError(f"non-finite QCNN loss at iteration {it + 1}")
        params = opt.step(params, grad)
        history.append(loss)
    p_tr = predictions(circuit, params, inp_tr, arch.readout)
    p_te = predictions(circuit, params, inp_te, arch.readout)
    return QCNNResult(params, arch, history, linear_loss(y_tr, p_tr), accuracy(y_te, p_te),
                      accuracy(y_tr, p_tr), p_te, time.perf_counter() - t0)

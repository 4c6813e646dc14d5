"""Kraus-channel noise model used as a stand-in for a superconducting backend.

Times are kept in nanoseconds internally; the config file spells its units in the
key names (``t1_us``, ``dur1_ns`` ...).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .qsim import GATE_KINDS, Circuit, NoisePlan, _ARITY, _apply_matrix

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]

CONFIG_KEYS = ("p1", "p2", "t1_us", "t2_us", "dur1_ns", "dur2_ns", "readout_e01", "readout_e10")


class NoiseError(ValueError):
    pass


class KrausChannel:
    """CPTP map given by Kraus operators of uniform square dimension."""

    def __init__(self, ops):
        ops = [np.asarray(k, dtype=complex) for k in ops]
        if not ops:
            raise NoiseError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise NoiseError("Kraus operators must share one square shape")
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(d))) > 1e-10:
            raise NoiseError("Kraus operators are not trace preserving")
        self.ops = ops
        self.dim = d

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.ops)

    def superop(self) -> np.ndarray:
        """(d*d, d*d) matrix acting on row-major vec(rho)."""
        return sum(np.kron(k, k.conj()) for k in self.ops)

    def compose(self, first: "KrausChannel") -> "KrausChannel":
        """``self`` applied after ``first``."""
        return KrausChannel([a @ b for a in self.ops for b in first.ops])

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        return KrausChannel([np.kron(a, b) for a in self.ops for b in other.ops])

    def completeness_error(self) -> float:
        total = sum(k.conj().T @ k for k in self.ops)
        return float(np.max(np.abs(total - np.eye(self.dim))))


def identity_channel(n_qubits: int = 1) -> KrausChannel:
    return KrausChannel([np.eye(2 ** n_qubits)])


def depolarizing_channel(p: float, n_qubits: int = 1) -> KrausChannel:
    """rho -> (1 - p) rho + p I/d, written as a Pauli twirl."""
    if not 0.0 <= p <= 1.0:
        raise NoiseError(f"depolarizing probability {p} outside [0, 1]")
    if n_qubits not in (1, 2):
        raise NoiseError("depolarizing channel defined for 1 or 2 qubits")
    d2 = 4 ** n_qubits
    ops = []
    for labels in itertools.product(range(4), repeat=n_qubits):
        pauli = _PAULI[labels[0]]
        for lab in labels[1:]:
            pauli = np.kron(pauli, _PAULI[lab])
        weight = 1 - p + p / d2 if not any(labels) else p / d2
        ops.append(np.sqrt(weight) * pauli)
    return KrausChannel(ops)


def thermal_relaxation_channel(t1: float, t2: float, duration: float) -> KrausChannel:
    """Amplitude damping with gamma = 1 - exp(-duration/t1) plus pure dephasing.

    Off-diagonal elements decay by exactly exp(-duration/t2) overall.
    """
    if t1 <= 0 or t2 <= 0:
        raise NoiseError("t1 and t2 must be positive")
    if t2 > 2 * t1 * (1 + 1e-12):
        raise NoiseError(f"t2={t2} exceeds 2*t1={2 * t1}")
    if duration < 0:
        raise NoiseError("negative gate duration")
    gamma = -np.expm1(-duration / t1)
    damp = [np.array([[1, 0], [0, np.sqrt(1 - gamma)]]), np.array([[0, np.sqrt(gamma)], [0, 0]])]
    # amplitude damping alone leaves coherences at exp(-t/2t1)
    rate = max(1.0 / t2 - 0.5 / t1, 0.0)
    f = np.exp(-duration * rate)
    dephase = [np.sqrt((1 + f) / 2) * np.eye(2), np.sqrt((1 - f) / 2) * _PAULI[3]]
    return KrausChannel([a @ b for a in dephase for b in damp])


def _check_confusion(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2) or np.any(m < 0) or np.any(m > 1):
        raise NoiseError("readout confusion must be a 2x2 matrix of probabilities")
    if np.max(np.abs(m.sum(axis=1) - 1)) > 1e-12:
        raise NoiseError("readout confusion rows must sum to 1")
    return m


def apply_readout_error(z_expectation, readout_flip) -> np.ndarray | float:
    """Push <Z> through the outcome confusion matrix (rows = true, columns = read)."""
    m = _check_confusion(readout_flip)
    z = np.asarray(z_expectation, dtype=float)
    if np.any(np.abs(z) > 1 + 1e-9):
        raise NoiseError("expectation outside [-1, 1]")
    p0 = (1 + z) / 2
    p0_read = m[0, 0] * p0 + m[1, 0] * (1 - p0)
    out = 2 * p0_read - 1
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NoiseModel:
    """Gate-level noise parameters. Times in ns."""
    p1: float = 2.5e-4
    p2: float = 7.5e-3
    t1: float = 220e3
    t2: float = 140e3
    dur1: float = 60.0
    dur2: float = 660.0
    readout_flip: np.ndarray = field(default_factory=lambda: np.array([[0.987, 0.013], [0.013, 0.987]]),
                                     compare=False)

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise NoiseError(f"{name}={v} outside [0, 1]")
        if self.t1 <= 0 or self.t2 <= 0:
            raise NoiseError("t1 and t2 must be positive")
        if self.t2 > 2 * self.t1:
            raise NoiseError("t2 must not exceed 2*t1")
        if self.dur1 < 0 or self.dur2 < 0:
            raise NoiseError("gate durations must be non-negative")
        object.__setattr__(self, "readout_flip", _check_confusion(self.readout_flip))

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(p1=0.0, p2=0.0, dur1=0.0, dur2=0.0, readout_flip=np.eye(2))

    def channel_1q(self) -> KrausChannel:
        thermal = thermal_relaxation_channel(self.t1, self.t2, self.dur1)
        return depolarizing_channel(self.p1, 1).compose(thermal)

    def channel_2q(self) -> KrausChannel:
        thermal = thermal_relaxation_channel(self.t1, self.t2, self.dur2)
        return depolarizing_channel(self.p2, 2).compose(thermal.tensor(thermal))

    def idle_layer(self) -> KrausChannel:
        """Single-qubit gate noise, used for contractivity spot checks."""
        return self.channel_1q()

    def to_config(self) -> dict[str, float]:
        return {
            "p1": self.p1, "p2": self.p2,
            "t1_us": self.t1 / 1e3, "t2_us": self.t2 / 1e3,
            "dur1_ns": self.dur1, "dur2_ns": self.dur2,
            "readout_e01": float(self.readout_flip[0, 1]), "readout_e10": float(self.readout_flip[1, 0]),
        }


def bind_noise(circuit: Circuit | None, model: NoiseModel) -> NoisePlan:
    """Attach gate noise to every gate kind; readout error is applied at expectation time.

    ``circuit`` is accepted for interface symmetry; the plan is keyed by gate kind so
    one plan serves any circuit.
    """
    s1 = model.channel_1q().superop()
    s2 = model.channel_2q().superop()
    channels = {kind: (s1 if _ARITY[kind] == 1 else s2) for kind in GATE_KINDS}
    return NoisePlan(channels=channels, readout=np.array(model.readout_flip))


def parse_noise_config(text: str) -> NoiseModel:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise NoiseError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise NoiseError(f"line {lineno}: unknown noise key {key!r}")
        if key in values:
            raise NoiseError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise NoiseError(f"line {lineno}: {key} is not a number: {val!r}") from None
    missing = [k for k in CONFIG_KEYS if k not in values]
    if missing:
        raise NoiseError(f"noise config missing keys: {', '.join(missing)}")
    e01, e10 = values["readout_e01"], values["readout_e10"]
    return NoiseModel(
        p1=values["p1"], p2=values["p2"],
        t1=values["t1_us"] * 1e3, t2=values["t2_us"] * 1e3,
        dur1=values["dur1_ns"], dur2=values["dur2_ns"],
        readout_flip=np.array([[1 - e01, e01], [e10, 1 - e10]]),
    )


def load_noise_config(path: str | Path | None = None) -> NoiseModel:
    """Read a noise config file; ``None`` loads the shipped defaults."""
    if path is None:
        text = resources.files("hivqcnn.configs").joinpath("noise_default.cfg").read_text()
    else:
        text = Path(path).read_text()
    return parse_noise_config(text)


def format_noise_config(model: NoiseModel) -> str:
    return "".join(f"{k}={v!r}\n" for k, v in model.to_config().items())


def apply_channel_each_qubit(rho: np.ndarray, channel: KrausChannel, n_qubits: int) -> np.ndarray:
    """Apply a single-qubit channel to every qubit of a (d, d) density matrix."""
    if channel.dim != 2:
        raise NoiseError("expected a single-qubit channel")
    s = channel.superop()
    vec = np.asarray(rho, dtype=complex).reshape(1, -1)
    for q in range(n_qubits):
        vec = _apply_matrix(vec, s, [q, q + n_qubits], 2 * n_qubits)
    return vec.reshape(rho.shape)

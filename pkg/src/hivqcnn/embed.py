"""Data-to-state encodings (amplitude, angle, linear ZZ), fidelity and trace distance.

Each encoding has two routes:

* an analytic batched route (``Embedding.states`` / ``Embedding.vjp``) giving
  pure states and reverse-mode feature gradients, used in noiseless training;
* a gate-level circuit (``Embedding.circuit`` with per-sample slot angles from
  ``Embedding.angles``), used when the encoding itself must run under noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import qsim
from .qsim import Circuit, DensityMatrix, NoisePlan, PureState

KINDS = ("amplitude", "angle", "zz")


class EmbeddingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# analytic state maps
# ---------------------------------------------------------------------------

def _as_batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None]
    if not np.all(np.isfinite(x)):
        raise EmbeddingError("features must be finite")
    return x


def amplitude_states(x) -> np.ndarray:
    x = _as_batch(x)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise EmbeddingError("amplitude encoding of a zero vector")
    return (x / norms).astype(complex)


def _qubit_factors(x: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(x / 2), np.sin(x / 2)], axis=-1)


def _kron_rows(factors: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product of ``(B, n, 2)`` factors -> ``(B, 2**n)``."""
    out = factors[:, 0, :]
    for i in range(1, factors.shape[1]):
        out = (out[:, :, None] * factors[:, i, None, :]).reshape(out.shape[0], -1)
    return out


def angle_states(x) -> np.ndarray:
    x = _as_batch(x)
    return _kron_rows(_qubit_factors(x)).astype(complex)


def _zz_phase_terms(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Bit table ``(2**n, n)`` and neighbour-parity table ``(2**n, n-1)``."""
    bits = (np.arange(2 ** n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    parity = bits[:, :-1] ^ bits[:, 1:]
    return bits.astype(float), parity.astype(float)


def _zz_phases(f: np.ndarray, bits: np.ndarray, parity: np.ndarray) -> np.ndarray:
    pair = f[:, :-1] * f[:, 1:]
    return 2.0 * f @ bits.T + 2.0 * pair @ parity.T


def _hadamard_all(n: int) -> np.ndarray:
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(out, h)
    return out


def zz_states(x, n_qubits: int) -> np.ndarray:
    x = _as_batch(x)
    if x.shape[1] != 2 * n_qubits:
        raise EmbeddingError(f"ZZ map on {n_qubits} qubits needs {2 * n_qubits} features, got {x.shape[1]}")
    bits, parity = _zz_phase_terms(n_qubits)
    hn = _hadamard_all(n_qubits)
    d = 2 ** n_qubits
    v = np.exp(1j * _zz_phases(x[:, :n_qubits], bits, parity)) / np.sqrt(d)
    u = v @ hn.T
    return np.exp(1j * _zz_phases(x[:, n_qubits:], bits, parity)) * u


# ---------------------------------------------------------------------------
# reverse-mode feature gradients
#
# A cotangent ``c`` for complex amplitudes a means dL = Re sum(conj(c) * da).
# ---------------------------------------------------------------------------

def amplitude_vjp(x, cot) -> np.ndarray:
    x = _as_batch(x)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    a = x / norms
    g = np.real(cot)
    return (g - a * np.sum(a * g, axis=1, keepdims=True)) / norms


def angle_vjp(x, cot) -> np.ndarray:
    x = _as_batch(x)
    n = x.shape[1]
    factors = _qubit_factors(x)
    dfac = 0.5 * np.stack([-np.sin(x / 2), np.cos(x / 2)], axis=-1)
    out = np.zeros_like(x)
    for i in range(n):
        f = factors.copy()
        f[:, i, :] = dfac[:, i, :]
        out[:, i] = np.real(np.sum(np.conj(cot) * _kron_rows(f), axis=1))
    return out


def zz_vjp(x, cot, n_qubits: int) -> np.ndarray:
    x = _as_batch(x)
    n = n_qubits
    bits, parity = _zz_phase_terms(n)
    hn = _hadamard_all(n)
    f1, f2 = x[:, :n], x[:, n:]
    d1 = np.exp(1j * _zz_phases(f1, bits, parity))
    d2 = np.exp(1j * _zz_phases(f2, bits, parity))
    v = d1 / np.sqrt(2 ** n)
    u = v @ hn.T
    psi = d2 * u
    # dL/dphase_b for the second block: Re(conj(c) * i * psi)
    g2 = np.real(np.conj(cot) * 1j * psi)
    cu = np.conj(d2) * cot
    cv = cu @ hn
    g1 = np.real(np.conj(cv) * 1j * v)
    return np.concatenate([_zz_phase_pullback(f1, g1, bits, parity),
                           _zz_phase_pullback(f2, g2, bits, parity)], axis=1)


def _zz_phase_pullback(f, g_phase, bits, parity):
    gs = g_phase @ bits           # d/d(single angle input) for 2*f_i terms
    gp = g_phase @ parity         # d/d(pair product) for 2*f_i*f_{i+1}
    out = 2.0 * gs
    out[:, :-1] += 2.0 * gp * f[:, 1:]
    out[:, 1:] += 2.0 * gp * f[:, :-1]
    return out


# ---------------------------------------------------------------------------
# gate-level circuits (noisy route)
# ---------------------------------------------------------------------------

def _gray(j: int) -> int:
    return j ^ (j >> 1)


def _ucry_sign_matrix(k: int) -> np.ndarray:
    m = 2 ** k
    p = np.arange(m)[:, None]
    g = np.array([_gray(j) for j in range(m)])[None, :]
    pc = np.vectorize(lambda v: bin(v).count("1"))(p & g)
    return np.where(pc % 2 == 0, 1.0, -1.0)


def amplitude_circuit(n: int) -> Circuit:
    """Real-amplitude state preparation as a cascade of uniformly controlled RY gates.

    Level k rotates qubit k conditioned on qubits 0..k-1 using 2**k RY gates and
    2**k CNOTs in Gray-code order. Slots hold the RY angles level by level.
    """
    c = Circuit(n, 2 ** n - 1)
    slot = 0
    for k in range(n):
        m = 2 ** k
        for j in range(m):
            c.ry(k, slot=slot)
            slot += 1
            if k > 0:
                flip = _gray(j) ^ _gray((j + 1) % m)
                control = k - 1 - (flip.bit_length() - 1)
                c.cnot(control, k)
    return c


def _tree_angles(x: np.ndarray, n: int) -> list[np.ndarray]:
    """RY angles per level, before the Gray-code transform."""
    out = []
    for k in range(n):
        blocks = x.reshape(x.shape[0], 2 ** k, 2, -1)
        if k < n - 1:
            a = np.linalg.norm(blocks[:, :, 0, :], axis=-1)
            b = np.linalg.norm(blocks[:, :, 1, :], axis=-1)
        else:
            a, b = blocks[:, :, 0, 0], blocks[:, :, 1, 0]
        out.append(2.0 * np.arctan2(b, a))
    return out


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _tree_angles_vjp(x: np.ndarray, n: int, g_alpha: list[np.ndarray]) -> np.ndarray:
    gx = np.zeros_like(x)
    gblocks_all = []
    for k in range(n):
        blocks = x.reshape(x.shape[0], 2 ** k, 2, -1)
        gb = np.zeros_like(blocks)
        g = g_alpha[k]
        if k < n - 1:
            a = np.linalg.norm(blocks[:, :, 0, :], axis=-1)
            b = np.linalg.norm(blocks[:, :, 1, :], axis=-1)
            r2 = a ** 2 + b ** 2
            da = _safe_div(-2.0 * b, r2)
            db = _safe_div(2.0 * a, r2)
            gb[:, :, 0, :] = (g * _safe_div(da, a))[..., None] * blocks[:, :, 0, :]
            gb[:, :, 1, :] = (g * _safe_div(db, b))[..., None] * blocks[:, :, 1, :]
        else:
            a, b = blocks[:, :, 0, 0], blocks[:, :, 1, 0]
            r2 = a ** 2 + b ** 2
            gb[:, :, 0, 0] = g * _safe_div(-2.0 * b, r2)
            gb[:, :, 1, 0] = g * _safe_div(2.0 * a, r2)
        gblocks_all.append(gb.reshape(x.shape))
    for gb in gblocks_all:
        gx += gb
    return gx


def angle_circuit(n: int) -> Circuit:
    c = Circuit(n, n)
    for q in range(n):
        c.ry(q, slot=q)
    return c


def zz_circuit(n: int) -> Circuit:
    """Two repetitions of H, Phase(2 f_i), and CNOT-Phase(2 f_i f_{i+1})-CNOT."""
    per_rep = 2 * n - 1
    c = Circuit(n, 2 * per_rep)
    for r in range(2):
        base = r * per_rep
        for q in range(n):
            c.h(q)
        for q in range(n):
            c.phase(q, slot=base + q)
        for q in range(n - 1):
            c.cnot(q, q + 1)
            c.phase(q + 1, slot=base + n + q)
            c.cnot(q, q + 1)
    return c


@dataclass(frozen=True)
class Embedding:
    """One encoding kind at a fixed width."""
    kind: str
    n_qubits: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EmbeddingError(f"unknown embedding {self.kind!r}; expected one of {KINDS}")
        if not 1 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise EmbeddingError(f"unsupported width {self.n_qubits}")

    @property
    def arity(self) -> int:
        return {"amplitude": 2 ** self.n_qubits, "angle": self.n_qubits, "zz": 2 * self.n_qubits}[self.kind]

    def _check(self, x) -> np.ndarray:
        x = _as_batch(x)
        if x.shape[1] != self.arity:
            raise EmbeddingError(f"{self.kind} on {self.n_qubits} qubits takes {self.arity} features, got {x.shape[1]}")
        return x

    def states(self, x) -> np.ndarray:
        x = self._check(x)
        if self.kind == "amplitude":
            return amplitude_states(x)
        if self.kind == "angle":
            return angle_states(x)
        return zz_states(x, self.n_qubits)

    def vjp(self, x, cot) -> np.ndarray:
        x = self._check(x)
        if self.kind == "amplitude":
            return amplitude_vjp(x, cot)
        if self.kind == "angle":
            return angle_vjp(x, cot)
        return zz_vjp(x, cot, self.n_qubits)

    # -- gate-level route ---------------------------------------------------
    def circuit(self) -> Circuit:
        if self.kind == "amplitude":
            return amplitude_circuit(self.n_qubits)
        if self.kind == "angle":
            return angle_circuit(self.n_qubits)
        return zz_circuit(self.n_qubits)

    def angles(self, x) -> np.ndarray:
        """Per-sample slot values for ``circuit()``; shape ``(B, n_params)``."""
        x = self._check(x)
        n = self.n_qubits
        if self.kind == "angle":
            return x.copy()
        if self.kind == "zz":
            reps = []
            for f in (x[:, :n], x[:, n:]):
                reps += [2.0 * f, 2.0 * f[:, :-1] * f[:, 1:]]
            return np.concatenate(reps, axis=1)
        alphas = _tree_angles(x, n)
        thetas = [_ucry_sign_matrix(k).T @ a.T / 2 ** k for k, a in enumerate(alphas)]
        return np.concatenate([t.T for t in thetas], axis=1)

    def angles_vjp(self, x, g_angles) -> np.ndarray:
        x = self._check(x)
        n = self.n_qubits
        g = np.asarray(g_angles, dtype=float)
        if self.kind == "angle":
            return g.copy()
        if self.kind == "zz":
            out = []
            per_rep = 2 * n - 1
            for r, f in enumerate((x[:, :n], x[:, n:])):
                gs = g[:, r * per_rep: r * per_rep + n]
                gp = g[:, r * per_rep + n: (r + 1) * per_rep]
                gf = 2.0 * gs
                gf[:, :-1] += 2.0 * gp * f[:, 1:]
                gf[:, 1:] += 2.0 * gp * f[:, :-1]
                out.append(gf)
            return np.concatenate(out, axis=1)
        g_alpha, start = [], 0
        for k in range(n):
            m = 2 ** k
            g_theta = g[:, start:start + m]
            g_alpha.append(g_theta @ _ucry_sign_matrix(k).T / m)
            start += m
        return _tree_angles_vjp(x, n, g_alpha)

    def noisy_states(self, x, plan: NoisePlan | None) -> np.ndarray:
        """Density matrices ``(B, d, d)`` from running the encoding circuit under ``plan``."""
        x = self._check(x)
        d = 2 ** self.n_qubits
        rho0 = np.zeros((x.shape[0], d, d), dtype=complex)
        rho0[:, 0, 0] = 1.0
        return qsim.run_dm_batch(self.circuit(), self.angles(x), rho0, plan)

    def noisy_vjp(self, x, observables, plan: NoisePlan | None) -> tuple[np.ndarray, np.ndarray]:
        """Tr(O_b rho_b(x_b)) per sample and its gradient w.r.t. the features."""
        x = self._check(x)
        d = 2 ** self.n_qubits
        rho0 = np.zeros((x.shape[0], d, d), dtype=complex)
        rho0[:, 0, 0] = 1.0
        vals, g_angles = qsim.adjoint_dm_gradient(self.circuit(), self.angles(x), rho0, observables, plan)
        return vals, self.angles_vjp(x, g_angles)


# ---------------------------------------------------------------------------
# single-state API
# ---------------------------------------------------------------------------

def _n_for(length: int) -> int:
    n = int(round(np.log2(length)))
    if 2 ** n != length or not 1 <= n <= qsim.MAX_QUBITS:
        raise EmbeddingError(f"amplitude encoding needs 2**n features, got {length}")
    return n


def amplitude_encode(x) -> PureState:
    x = np.asarray(x, dtype=float).reshape(-1)
    n = _n_for(x.shape[0])
    if np.linalg.norm(x) <= 1e-12:
        raise EmbeddingError("amplitude encoding of a zero vector")
    return PureState(n, amplitude_states(x)[0])


def angle_encode(x, n_qubits: int | None = None) -> PureState:
    x = np.asarray(x, dtype=float).reshape(-1)
    if n_qubits is not None and x.shape[0] != n_qubits:
        raise EmbeddingError(f"angle encoding on {n_qubits} qubits takes {n_qubits} features, got {x.shape[0]}")
    return PureState(x.shape[0], angle_states(x)[0])


def zz_encode(x, n_qubits: int | None = None) -> PureState:
    x = np.asarray(x, dtype=float).reshape(-1)
    if n_qubits is None:
        if x.shape[0] % 2:
            raise EmbeddingError("ZZ map takes an even number of features (2n)")
        n_qubits = x.shape[0] // 2
    return PureState(n_qubits, zz_states(x, n_qubits)[0])


def fidelity(a: PureState, b: PureState) -> float:
    if a.n_qubits != b.n_qubits:
        raise EmbeddingError(f"width mismatch: {a.n_qubits} vs {b.n_qubits}")
    ov = np.vdot(a.amplitudes, b.amplitudes)
    return float(min(1.0, ov.real ** 2 + ov.imag ** 2))


def batch_fidelity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|<a_k|b_k>|^2 row-wise."""
    return np.abs(np.sum(np.conj(a) * b, axis=1)) ** 2


def mean_density(states) -> np.ndarray:
    """Class-mean density matrix from pure rows ``(N, d)`` or matrices ``(N, d, d)``."""
    s = np.asarray(states)
    if s.ndim == 2:
        return s.T @ np.conj(s) / s.shape[0]
    return s.mean(axis=0)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = rho - sigma
    diff = (diff + diff.conj().T) / 2
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def _stack(items: Iterable) -> np.ndarray:
    items = list(items)
    if not items:
        raise EmbeddingError("empty class ensemble")
    if all(isinstance(s, PureState) for s in items):
        return np.stack([s.amplitudes for s in items])
    mats = []
    for s in items:
        if isinstance(s, PureState):
            mats.append(np.outer(s.amplitudes, np.conj(s.amplitudes)))
        elif isinstance(s, DensityMatrix):
            mats.append(s.matrix)
        else:
            raise EmbeddingError(f"unsupported ensemble member {type(s).__name__}")
    return np.stack(mats)


def ensemble_trace_distance(pos, neg) -> float:
    """Half the trace norm of (mean positive state - mean negative state).

    Accepts lists of ``PureState`` / ``DensityMatrix`` or raw arrays of pure rows
    ``(N, d)`` / matrices ``(N, d, d)``.
    """
    p = pos if isinstance(pos, np.ndarray) else _stack(pos)
    q = neg if isinstance(neg, np.ndarray) else _stack(neg)
    if len(p) == 0 or len(q) == 0:
        raise EmbeddingError("empty class ensemble")
    rho, sigma = mean_density(p), mean_density(q)
    if rho.shape != sigma.shape:
        raise EmbeddingError("ensembles have different widths")
    return trace_distance(rho, sigma)

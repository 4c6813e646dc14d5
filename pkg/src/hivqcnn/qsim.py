"""Dense state-vector and density-matrix simulation for circuits of up to 8 qubits.

Basis convention: basis index ``i`` is read with qubit 0 as the most significant
bit, so ``|q0 q1 ... q_{n-1}>`` maps to ``i = q0 * 2**(n-1) + ... + q_{n-1}``.

The batched engine (``run_batch``, ``run_dm_batch`` and the adjoint gradient
routines) works on raw arrays of shape ``(B, 2**n)`` / ``(B, 2**n, 2**n)``; the
``PureState`` / ``DensityMatrix`` wrappers are for single-state use and tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS = 8

_SQRT2_INV = 1.0 / np.sqrt(2.0)
_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}
ROTATIONS = ("RX", "RY", "RZ", "Phase")
_PARAMETRIC = ROTATIONS + ("CPhase",)
_ARITY = {"X": 1, "Y": 1, "Z": 1, "H": 1, "RX": 1, "RY": 1, "RZ": 1, "Phase": 1,
          "CNOT": 2, "CZ": 2, "CPhase": 2, "U2Q": 2}
GATE_KINDS = tuple(_ARITY)


class CircuitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# gate matrices (vectorised over the angle)
# ---------------------------------------------------------------------------

def _rot_matrix(kind: str, theta) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    c, s = np.cos(t / 2), np.sin(t / 2)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-0.5j * t)
        out[..., 1, 1] = np.exp(0.5j * t)
    elif kind == "Phase":
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.exp(1j * t)
    elif kind == "CPhase":
        out = np.zeros(t.shape + (4, 4), dtype=complex)
        out[..., 0, 0] = out[..., 1, 1] = out[..., 2, 2] = 1.0
        out[..., 3, 3] = np.exp(1j * t)
    else:
        raise CircuitError(f"{kind} is not a parametric gate")
    return out


def _rot_derivative(kind: str, theta) -> np.ndarray:
    """dU/dtheta for the single-angle gates."""
    t = np.asarray(theta, dtype=float)
    c, s = np.cos(t / 2), np.sin(t / 2)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = -s / 2
        out[..., 1, 1] = -s / 2
        out[..., 0, 1] = -0.5j * c
        out[..., 1, 0] = -0.5j * c
    elif kind == "RY":
        out[..., 0, 0] = -s / 2
        out[..., 1, 1] = -s / 2
        out[..., 0, 1] = -c / 2
        out[..., 1, 0] = c / 2
    elif kind == "RZ":
        out[..., 0, 0] = -0.5j * np.exp(-0.5j * t)
        out[..., 1, 1] = 0.5j * np.exp(0.5j * t)
    elif kind == "Phase":
        out[..., 1, 1] = 1j * np.exp(1j * t)
    elif kind == "CPhase":
        out = np.zeros(t.shape + (4, 4), dtype=complex)
        out[..., 3, 3] = 1j * np.exp(1j * t)
    else:
        raise CircuitError(f"{kind} is not a parametric gate")
    return out


@dataclass(frozen=True)
class Gate:
    """One gate application.

    Parametric gates either carry a fixed ``angle`` or read ``scale * params[slot]``.
    ``unitary`` is only used by the generic two-qubit kind ``U2Q``.
    """
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    slot: int | None = None
    scale: float = 1.0
    unitary: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != _ARITY[self.kind]:
            raise CircuitError(f"{self.kind} acts on {_ARITY[self.kind]} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"duplicate targets {self.qubits}")
        if min(self.qubits) < 0:
            raise CircuitError(f"negative qubit index in {self.qubits}")
        if self.kind in _PARAMETRIC:
            if self.slot is None and self.angle is None:
                object.__setattr__(self, "angle", 0.0)
        elif self.slot is not None or self.angle is not None:
            raise CircuitError(f"{self.kind} takes no angle")
        if self.kind == "U2Q":
            u = np.asarray(self.unitary, dtype=complex)
            if u.shape != (4, 4):
                raise CircuitError("U2Q needs a 4x4 unitary")
            if np.max(np.abs(u.conj().T @ u - np.eye(4))) > 1e-10:
                raise CircuitError("U2Q matrix is not unitary")
            object.__setattr__(self, "unitary", u)

    @property
    def parametric(self) -> bool:
        return self.kind in _PARAMETRIC

    def matrix(self, theta=None) -> np.ndarray:
        if self.kind in _FIXED:
            return _FIXED[self.kind]
        if self.kind == "U2Q":
            return self.unitary
        return _rot_matrix(self.kind, self.angle if theta is None else theta)

    def derivative(self, theta) -> np.ndarray:
        return _rot_derivative(self.kind, theta)


class Circuit:
    """Ordered gate list with a parameter-slot map.

    Slots may be shared: several gates can read the same entry of the parameter
    vector, each with its own scale factor.
    """

    def __init__(self, n_qubits: int, n_params: int = 0, gates: Sequence[Gate] = ()):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        self.n_qubits = n_qubits
        self.n_params = n_params
        self.gates: list[Gate] = []
        for g in gates:
            self.append(g)

    def append(self, gate: Gate) -> "Circuit":
        if max(gate.qubits) >= self.n_qubits:
            raise CircuitError(f"target {gate.qubits} out of range for {self.n_qubits} qubits")
        if gate.slot is not None and not 0 <= gate.slot < self.n_params:
            raise CircuitError(f"slot {gate.slot} outside declared parameter count {self.n_params}")
        self.gates.append(gate)
        return self

    def add(self, kind: str, *qubits: int, angle=None, slot=None, scale=1.0, unitary=None) -> "Circuit":
        return self.append(Gate(kind, qubits, angle=angle, slot=slot, scale=scale, unitary=unitary))

    # short builders used all over the ansatz / embedding code
    def h(self, q): return self.add("H", q)
    def x(self, q): return self.add("X", q)
    def cnot(self, c, t): return self.add("CNOT", c, t)
    def cz(self, a, b): return self.add("CZ", a, b)
    def rx(self, q, **kw): return self.add("RX", q, **kw)
    def ry(self, q, **kw): return self.add("RY", q, **kw)
    def rz(self, q, **kw): return self.add("RZ", q, **kw)
    def phase(self, q, **kw): return self.add("Phase", q, **kw)

    def extend(self, other: "Circuit", qubit_map: Sequence[int] | None = None, slot_offset: int = 0) -> "Circuit":
        """Append ``other``'s gates, relabelling qubits and shifting slots."""
        qmap = list(range(other.n_qubits)) if qubit_map is None else list(qubit_map)
        for g in other.gates:
            slot = None if g.slot is None else g.slot + slot_offset
            self.append(Gate(g.kind, tuple(qmap[q] for q in g.qubits), angle=g.angle,
                             slot=slot, scale=g.scale, unitary=g.unitary))
        return self

    def __len__(self):
        return len(self.gates)

    def slot_bindings(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {k: [] for k in range(self.n_params)}
        for j, g in enumerate(self.gates):
            if g.slot is not None:
                out[g.slot].append(j)
        return out

    def gate_angles(self, params) -> np.ndarray:
        """Resolve parameters into one angle per gate; shape ``(G,)`` or ``(B, G)``."""
        p = np.asarray(params, dtype=float)
        if p.shape[-1:] != (self.n_params,):
            raise CircuitError(f"expected {self.n_params} parameters, got shape {p.shape}")
        out = np.zeros(p.shape[:-1] + (len(self.gates),))
        for j, g in enumerate(self.gates):
            if g.slot is not None:
                out[..., j] = g.scale * p[..., g.slot]
            elif g.angle is not None:
                out[..., j] = g.angle
        return out

    def unitary(self, params=None) -> np.ndarray:
        """Full 2^n x 2^n matrix (columns are images of basis states)."""
        dim = 2 ** self.n_qubits
        params = np.zeros(self.n_params) if params is None else params
        return run_batch(self, params, np.eye(dim, dtype=complex)).T


# ---------------------------------------------------------------------------
# low level batched application
# ---------------------------------------------------------------------------

def _apply_matrix(vec: np.ndarray, mat: np.ndarray, axes: Sequence[int], nq: int) -> np.ndarray:
    """Apply a (batched) 2^k x 2^k matrix to ``axes`` of a ``(B, 2**nq)`` array."""
    b = vec.shape[0]
    k = len(axes)
    t = vec.reshape((b,) + (2,) * nq)
    src = [a + 1 for a in axes]
    dst = list(range(1, k + 1))
    t = np.moveaxis(t, src, dst)
    shape = t.shape
    t = np.matmul(mat, t.reshape(b, 2 ** k, -1)).reshape(shape)
    return np.moveaxis(t, dst, src).reshape(b, -1)


def _bits(nq: int, q: int) -> np.ndarray:
    return (np.arange(2 ** nq) >> (nq - 1 - q)) & 1


def _apply_gate_vec(vec: np.ndarray, gate: Gate, theta, nq: int, offset: int = 0,
                    conj: bool = False, dagger: bool = False) -> np.ndarray:
    """Apply ``gate`` to qubits shifted by ``offset`` of an nq-qubit batched vector.

    ``conj`` applies U* (used for density-matrix columns); ``dagger`` applies U^dagger.
    """
    qs = [q + offset for q in gate.qubits]
    if gate.kind == "X" or gate.kind == "CNOT":
        idx = np.arange(2 ** nq)
        if gate.kind == "X":
            perm = idx ^ (1 << (nq - 1 - qs[0]))
        else:
            perm = idx ^ (((idx >> (nq - 1 - qs[0])) & 1) << (nq - 1 - qs[1]))
        return vec[:, perm]
    if gate.kind in ("Z", "CZ", "RZ", "Phase", "CPhase"):
        if gate.kind in ("Z", "CZ"):
            diag = np.diagonal(_FIXED[gate.kind])
        else:
            diag = np.diagonal(_rot_matrix(gate.kind, theta), axis1=-2, axis2=-1)
        if conj != dagger:
            diag = np.conj(diag)
        code = _bits(nq, qs[0]) if len(qs) == 1 else 2 * _bits(nq, qs[0]) + _bits(nq, qs[1])
        return vec * diag[..., code]
    mat = gate.matrix(theta)
    if conj:
        mat = np.conj(mat)
    if dagger:
        mat = np.conj(np.swapaxes(mat, -1, -2))
    return _apply_matrix(vec, mat, qs, nq)


def _angle(angles: np.ndarray, j: int):
    return angles[..., j] if angles.ndim == 1 else angles[:, j]


def _check_batch(circuit: Circuit, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=complex)
    if states.ndim == 1:
        states = states[None]
    if states.shape[-1] != 2 ** circuit.n_qubits:
        raise CircuitError(f"state width {states.shape[-1]} does not match {circuit.n_qubits} qubits")
    return states


def run_batch(circuit: Circuit, params, states: np.ndarray) -> np.ndarray:
    """Evolve a batch of state vectors ``(B, 2**n)``; params ``(P,)`` or ``(B, P)``."""
    psi = _check_batch(circuit, states)
    angles = circuit.gate_angles(params)
    n = circuit.n_qubits
    for j, g in enumerate(circuit.gates):
        theta = _angle(angles, j) if g.parametric else None
        psi = _apply_gate_vec(psi, g, theta, n)
    return psi


def z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    return 1.0 - 2.0 * _bits(n_qubits, qubit)


def expectation_z_batch(states: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    return np.sum(np.abs(states) ** 2 * z_signs(n_qubits, qubit), axis=-1)


def adjoint_expectation_gradient(circuit: Circuit, params, states: np.ndarray, qubit: int,
                                 weights=None) -> tuple[np.ndarray, np.ndarray]:
    """<Z_qubit> per sample and its exact parameter gradient by reverse-mode sweep.

    Returns ``(E, G)`` with ``E`` of shape ``(B,)`` and ``G`` of shape ``(B, P)``
    (per-sample gradients). ``weights`` scales each sample's contribution to G.
    Handles every parametric gate kind, including controlled phases.
    """
    psi = run_batch(circuit, params, states)
    n = circuit.n_qubits
    signs = z_signs(n, qubit)
    energy = np.sum(np.abs(psi) ** 2 * signs, axis=-1)
    lam = psi * signs
    if weights is not None:
        lam = lam * np.asarray(weights, dtype=float)[:, None]
    angles = circuit.gate_angles(params)
    grads = np.zeros((psi.shape[0], circuit.n_params))
    for j in range(len(circuit.gates) - 1, -1, -1):
        g = circuit.gates[j]
        theta = _angle(angles, j) if g.parametric else None
        psi = _apply_gate_vec(psi, g, theta, n, dagger=True)
        if g.slot is not None:
            dpsi = _apply_matrix(psi, g.derivative(theta), g.qubits, n)
            grads[:, g.slot] += g.scale * 2.0 * np.real(np.sum(np.conj(lam) * dpsi, axis=-1))
        lam = _apply_gate_vec(lam, g, theta, n, dagger=True)
    return energy, grads


# ---------------------------------------------------------------------------
# density matrices
# ---------------------------------------------------------------------------

def _superop_from_unitary(u: np.ndarray) -> np.ndarray:
    d = u.shape[-1]
    s = np.einsum("...ac,...bd->...abcd", u, np.conj(u))
    return s.reshape(u.shape[:-2] + (d * d, d * d))


def _dm_axes(qubits: Sequence[int], n: int) -> list[int]:
    return list(qubits) + [q + n for q in qubits]


def _embed_superop(s: np.ndarray, gate_qubits: tuple[int, ...], block: tuple[int, ...]) -> np.ndarray:
    """Lift a gate superoperator onto the (at most two-qubit) support of its block."""
    lead = s.shape[:-2]
    k, m = len(gate_qubits), len(block)
    pos = [block.index(q) for q in gate_qubits]
    if k == m and pos == list(range(m)):
        return s
    nl = len(lead)
    if k == m:  # two qubits, reversed order
        t = s.reshape(lead + (2,) * 8)
        perm = list(range(nl)) + [nl + i for i in (1, 0, 3, 2, 5, 4, 7, 6)]
        return t.transpose(perm).reshape(lead + (16, 16))
    t = s.reshape(lead + (2,) * 4)
    eye = np.eye(2)
    spec = "...abcd,ef,gh->...aebgcfdh" if pos[0] == 0 else "...abcd,ef,gh->...eagbfchd"
    return np.einsum(spec, t, eye, eye).reshape(lead + (16, 16))


def _fuse_blocks(circuit: Circuit) -> list[tuple[tuple[int, ...], list[int]]]:
    """Greedy grouping of consecutive gates whose joint support has at most two qubits."""
    blocks: list[tuple[tuple[int, ...], list[int]]] = []
    support: tuple[int, ...] = ()
    members: list[int] = []
    for j, g in enumerate(circuit.gates):
        joint = support + tuple(q for q in g.qubits if q not in support)
        if members and len(joint) > 2:
            blocks.append((support, members))
            support, members = tuple(g.qubits), [j]
        else:
            support, members = joint, members + [j]
    if members:
        blocks.append((support, members))
    return blocks


class _DMProgram:
    """Circuit as a list of fused blocks, each one superoperator on <= 2 qubits.

    Every gate contributes ``N_kind @ (U (x) U*)``; a block is the ordered product
    of its gates' lifted superoperators.
    """

    def __init__(self, circuit: Circuit, noise: "NoisePlan | None"):
        self.circuit = circuit
        self.noise = noise
        if noise is not None:
            missing = {g.kind for g in circuit.gates} - set(noise.channels)
            if missing:
                raise CircuitError(f"no noise channel bound for gate kind(s) {sorted(missing)}")
        self.blocks = _fuse_blocks(circuit)

    def _gate_superop(self, j: int, theta, derivative: bool = False) -> np.ndarray:
        g = self.circuit.gates[j]
        u = g.matrix(theta)
        if derivative:
            du = g.derivative(theta)
            d = u.shape[-1]
            s = (np.einsum("...ac,...bd->...abcd", du, np.conj(u))
                 + np.einsum("...ac,...bd->...abcd", u, np.conj(du))).reshape(u.shape[:-2] + (d * d, d * d))
        else:
            s = _superop_from_unitary(u)
        if self.noise is not None:
            s = np.matmul(self.noise.channels[g.kind], s)
        return s

    def _lifted(self, bi: int, angles: np.ndarray, derivative: bool = False):
        support, members = self.blocks[bi]
        out = []
        for j in members:
            g = self.circuit.gates[j]
            theta = _angle(angles, j) if g.parametric else None
            out.append(_embed_superop(self._gate_superop(j, theta, derivative and g.slot is not None),
                                      g.qubits, support))
        return out

    def block_superop(self, bi: int, angles: np.ndarray) -> np.ndarray:
        mats = self._lifted(bi, angles)
        s = mats[0]
        for m in mats[1:]:
            s = np.matmul(m, s)
        return s

    def apply(self, vec: np.ndarray, bi: int, angles: np.ndarray, s: np.ndarray | None = None) -> np.ndarray:
        n = self.circuit.n_qubits
        s = self.block_superop(bi, angles) if s is None else s
        return _apply_matrix(vec, s, _dm_axes(self.blocks[bi][0], n), 2 * n)

    def block_gradients(self, bi: int, angles: np.ndarray, cross: np.ndarray, grads: np.ndarray):
        """Accumulate Re sum(A_t dS_t B_t * cross) into ``grads`` for each slot-bound gate."""
        _, members = self.blocks[bi]
        bound = [t for t, j in enumerate(members) if self.circuit.gates[j].slot is not None]
        if not bound:
            return
        mats = self._lifted(bi, angles)
        dmats = {}
        for t in bound:
            j = members[t]
            g = self.circuit.gates[j]
            dmats[t] = _embed_superop(self._gate_superop(j, _angle(angles, j), True), g.qubits,
                                      self.blocks[bi][0])
        # prefix[t] = S_{t-1} ... S_0 ; suffix[t] = S_last ... S_{t+1}
        d = mats[0].shape[-1]
        prefix = [np.eye(d)]
        for m in mats[:-1]:
            prefix.append(np.matmul(m, prefix[-1]))
        suffix = [None] * len(mats)
        acc = np.eye(d)
        for t in range(len(mats) - 1, -1, -1):
            suffix[t] = acc
            acc = np.matmul(acc, mats[t])
        for t in bound:
            g = self.circuit.gates[members[t]]
            full = np.matmul(suffix[t], np.matmul(dmats[t], prefix[t]))
            grads[:, g.slot] += g.scale * np.real(np.sum(full * cross, axis=(-2, -1)))


@dataclass
class NoisePlan:
    """Superoperators to apply after each gate kind, plus the readout confusion matrix.

    ``channels[kind]`` is a ``(d*d, d*d)`` superoperator in (row, column) index order.
    """
    channels: dict[str, np.ndarray]
    readout: np.ndarray | None = None

    def readout_affine(self) -> tuple[float, float]:
        """(slope, offset) such that the measured <Z> = slope * <Z> + offset."""
        if self.readout is None:
            return 1.0, 0.0
        e01, e10 = self.readout[0, 1], self.readout[1, 0]
        return 1.0 - e01 - e10, e10 - e01


def _check_dm_batch(circuit: Circuit, rhos: np.ndarray) -> np.ndarray:
    rhos = np.asarray(rhos, dtype=complex)
    if rhos.ndim == 2:
        rhos = rhos[None]
    d = 2 ** circuit.n_qubits
    if rhos.shape[-2:] != (d, d):
        raise CircuitError(f"density matrix shape {rhos.shape[-2:]} does not match {circuit.n_qubits} qubits")
    return rhos.reshape(rhos.shape[0], d * d)


def run_dm_batch(circuit: Circuit, params, rhos: np.ndarray, noise: NoisePlan | None = None) -> np.ndarray:
    """Evolve a batch of density matrices ``(B, 2**n, 2**n)``."""
    vec = _check_dm_batch(circuit, rhos)
    prog = _DMProgram(circuit, noise)
    angles = circuit.gate_angles(params)
    for bi in range(len(prog.blocks)):
        vec = prog.apply(vec, bi, angles)
    d = 2 ** circuit.n_qubits
    return vec.reshape(-1, d, d)


def dm_expectation_z_batch(rhos: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    diag = np.real(np.diagonal(rhos, axis1=-2, axis2=-1))
    return np.sum(diag * z_signs(n_qubits, qubit), axis=-1)


def _cross(lam: np.ndarray, rho: np.ndarray, axes: list[int], n2: int) -> np.ndarray:
    """M[a, b] = sum_rest conj(lam[a, rest]) rho[b, rest] over the block axes."""
    b = lam.shape[0]
    k = len(axes)
    src = [a + 1 for a in axes]
    dst = list(range(1, k + 1))
    lt = np.moveaxis(lam.reshape((b,) + (2,) * n2), src, dst).reshape(b, 2 ** k, -1)
    rt = np.moveaxis(rho.reshape((b,) + (2,) * n2), src, dst).reshape(b, 2 ** k, -1)
    return np.matmul(np.conj(lt), np.swapaxes(rt, 1, 2))


def adjoint_dm_gradient(circuit: Circuit, params, rhos: np.ndarray, observable,
                        noise: NoisePlan | None = None, checkpoint: int | None = None
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Tr(O rho_out) per sample and its gradient w.r.t. the parameters.

    ``observable`` is either ``(d, d)`` or per-sample ``(B, d, d)`` and must be
    Hermitian. Intermediate states are recomputed from checkpoints spaced
    ``checkpoint`` blocks apart (default ~sqrt(#blocks)) to bound memory.
    """
    vec = _check_dm_batch(circuit, rhos)
    b = vec.shape[0]
    n = circuit.n_qubits
    d = 2 ** n
    prog = _DMProgram(circuit, noise)
    angles = circuit.gate_angles(params)
    n_blocks = len(prog.blocks)
    k = checkpoint or max(1, int(np.ceil(np.sqrt(max(n_blocks, 1)))))
    checkpoints = {}
    for bi in range(n_blocks):
        if bi % k == 0:
            checkpoints[bi] = vec
        vec = prog.apply(vec, bi, angles)
    obs = np.asarray(observable, dtype=complex)
    lam = np.broadcast_to(obs, (b, d, d)).reshape(b, d * d).copy()
    # <A, B> = sum conj(A) * B equals Tr(A^dagger B); A Hermitian
    energy = np.real(np.sum(np.conj(lam) * vec, axis=-1))
    grads = np.zeros((b, circuit.n_params))
    for start in sorted(checkpoints, reverse=True):
        stop = min(start + k, n_blocks)
        states = [checkpoints[start]]
        sups = {}
        for bi in range(start, stop - 1):
            sups[bi] = prog.block_superop(bi, angles)
            states.append(prog.apply(states[-1], bi, angles, sups[bi]))
        for bi in range(stop - 1, start - 1, -1):
            axes = _dm_axes(prog.blocks[bi][0], n)
            prog.block_gradients(bi, angles, _cross(lam, states[bi - start], axes, 2 * n), grads)
            s = sups.get(bi)
            if s is None:
                s = prog.block_superop(bi, angles)
            lam = _apply_matrix(lam, np.conj(np.swapaxes(s, -1, -2)), axes, 2 * n)
    return energy, grads


# ---------------------------------------------------------------------------
# single-state API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}]")
        if amps.shape != (2 ** self.n_qubits,):
            raise CircuitError(f"expected {2 ** self.n_qubits} amplitudes, got {amps.shape[0]}")
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-10:
            raise CircuitError("state is not normalised")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "PureState":
        amps = np.zeros(2 ** n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, np.conj(self.amplitudes)))


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = 2 ** self.n_qubits
        if m.shape != (d, d):
            raise CircuitError(f"expected {d}x{d} matrix, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise CircuitError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise CircuitError("density matrix trace is not 1")
        if np.linalg.eigvalsh(m)[0] < -1e-9:
            raise CircuitError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        d = 2 ** n_qubits
        return cls(n_qubits, np.eye(d, dtype=complex) / d)


def apply_gate(state: PureState, gate: Gate, theta: float | None = None) -> PureState:
    """U|psi> for one gate; ``theta`` overrides a fixed angle."""
    if max(gate.qubits) >= state.n_qubits:
        raise CircuitError(f"target {gate.qubits} out of range for {state.n_qubits} qubits")
    if gate.parametric and theta is None:
        if gate.slot is not None and gate.angle is None:
            raise CircuitError("slot-bound gate needs an explicit angle")
        theta = gate.angle
    out = _apply_gate_vec(state.amplitudes[None], gate, theta, state.n_qubits)[0]
    return PureState(state.n_qubits, out)


def _check_width(circuit: Circuit, n_qubits: int):
    if circuit.n_qubits != n_qubits:
        raise CircuitError(f"circuit has {circuit.n_qubits} qubits, state has {n_qubits}")


def run_circuit(circuit: Circuit, params, state: PureState) -> PureState:
    _check_width(circuit, state.n_qubits)
    out = run_batch(circuit, np.asarray(params, dtype=float), state.amplitudes)[0]
    return PureState(state.n_qubits, out / np.linalg.norm(out))


def expectation_z(state: PureState | DensityMatrix, qubit: int) -> float:
    if not 0 <= qubit < state.n_qubits:
        raise CircuitError(f"qubit {qubit} out of range")
    if isinstance(state, DensityMatrix):
        return float(dm_expectation_z_batch(state.matrix[None], state.n_qubits, qubit)[0])
    return float(expectation_z_batch(state.amplitudes[None], state.n_qubits, qubit)[0])


def run_circuit_dm(circuit: Circuit, params, state: DensityMatrix, noise: NoisePlan | None = None) -> DensityMatrix:
    _check_width(circuit, state.n_qubits)
    out = run_dm_batch(circuit, np.asarray(params, dtype=float), state.matrix, noise)[0]
    out = (out + out.conj().T) / 2
    return DensityMatrix(state.n_qubits, out)


def gradient(circuit: Circuit, params, state: PureState, qubit: int) -> np.ndarray:
    """d<Z_qubit>/d(param) by the two-point parameter-shift rule.

    Every slot-bound gate must be a single-angle rotation (RX, RY, RZ, Phase);
    shared slots sum the shifted contributions of all their gates.
    """
    _check_width(circuit, state.n_qubits)
    for g in circuit.gates:
        if g.slot is not None and g.kind not in ROTATIONS:
            raise CircuitError(f"parameter shift needs rotation gates; slot {g.slot} drives {g.kind}")
    angles = circuit.gate_angles(params)
    bound = [j for j, g in enumerate(circuit.gates) if g.slot is not None]
    if not bound:
        return np.zeros(circuit.n_params)
    # one row per shifted evaluation: +pi/2 and -pi/2 for every bound gate
    shifted = np.repeat(angles[None], 2 * len(bound), axis=0)
    for row, j in enumerate(bound):
        shifted[2 * row, j] += np.pi / 2
        shifted[2 * row + 1, j] -= np.pi / 2
    psi = np.repeat(state.amplitudes[None], shifted.shape[0], axis=0)
    for j, g in enumerate(circuit.gates):
        theta = shifted[:, j] if g.parametric else None
        psi = _apply_gate_vec(psi, g, theta, circuit.n_qubits)
    e = expectation_z_batch(psi, circuit.n_qubits, qubit)
    out = np.zeros(circuit.n_params)
    for row, j in enumerate(bound):
        g = circuit.gates[j]
        out[g.slot] += g.scale * (e[2 * row] - e[2 * row + 1]) / 2
    return out


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_state(n_qubits: int, rng: np.random.Generator) -> PureState:
    v = rng.standard_normal(2 ** n_qubits) + 1j * rng.standard_normal(2 ** n_qubits)
    return PureState(n_qubits, v / np.linalg.norm(v))


def random_rotation_circuit(n_qubits: int, n_params: int, n_gates: int, rng: np.random.Generator) -> Circuit:
    """Random rotation + CNOT circuit; every slot is bound at least once when n_gates allows."""
    c = Circuit(n_qubits, n_params)
    for j in range(n_gates):
        if n_qubits > 1 and rng.random() < 0.3:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            c.cnot(int(a), int(b))
        else:
            kind = ROTATIONS[rng.integers(len(ROTATIONS))]
            slot = j % n_params if j < n_params else int(rng.integers(n_params))
            c.add(kind, int(rng.integers(n_qubits)), slot=slot, scale=float(rng.choice([1.0, 0.5, -0.5, 2.0])))
    return c


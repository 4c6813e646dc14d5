"""Quick invariant suites behind ``hivqcnn selftest`` (seconds, no dataset needed)."""
from __future__ import annotations

import time

import numpy as np

from . import embed, noise, nqe, presets, qcnn, qsim
from .embed import Embedding


def _kron_oracle(gate: qsim.Gate, theta, n: int) -> np.ndarray:
    """Full-space matrix of ``gate`` built from Kronecker products (qubit 0 = MSB)."""
    u = gate.matrix(theta)
    if len(gate.qubits) == 1:
        (q,) = gate.qubits
        return np.kron(np.kron(np.eye(2 ** q), u), np.eye(2 ** (n - q - 1)))
    d = 2 ** n
    out = np.zeros((d, d), dtype=complex)
    a, b = gate.qubits
    for col in range(d):
        bits = [(col >> (n - 1 - k)) & 1 for k in range(n)]
        sub = 2 * bits[a] + bits[b]
        for r in range(4):
            nb = list(bits)
            nb[a], nb[b] = r >> 1, r & 1
            row = sum(bit << (n - 1 - k) for k, bit in enumerate(nb))
            out[row, col] += u[r, sub]
    return out


def gate_oracle(rng, cases=200) -> float:
    worst = 0.0
    kinds = ["H", "X", "RX", "RY", "RZ", "Phase", "CNOT", "CZ"]
    for _ in range(cases):
        n = int(rng.integers(1, 5))
        kind = kinds[rng.integers(len(kinds) if n > 1 else 6)]
        qs = tuple(int(q) for q in rng.choice(n, size=2 if kind in ("CNOT", "CZ") else 1, replace=False))
        theta = float(rng.uniform(-np.pi, np.pi)) if kind in qsim.ROTATIONS else None
        g = qsim.Gate(kind, qs, angle=theta)
        psi = qsim.random_state(n, rng)
        got = qsim.apply_gate(psi, g, theta).amplitudes
        worst = max(worst, float(np.max(np.abs(got - _kron_oracle(g, theta, n) @ psi.amplitudes))))
    return worst


def unitarity(rng, cases=50) -> float:
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 6))
        c = qsim.random_rotation_circuit(n, 4, 12, rng)
        u = c.unitary(rng.uniform(-np.pi, np.pi, 4))
        worst = max(worst, float(np.max(np.abs(u.conj().T @ u - np.eye(2 ** n)))))
    return worst


def dm_legality(rng, cases=20) -> float:
    plan = noise.bind_noise(None, noise.load_noise_config())
    circ, arch = qcnn.build_qcnn(4, "U6")
    worst = 0.0
    for _ in range(cases):
        psi = qsim.random_state(4, rng).amplitudes
        rho = qsim.run_dm_batch(circ, rng.normal(size=arch.n_params), np.outer(psi, psi.conj())[None], plan)[0]
        herm = np.max(np.abs(rho - rho.conj().T))
        ev = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
        worst = max(worst, float(herm), abs(float(np.trace(rho).real) - 1), max(0.0, -float(ev[0])))
    return worst


def kraus_completeness() -> float:
    m = noise.load_noise_config()
    return max(m.channel_1q().completeness_error(), m.channel_2q().completeness_error())


def trace_distance_oracle(rng, cases=100) -> float:
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 5))
        a, b = qsim.random_state(n, rng), qsim.random_state(n, rng)
        d = embed.trace_distance(a.density_matrix().matrix, b.density_matrix().matrix)
        worst = max(worst, abs(d - np.sqrt(max(0.0, 1 - embed.fidelity(a, b)))))
    return worst


def param_counts() -> bool:
    want = {4: (30, 20, 12, 8, 4), 8: (45, 30, 18, 12, 6)}
    ok = all(qcnn.build_qcnn(n, k)[1].n_params == w for n, ws in want.items()
             for k, w in zip(presets.ANSATZ_ORDER, ws))
    ok &= all(presets.count_layers(b.layers) == b.declared_params for b in presets.BASELINES if not b.skipped)
    return ok


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def qcnn_gradients(rng, cases=5) -> float:
    worst = 0.0
    for k in range(cases):
        kind = presets.ANSATZ_ORDER[k % 5]
        circ, arch = qcnn.build_qcnn(4, kind)
        p = rng.normal(size=arch.n_params)
        psi = qsim.random_state(4, rng)
        shift = qsim.gradient(circ, p, psi, arch.readout)
        h = 1e-6
        fd = np.array([(qsim.expectation_z(qsim.run_circuit(circ, p + h * e, psi), arch.readout)
                        - qsim.expectation_z(qsim.run_circuit(circ, p - h * e, psi), arch.readout)) / (2 * h)
                       for e in np.eye(arch.n_params)])
        worst = max(worst, _rel(shift, fd))
    return worst


def nqe_gradients(rng, cases=3) -> float:
    worst = 0.0
    for k in range(cases):
        emb = Embedding(embed.KINDS[k % 3], 3)
        net = nqe.DenseNet.init(((6, 5, True), (5, emb.arity, True)), rng)
        xa, xb = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        ya, yb = rng.choice([-1, 1], 4), rng.choice([-1, 1], 4)
        _, g = nqe.loss_and_grad(net, emb, xa, ya, xb, yb)
        th = net.flat()
        h = 1e-6
        fd = np.array([(nqe.loss_and_grad(net.with_flat(th + h * e), emb, xa, ya, xb, yb, need_grad=False)[0]
                        - nqe.loss_and_grad(net.with_flat(th - h * e), emb, xa, ya, xb, yb, need_grad=False)[0])
                       / (2 * h) for e in np.eye(len(th))])
        worst = max(worst, _rel(g, fd))
    return worst


SUITES = (
    ("gate application vs Kronecker oracle", lambda r: gate_oracle(r), 1e-9),
    ("circuit unitarity", lambda r: unitarity(r), 1e-9),
    ("noisy density-matrix legality", lambda r: dm_legality(r), 1e-9),
    ("Kraus completeness", lambda r: kraus_completeness(), 1e-10),
    ("pure trace distance vs sqrt(1-F)", lambda r: trace_distance_oracle(r), 1e-9),
    ("parameter-count audit", lambda r: 0.0 if param_counts() else 1.0, 0.5),
    ("QCNN parameter shift vs finite differences", lambda r: qcnn_gradients(r), 1e-4),
    ("NQE backprop vs finite differences", lambda r: nqe_gradients(r), 1e-4),
)


def run_all(verbose: bool = True, seed: int = 7) -> bool:
    ok_all = True
    for name, fn, tol in SUITES:
        t0 = time.perf_counter()
        err = fn(np.random.default_rng(seed))
        ok = err <= tol
        ok_all &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: worst {err:.2e} (tol {tol:.0e}, {time.perf_counter() - t0:.2f}s)")
    return ok_all

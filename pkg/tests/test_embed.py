from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hivqcnn import embed, qsim
from hivqcnn.embed import Embedding
from hivqcnn.qsim import PureState

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


def phase(t):
    return np.diag([1, np.exp(1j * t)])


def zz_oracle_2q(x):
    """Hand-composed 4x4 product for two qubits and two repetitions."""
    psi = np.array([1, 0, 0, 0], dtype=complex)
    for r in range(2):
        a, b = x[2 * r], x[2 * r + 1]
        psi = np.kron(H, H) @ psi
        psi = np.kron(phase(2 * a), phase(2 * b)) @ psi
        psi = CNOT @ np.kron(np.eye(2), phase(2 * a * b)) @ CNOT @ psi
    return psi


# -- amplitude ---------------------------------------------------------------

def test_amplitude_basis_vector():
    x = np.zeros(16)
    x[0] = 1
    assert np.allclose(embed.amplitude_encode(x).amplitudes, np.eye(16)[0])


def test_amplitude_uniform():
    assert np.allclose(embed.amplitude_encode([1, 1, 1, 1]).amplitudes, 0.5)


@pytest.mark.parametrize("seed", range(10))
def test_amplitude_fidelity_is_normalised_dot(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=8), rng.normal(size=8)
    f = embed.fidelity(embed.amplitude_encode(x), embed.amplitude_encode(y))
    assert abs(f - (x @ y) ** 2 / ((x @ x) * (y @ y))) < 1e-10


def test_amplitude_zero_vector_rejected():
    with pytest.raises(embed.EmbeddingError):
        embed.amplitude_encode(np.zeros(4))


@settings(max_examples=40, deadline=None)
@given(x=arrays(float, 8, elements=st.floats(-5, 5)), c=st.floats(1e-3, 1e3))
def test_amplitude_scale_invariant(x, c):
    if np.linalg.norm(x) < 1e-3:
        return
    assert embed.fidelity(embed.amplitude_encode(x), embed.amplitude_encode(c * x)) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_amplitude_circuit_matches_analytic(seed):
    rng = np.random.default_rng(seed)
    emb = Embedding("amplitude", 3)
    x = rng.normal(size=(4, 8))
    c = emb.circuit()
    start = np.zeros((4, 8), dtype=complex)
    start[:, 0] = 1
    out = qsim.run_batch(c, emb.angles(x), start)
    assert np.max(np.abs(out - emb.states(x))) < 1e-10


# -- angle ------------------------------------------------------------------

def test_angle_examples():
    assert np.allclose(embed.angle_encode([0, 0, 0]).amplitudes, np.eye(8)[0])
    assert np.allclose(np.abs(embed.angle_encode([np.pi] * 3).amplitudes), np.eye(8)[7])
    uniform = PureState(2, np.full(4, 0.5))
    assert embed.fidelity(embed.angle_encode([np.pi / 2, np.pi / 2]), uniform) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(x=arrays(float, 4, elements=st.floats(-10, 10)))
def test_angle_is_product_state(x):
    psi = embed.angle_encode(x).amplitudes.reshape([2] * 4)
    for q in range(4):
        m = np.moveaxis(psi, q, 0).reshape(2, 8)
        red = m @ m.conj().T
        assert abs(np.trace(red @ red).real - 1) < 1e-10


def test_angle_circuit_matches_analytic():
    rng = np.random.default_rng(0)
    emb = Embedding("angle", 4)
    x = rng.uniform(0, np.pi, (3, 4))
    start = np.zeros((3, 16), dtype=complex)
    start[:, 0] = 1
    assert np.max(np.abs(qsim.run_batch(emb.circuit(), emb.angles(x), start) - emb.states(x))) < 1e-12


# -- ZZ ---------------------------------------------------------------------

def test_zz_zero_input():
    emb = Embedding("zz", 3)
    # first repetition alone leaves every qubit in |+>
    first = qsim.Circuit(3, emb.circuit().n_params, emb.circuit().gates[:len(emb.circuit().gates) // 2])
    start = np.zeros((1, 8), dtype=complex)
    start[0, 0] = 1
    after_one = qsim.run_batch(first, np.zeros(first.n_params), start)[0]
    assert np.allclose(after_one, np.full(8, 8 ** -0.5))
    # the second H layer undoes the first when every phase vanishes
    assert np.allclose(emb.states(np.zeros(6))[0], np.eye(8)[0])


@pytest.mark.parametrize("a,b", [(0.3, -1.1), (1.0, 2.0), (2.5, 0.7)])
def test_zz_matches_hand_composed_oracle(a, b):
    x = np.array([a, b, 0.0, 0.0])
    f = embed.fidelity(embed.zz_encode(x, 2), PureState(2, zz_oracle_2q(x)))
    assert f > 1 - 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_zz_matches_oracle_random(seed):
    x = np.random.default_rng(seed).normal(size=4)
    assert np.allclose(embed.zz_states(x, 2)[0], zz_oracle_2q(x), atol=1e-12)


def test_zz_permutation_asymmetry():
    f = embed.fidelity(embed.zz_encode([1, 2, 0, 0], 2), embed.zz_encode([2, 1, 0, 0], 2))
    assert f < 1 - 1e-6


def test_zz_circuit_matches_analytic():
    rng = np.random.default_rng(1)
    emb = Embedding("zz", 4)
    x = rng.uniform(0, np.pi, (3, 8))
    start = np.zeros((3, 16), dtype=complex)
    start[:, 0] = 1
    assert np.max(np.abs(qsim.run_batch(emb.circuit(), emb.angles(x), start) - emb.states(x))) < 1e-10


def test_arity_mismatch():
    with pytest.raises(embed.EmbeddingError):
        Embedding("zz", 4).states(np.zeros(4))
    with pytest.raises(embed.EmbeddingError):
        embed.angle_encode(np.zeros(3), n_qubits=4)


# -- VJPs -------------------------------------------------------------------

@pytest.mark.parametrize("kind", embed.KINDS)
def test_vjp_matches_finite_differences(kind):
    rng = np.random.default_rng(7)
    emb = Embedding(kind, 3)
    x = rng.uniform(0.2, 2.5, (2, emb.arity))
    cot = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
    loss = lambda z: float(np.sum(np.real(np.conj(cot) * emb.states(z))))
    g = emb.vjp(x, cot)
    h = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        fd[idx] = (loss(x + e) - loss(x - e)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(fd))


@pytest.mark.parametrize("kind", embed.KINDS)
def test_noisy_vjp_matches_finite_differences(kind):
    from hivqcnn.noise import NoiseModel, bind_noise
    rng = np.random.default_rng(8)
    emb = Embedding(kind, 2)
    plan = bind_noise(None, NoiseModel(p1=0.03, p2=0.06))
    x = rng.uniform(0.2, 2.5, (2, emb.arity))
    obs = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
    obs = obs + np.conj(np.swapaxes(obs, 1, 2))
    vals, g = emb.noisy_vjp(x, obs, plan)
    f = lambda z: np.real(np.einsum("bij,bji->b", obs, emb.noisy_states(z, plan)))
    assert np.allclose(vals, f(x), atol=1e-12)
    h = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        fd[idx] = (f(x + e)[idx[0]] - f(x - e)[idx[0]]) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


# -- fidelity and trace distance -------------------------------------------------

def test_fidelity_examples():
    zero, one = PureState.zero(1), PureState(1, np.array([0, 1]))
    plus = PureState(1, np.array([1, 1]) / np.sqrt(2))
    assert embed.fidelity(zero, zero) == pytest.approx(1.0)
    assert embed.fidelity(zero, one) == 0.0
    assert embed.fidelity(zero, plus) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_fidelity_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = qsim.random_state(3, rng), qsim.random_state(3, rng)
    assert embed.fidelity(a, b) == embed.fidelity(b, a)


def test_ensemble_trace_distance_examples():
    zero, one = PureState.zero(1), PureState(1, np.array([0, 1]))
    plus = PureState(1, np.array([1, 1]) / np.sqrt(2))
    assert embed.ensemble_trace_distance([zero, plus], [zero, plus]) == pytest.approx(0.0, abs=1e-12)
    assert embed.ensemble_trace_distance([zero], [one]) == pytest.approx(1.0)
    d = embed.ensemble_trace_distance([zero], [plus])
    assert d == pytest.approx(np.sqrt(0.5), abs=1e-12)
    # independent oracle: singular values of the difference
    diff = zero.density_matrix().matrix - plus.density_matrix().matrix
    assert d == pytest.approx(0.5 * np.linalg.svd(diff, compute_uv=False).sum(), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_trace_distance_properties(seed):
    rng = np.random.default_rng(seed)
    a, b = qsim.random_state(2, rng), qsim.random_state(2, rng)
    d = embed.ensemble_trace_distance([a], [b])
    assert -1e-12 <= d <= 1 + 1e-12
    assert abs(d - np.sqrt(1 - embed.fidelity(a, b))) < 1e-9
    assert embed.ensemble_trace_distance([a], [a]) < 1e-9


def test_mixed_ensemble_inputs():
    rng = np.random.default_rng(9)
    states = [qsim.random_state(2, rng) for _ in range(4)]
    arr = np.stack([s.amplitudes for s in states])
    assert embed.ensemble_trace_distance(states[:2], states[2:]) == pytest.approx(
        embed.ensemble_trace_distance(arr[:2], arr[2:]), abs=1e-12)
    mats = [s.density_matrix() for s in states]
    assert embed.ensemble_trace_distance(mats[:2], states[2:]) == pytest.approx(
        embed.ensemble_trace_distance(arr[:2], arr[2:]), abs=1e-12)

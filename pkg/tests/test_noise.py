from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hivqcnn import embed, noise, qsim
from hivqcnn.noise import (KrausChannel, NoiseModel, apply_readout_error, bind_noise, depolarizing_channel,
                           thermal_relaxation_channel)


def test_depolarizing_zero_is_identity():
    rho = qsim.random_state(1, np.random.default_rng(0)).density_matrix().matrix
    assert np.allclose(depolarizing_channel(0.0)(rho), rho, atol=1e-14)


def test_depolarizing_one_gives_maximally_mixed():
    rho = qsim.random_state(1, np.random.default_rng(1)).density_matrix().matrix
    assert np.allclose(depolarizing_channel(1.0)(rho), np.eye(2) / 2, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(0, 1), n=st.sampled_from([1, 2]))
def test_depolarizing_completeness(p, n):
    ch = depolarizing_channel(p, n)
    total = sum(k.conj().T @ k for k in ch.ops)
    assert np.max(np.abs(total - np.eye(2 ** n))) < 1e-12


def test_thermal_zero_duration_identity():
    rho = qsim.random_state(1, np.random.default_rng(2)).density_matrix().matrix
    assert np.allclose(thermal_relaxation_channel(100.0, 80.0, 0.0)(rho), rho, atol=1e-14)


def test_thermal_long_time_decays_to_ground():
    out = thermal_relaxation_channel(1.0, 1.5, 1e4)(np.diag([0.0, 1.0]).astype(complex))
    assert np.allclose(out, np.diag([1.0, 0.0]), atol=1e-12)


@pytest.mark.parametrize("t1,t2,dur", [(100.0, 80.0, 13.0), (50.0, 100.0, 7.0), (220e3, 140e3, 660.0)])
def test_thermal_coherence_decay_matches_analytic(t1, t2, dur):
    psi = np.array([0.6, 0.8j])
    rho = np.outer(psi, psi.conj())
    out = thermal_relaxation_channel(t1, t2, dur)(rho)
    assert abs(out[0, 1]) == pytest.approx(abs(rho[0, 1]) * np.exp(-dur / t2), rel=1e-12)
    # population relaxes with exp(-t/t1)
    assert out[1, 1].real == pytest.approx(rho[1, 1].real * np.exp(-dur / t1), rel=1e-12)


def test_thermal_rejects_unphysical():
    with pytest.raises(noise.NoiseError):
        thermal_relaxation_channel(10.0, 25.0, 1.0)


def test_readout_examples():
    assert apply_readout_error(0.3, np.eye(2)) == pytest.approx(0.3)
    assert apply_readout_error(0.3, [[0, 1], [1, 0]]) == pytest.approx(-0.3)
    assert apply_readout_error(1.0, [[0.98, 0.02], [0.02, 0.98]]) == pytest.approx(0.96)


@settings(max_examples=50, deadline=None)
@given(z=st.floats(-1, 1), e01=st.floats(0, 0.5), e10=st.floats(0, 0.5))
def test_readout_affine_agrees_with_confusion(z, e01, e10):
    m = np.array([[1 - e01, e01], [e10, 1 - e10]])
    slope, off = qsim.NoisePlan({}, m).readout_affine()
    assert apply_readout_error(z, m) == pytest.approx(slope * z + off, abs=1e-12)


def test_zero_noise_model_matches_pure_path():
    rng = np.random.default_rng(3)
    c = qsim.random_rotation_circuit(3, 4, 20, rng)
    p = rng.normal(size=4)
    psi = qsim.random_state(3, rng)
    plan = bind_noise(c, NoiseModel.ideal())
    rho = qsim.run_circuit_dm(c, p, psi.density_matrix(), plan).matrix
    out = qsim.run_circuit(c, p, psi).amplitudes
    assert np.max(np.abs(rho - np.outer(out, out.conj()))) < 1e-9


def _ry_z(theta, plan):
    c = qsim.Circuit(1, 1).ry(0, slot=0)
    rho = qsim.run_dm_batch(c, [theta], np.diag([1, 0]).astype(complex), plan)
    return qsim.dm_expectation_z_batch(rho, 1, 0)[0]


def test_noise_shrinks_measured_z_for_ry_family():
    plan = bind_noise(None, noise.load_noise_config())
    slope, off = plan.readout_affine()
    for theta in np.linspace(0, np.pi, 17):
        if abs(np.cos(theta)) < 1e-9:
            continue
        assert abs(slope * _ry_z(theta, plan) + off) < abs(np.cos(theta))


def test_depolarizing_shrinks_z_for_ry_family():
    plan = bind_noise(None, NoiseModel(p1=0.01, dur1=0.0, dur2=0.0))
    for theta in np.linspace(0, np.pi, 17):
        if abs(np.cos(theta)) < 1e-9:
            continue
        assert abs(_ry_z(theta, plan)) < abs(np.cos(theta))


def test_amplitude_damping_alone_can_raise_z():
    # relaxation pulls toward |0>, so pre-readout <Z> may grow for tilted states
    plan = bind_noise(None, NoiseModel(p1=0.0, t1=1e3, t2=1e3, dur1=100.0))
    theta = 3 * np.pi / 8
    assert _ry_z(theta, plan) > np.cos(theta)


def test_trace_preserved_over_long_random_circuit():
    rng = np.random.default_rng(4)
    c = qsim.random_rotation_circuit(3, 5, 500, rng)
    plan = bind_noise(c, noise.load_noise_config())
    rho = qsim.run_dm_batch(c, rng.normal(size=5), qsim.random_state(3, rng).density_matrix().matrix, plan)[0]
    assert abs(np.trace(rho).real - 1) < 1e-9


def test_default_model_channels_complete():
    m = noise.load_noise_config()
    assert m.channel_1q().completeness_error() < 1e-10
    assert m.channel_2q().completeness_error() < 1e-10


def test_kraus_rejects_non_trace_preserving():
    with pytest.raises(noise.NoiseError):
        KrausChannel([np.eye(2) * 0.9])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_contractivity_of_embedded_ensembles(seed):
    rng = np.random.default_rng(seed)
    emb = embed.Embedding("angle", 3)
    pos = emb.states(rng.uniform(0, np.pi, (5, 3)))
    neg = emb.states(rng.uniform(0, np.pi, (5, 3)))
    rho, sigma = embed.mean_density(pos), embed.mean_density(neg)
    ch = NoiseModel(p1=rng.uniform(0, 0.5)).idle_layer()
    before = embed.trace_distance(rho, sigma)
    after = embed.trace_distance(noise.apply_channel_each_qubit(rho, ch, 3),
                                 noise.apply_channel_each_qubit(sigma, ch, 3))
    assert after <= before + 1e-9


def test_apply_channel_each_qubit_matches_kron_oracle():
    rng = np.random.default_rng(5)
    ch = NoiseModel(p1=0.1).idle_layer()
    rho = qsim.random_state(2, rng).density_matrix().matrix
    ops2 = [np.kron(a, b) for a in ch.ops for b in ch.ops]
    want = sum(k @ rho @ k.conj().T for k in ops2)
    assert np.allclose(noise.apply_channel_each_qubit(rho, ch, 2), want, atol=1e-12)


def test_config_round_trip_and_rejection():
    m = noise.load_noise_config()
    again = noise.parse_noise_config(noise.format_noise_config(m))
    assert again == m and np.allclose(again.readout_flip, m.readout_flip)
    with pytest.raises(noise.NoiseError):
        noise.parse_noise_config(noise.format_noise_config(m) + "bogus=1\n")
    with pytest.raises(noise.NoiseError):
        noise.parse_noise_config("p1=0.1\n")


def test_model_validation():
    with pytest.raises(noise.NoiseError):
        NoiseModel(p1=1.5)
    with pytest.raises(noise.NoiseError):
        NoiseModel(t1=10.0, t2=30.0)
    with pytest.raises(noise.NoiseError):
        NoiseModel(readout_flip=np.array([[0.9, 0.2], [0.1, 0.9]]))

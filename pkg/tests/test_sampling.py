import numpy as np
import pytest

from ccsb.coherent import ProductTarget, label, overlap_matrix
from ccsb.errors import ConfigurationError
from ccsb.hamiltonians import TrappedBosonsModel, TunnellingBathModel
from ccsb.observables import norm_and_particle_number
from ccsb.sampling import (SamplingSpec, initial_state, mode_generators,
                           project_initial_amplitudes, sample_gamma_mode,
                           sample_gaussian_mode)


def test_streams_are_per_mode_and_reproducible():
    a = mode_generators(7, 3)
    b = mode_generators(7, 5)
    for ga, gb in zip(a, b):
        assert np.array_equal(ga.random(4), gb.random(4))
    c = mode_generators(8, 3)
    assert not np.array_equal(mode_generators(7, 3)[0].random(4), c[0].random(4))


def test_gaussian_mode_moments():
    rng = np.random.default_rng(0)
    z = sample_gaussian_mode(label(-2.5), 4.0, 200_000, rng)
    assert z.mean() == pytest.approx(label(-2.5), abs=5e-3)
    # density exp(-sigma |z - z0|^2) gives <|z - z0|^2> = 1/sigma
    assert np.mean(np.abs(z - label(-2.5)) ** 2) == pytest.approx(0.25, rel=1e-2)


def test_gamma_scale_direction():
    rng = np.random.default_rng(1)
    occupied = sample_gamma_mode(4, 2.0, 200_000, rng)
    empty = sample_gamma_mode(0, 50.0, 200_000, rng)
    assert np.mean(np.abs(occupied) ** 2) == pytest.approx(5 * 2.0, rel=1e-2)
    assert np.mean(np.abs(empty) ** 2) == pytest.approx(1 / 50.0, rel=1e-2)
    phases = np.angle(occupied)
    assert abs(np.mean(np.exp(1j * phases))) < 1e-2


def test_sampling_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        sample_gamma_mode(-1, 1.0, 3, rng)
    with pytest.raises(ConfigurationError):
        sample_gaussian_mode(0, 0.0, 3, rng)
    with pytest.raises(ConfigurationError):
        SamplingSpec(0, (1,))
    with pytest.raises(ConfigurationError):
        SamplingSpec(5, (1,), sigma_empty=-1.0)


def test_sample_basis_layout_and_determinism():
    spec = SamplingSpec(6, (3, 0, 0), initial_tunnelling=(-2.5, 0.0), seed=4)
    z = spec.sample_basis()
    assert z.shape == (6, 4)
    assert np.array_equal(z, spec.sample_basis())
    other = SamplingSpec(6, (3, 0, 0), initial_tunnelling=(-2.5, 0.0), seed=5).sample_basis()
    assert not np.array_equal(z, other)


def test_single_configuration_projection_of_coherent_target():
    z0 = np.array([[0.3 + 0.2j, -0.5j]])
    target = ProductTarget(tuple(z0[0]), ())
    proj = project_initial_amplitudes(z0, target)
    assert proj.D[0] == pytest.approx(1.0)
    assert proj.norm == pytest.approx(1.0)
    assert proj.fidelity == pytest.approx(1.0)


def test_projection_reproduces_fock_target_with_dense_basis():
    spec = SamplingSpec(120, (2, 0), sigma_occupied=1.0, sigma_empty=1.0, seed=3)
    basis = spec.sample_basis()
    proj = project_initial_amplitudes(basis, spec.target)
    assert proj.norm == pytest.approx(1.0, abs=1e-4)
    assert proj.fidelity == pytest.approx(1.0, abs=1e-4)
    O = overlap_matrix(basis)
    assert np.allclose(O @ proj.D, proj.target_overlaps, atol=1e-6)


def test_renormalize_option():
    spec = SamplingSpec(5, (1, 0), seed=1)
    proj = project_initial_amplitudes(spec.sample_basis(), spec.target, renormalize=True)
    assert proj.norm == 1.0
    D = proj.D
    basis = spec.sample_basis()
    assert np.vdot(D, overlap_matrix(basis) @ D).real == pytest.approx(1.0)


def test_initial_state_app2_particle_number():
    model = TrappedBosonsModel(xi=2.1, lambda0=0.0, Omega=6, N=20)
    spec = SamplingSpec(60, (20,) + (0,) * 6, sigma_occupied=1.0, sigma_empty=1e4, seed=0)
    state, proj = initial_state(model, spec)
    nrm, num = norm_and_particle_number(state)
    assert nrm == pytest.approx(1.0, abs=1e-3)
    assert num / nrm == pytest.approx(20.0, rel=1e-3)
    assert np.all(state.S == 0)


def test_initial_state_mode_mismatch():
    model = TunnellingBathModel(Omega=2, M=3)
    spec = SamplingSpec(4, (2, 0, 0), seed=0)
    with pytest.raises(ConfigurationError):
        initial_state(model, spec)

import math

import numpy as np
import pytest

from ccsb.coherent import ProductTarget, label, overlap
from ccsb.errors import ConfigurationError
from ccsb.hamiltonians import QuadraticModel, TrappedBosonsModel
from ccsb.observables import (DensityRecord, chi_error, check_grid, cross_correlation,
                              default_grid, density_matrix, density_moments, energy,
                              ft_spectrum, norm_and_particle_number, one_body_density)
from ccsb.propagator import WavefunctionState
from ccsb.sampling import SamplingSpec, initial_state


def coherent_state(model, z):
    return WavefunctionState(model, np.atleast_2d(z), np.array([1.0 + 0j]))


def test_single_coherent_state_norm_and_number():
    model = QuadraticModel(np.diag([1.0, 2.0]))
    z = np.array([1.0 + 0.5j, -0.3j])
    nrm, num = norm_and_particle_number(coherent_state(model, z))
    assert nrm == pytest.approx(1.0)
    assert num == pytest.approx(np.sum(np.abs(z) ** 2))
    assert energy(coherent_state(model, z)) == pytest.approx(1.25 + 2 * 0.09)


def test_superposition_norm():
    model = QuadraticModel(np.eye(1))
    z = np.array([[0.5 + 0j], [-0.5 + 0j]])
    state = WavefunctionState(model, z, np.array([1.0, 1.0]) + 0j)
    nrm, _ = norm_and_particle_number(state)
    assert nrm == pytest.approx(2 + 2 * math.exp(-0.5))


def test_cross_correlation_of_coherent_state():
    model = QuadraticModel(np.eye(2))
    z = np.array([label(-2.5), 0.3j])
    mirror = ProductTarget((label(2.5), 0.3j), ())
    got = cross_correlation(coherent_state(model, z), mirror)
    assert got == pytest.approx(overlap(np.array([label(2.5), 0.3j]), z))
    with pytest.raises(ConfigurationError):
        cross_correlation(coherent_state(model, z), ProductTarget((0j,), ()))


def test_ft_spectrum_locates_frequency():
    t = np.arange(0, 200, 0.05)
    spec = ft_spectrum(t, np.cos(1.7 * t), window="hann")
    assert spec.peaks(1)[0] == pytest.approx(1.7, abs=0.01)
    two = ft_spectrum(t, np.cos(1.2 * t) + 0.5 * np.cos(1.5 * t))
    assert sorted(two.peaks(2)) == pytest.approx([1.2, 1.5], abs=0.01)
    with pytest.raises(ConfigurationError):
        ft_spectrum(np.array([0.0, 0.1, 0.3]), np.ones(3))


def test_chi_error_basic():
    t = np.linspace(0, 10, 101)
    assert chi_error(t, np.sin(t), t, np.sin(t)) == 0.0
    assert chi_error(t, np.ones(101), t, np.zeros(101)) == pytest.approx(10.0)
    coarse = np.linspace(0, 10, 11)
    assert chi_error(t, t, coarse, coarse) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigurationError):
        chi_error(t, t, t + 20, t)


def test_density_of_ground_state_coherent():
    # a coherent state of level 0 only is N bosons in the trap ground state
    model = TrappedBosonsModel(xi=0.0, lambda0=0.0, Omega=6, N=4)
    z = np.zeros(7, complex)
    z[0] = 2.0
    state = coherent_state(model, z)
    grid = default_grid()
    record = DensityRecord.from_state(state, grid)
    assert np.trace(record.rho).real == pytest.approx(4.0)
    assert record.mean == pytest.approx(0.0, abs=1e-10)
    assert record.variance == pytest.approx(0.5, abs=1e-6)
    assert np.min(record.rho_Q) >= -1e-10


def test_density_matrix_trace_is_particle_number():
    model = TrappedBosonsModel(xi=2.1, lambda0=0.0, Omega=5, N=6)
    spec = SamplingSpec(30, (6, 0, 0, 0, 0, 0), sigma_empty=100.0, seed=1)
    state, _ = initial_state(model, spec)
    rho = density_matrix(state)
    assert np.allclose(rho, rho.conj().T)
    assert np.trace(rho).real == pytest.approx(norm_and_particle_number(state)[1], rel=1e-10)


def test_density_moments_of_shifted_gaussian():
    grid = default_grid()
    p = np.exp(-((grid - 1.3) ** 2)) * 7.0
    mean, var = density_moments(p, grid)
    assert mean == pytest.approx(1.3, abs=1e-8)
    assert var == pytest.approx(0.5, abs=1e-8)


def test_grid_checks():
    check_grid(default_grid(), 27)
    with pytest.raises(ConfigurationError):
        check_grid(np.linspace(-8, 10, 100), 5)
    with pytest.raises(ConfigurationError):
        check_grid(default_grid(-2.0, 2.0), 27)
    with pytest.raises(ConfigurationError):
        one_body_density(np.eye(27), default_grid(-2.0, 2.0))


def test_ft_spectrum_parseval_and_symmetry():
    rng = np.random.default_rng(4)
    dt = 0.05
    x = rng.standard_normal(200)
    t = np.arange(200) * dt
    spec = ft_spectrum(t, x + 1j * rng.standard_normal(200), zero_pad_factor=1)
    # real input gives an even magnitude spectrum
    order = np.argsort(-spec.omega[1:])
    assert np.allclose(spec.magnitude[1:], spec.magnitude[1:][order])
    dw = spec.omega[1] - spec.omega[0]
    assert np.sum(spec.magnitude**2) * dw / (2 * np.pi) == pytest.approx(np.sum(x**2) * dt,
                                                                         rel=1e-12)

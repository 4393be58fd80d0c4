"""Quantities measured on a coherent-state wavefunction.

All K x K sums run over the weighted amplitudes c_k = D_k exp(i S_k), so
that <Psi|A|Psi> = c^H (O * A_kl) c with O the overlap matrix.
"""

from dataclasses import dataclass

import numpy as np

from .coherent import overlap_matrix
from .errors import ConfigurationError
from .tables import oscillator_functions

IMAG_TOL = 1e-10


def weighted_amplitudes(state):
    return state.D * np.exp(1j * state.S)


def _drop_imag(value, scale, what):
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(scale)):
        raise ConfigurationError(
            f"{what} has imaginary residue {value.imag:.3e}; state is inconsistent")
    return float(value.real)


def norm_and_particle_number(state, overlaps=None):
    """<Psi|Psi> and the total occupation of the bosonic modes, in one pass."""
    O = overlap_matrix(state.z) if overlaps is None else overlaps
    c = weighted_amplitudes(state)
    zb = state.z[:, state.model.boson_modes]
    norm = np.vdot(c, O @ c)
    number = np.vdot(c, (O * (zb.conj() @ zb.T)) @ c)
    return _drop_imag(norm, norm.real, "norm"), _drop_imag(number, number.real, "particle number")


def norm(state):
    return norm_and_particle_number(state)[0]


def energy(state):
    """<Psi|H|Psi> (not divided by the norm)."""
    O = overlap_matrix(state.z)
    c = weighted_amplitudes(state)
    H = state.model.pair_matrix(state.z, state.z)
    return np.vdot(c, (O * H) @ c).real


def cross_correlation(state, mirror):
    """<mirror|Psi> for a :class:`~ccsb.coherent.ProductTarget` reference state."""
    if mirror.n_modes != state.z.shape[1]:
        raise ConfigurationError(
            f"reference has {mirror.n_modes} modes, state has {state.z.shape[1]}")
    c = weighted_amplitudes(state)
    return complex(np.sum(c * mirror.overlaps(state.z).conj()))


@dataclass
class Spectrum:
    omega: np.ndarray
    magnitude: np.ndarray

    def peaks(self, count=1, positive=True):
        """Frequencies of the ``count`` largest local maxima."""
        mag = self.magnitude
        interior = np.flatnonzero((mag[1:-1] >= mag[:-2]) & (mag[1:-1] >= mag[2:])) + 1
        if positive:
            interior = interior[self.omega[interior] > 0]
        order = interior[np.argsort(mag[interior])[::-1]]
        return self.omega[order[:count]]


def ft_spectrum(t, values, window="none", zero_pad_factor=4):
    """Magnitude spectrum of Re(values) against angular frequency.

    Returns a :class:`Spectrum` over ascending angular frequencies
    2 pi k / (n dt pad), including negative ones.  The transform is scaled by
    dt so peak heights do not depend on the sampling rate.
    """
    t = np.asarray(t, dtype=float)
    x = np.real(np.asarray(values))
    if t.size < 2:
        raise ConfigurationError("need at least two samples")
    d = np.diff(t)
    dt = d.mean()
    if np.any(np.abs(d - dt) > 1e-9 * abs(dt)):
        raise ConfigurationError("Fourier transform needs uniformly spaced samples")
    if window == "hann":
        x = x * np.hanning(x.size)
    elif window not in ("none", None):
        raise ConfigurationError(f"unknown window {window!r}")
    if zero_pad_factor < 1:
        raise ConfigurationError("zero_pad_factor must be >= 1")
    n = int(round(x.size * zero_pad_factor))
    spec = np.fft.fftshift(np.fft.fft(x, n=n)) * dt
    omega = np.fft.fftshift(np.fft.fftfreq(n, d=dt)) * 2.0 * np.pi
    return Spectrum(omega, np.abs(spec))


def _aligned(ta, a, tb, b):
    """Both series on the finer grid over their common time range.

    The coarser one is linearly interpolated (real and imaginary parts
    separately).  Returns ``(grid, a_on_grid, b_on_grid)``.
    """
    ta, tb = np.asarray(ta, dtype=float), np.asarray(tb, dtype=float)
    a, b = np.asarray(a), np.asarray(b)
    lo, hi = max(ta[0], tb[0]), min(ta[-1], tb[-1])
    if hi <= lo:
        raise ConfigurationError("time ranges do not overlap")

    def spacing(t):
        return (t[-1] - t[0]) / max(t.size - 1, 1)

    def interp(grid, t, v):
        if np.iscomplexobj(v):
            return np.interp(grid, t, v.real) + 1j * np.interp(grid, t, v.imag)
        return np.interp(grid, t, v)

    swap = spacing(ta) > spacing(tb)
    fine, vf, coarse, vc = (tb, b, ta, a) if swap else (ta, a, tb, b)
    keep = (fine >= lo - 1e-12) & (fine <= hi + 1e-12)
    grid = fine[keep]
    on_fine, on_coarse = vf[keep], interp(grid, coarse, vc)
    return (grid, on_coarse, on_fine) if swap else (grid, on_fine, on_coarse)


def chi_error(ta, a, tb, b):
    """Integrated absolute difference of |a| and |b| over their common time range.

    The coarser series is linearly interpolated onto the finer grid and the
    integral taken with the trapezoidal rule.
    """
    grid, a, b = _aligned(ta, np.abs(np.asarray(a)), tb, np.abs(np.asarray(b)))
    return float(np.trapezoid(np.abs(a - b), grid))


def max_abs_difference(ta, a, tb, b):
    """Largest |a - b| over the common time range, aligned as in :func:`chi_error`."""
    _, a, b = _aligned(ta, a, tb, b)
    return float(np.max(np.abs(a - b)))


# derived column: (raw column, power of the norm it is divided by)
NORM_DIVIDED = {
    "ccf_normalized": ("ccf", 0.5),
    "energy_normalized": ("energy", 1.0),
    "particle_number_normalized": ("particle_number", 1.0),
}


def add_norm_divided(series, names):
    """Add the requested ``*_normalized`` columns, computed from raw ones and ``norm``.

    The CCF is divided by sqrt(norm), since the reference state has unit norm;
    expectation values are divided by the norm.
    """
    for name in names:
        raw, power = NORM_DIVIDED[name]
        if raw not in series.columns or "norm" not in series.columns:
            raise ConfigurationError(f"{name} needs the {raw} and norm columns")
        series.columns[name] = series.columns[raw] / np.real(series.columns["norm"]) ** power
    return series


def chi_error_series(sa, sb, column="ccf"):
    return chi_error(sa.t, sa[column], sb.t, sb[column])


def density_matrix(state, overlaps=None):
    """rho[a, b] = <Psi| a_a^dagger a_b |Psi> over the bosonic modes, made exactly Hermitian."""
    O = overlap_matrix(state.z) if overlaps is None else overlaps
    c = weighted_amplitudes(state)
    y = c[:, None] * state.z[:, state.model.boson_modes]
    rho = y.conj().T @ O @ y
    skew = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if skew > 1e-8 * max(1.0, np.max(np.abs(rho))):
        raise ConfigurationError(f"density matrix is not Hermitian (deviation {skew:.3e})")
    return 0.5 * (rho + rho.conj().T)


def default_grid(lo=-8.0, hi=10.0, step=0.02):
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def check_grid(grid, n_levels):
    """Raise if the grid cannot hold the highest oscillator level."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3 or np.max(np.diff(grid)) > 0.05 + 1e-12:
        raise ConfigurationError("position grid spacing must be at most 0.05")
    top = oscillator_functions(n_levels, grid)[-1]
    captured = np.trapezoid(top**2, grid)
    if captured < 0.999:
        raise ConfigurationError(
            f"grid [{grid[0]}, {grid[-1]}] holds only {captured:.5f} of level {n_levels - 1}")


def one_body_density(rho, grid, check=True):
    """rho(Q) = sum_ab phi_a(Q) rho[a, b] phi_b(Q) with real oscillator eigenfunctions."""
    rho = np.asarray(rho)
    if check:
        check_grid(grid, rho.shape[0])
    phi = oscillator_functions(rho.shape[0], grid)
    return np.einsum("ag,ab,bg->g", phi, rho.real, phi)


def density_moments(rho_q, grid):
    """Mean and variance of the unit-normalised density."""
    grid = np.asarray(grid, dtype=float)
    total = np.trapezoid(rho_q, grid)
    if total <= 0:
        raise ConfigurationError("density integrates to a non-positive value")
    p = rho_q / total
    mean = np.trapezoid(grid * p, grid)
    second = np.trapezoid(grid**2 * p, grid)
    return float(mean), float(second - mean**2)


def density_variance(rho_q, grid):
    return density_moments(rho_q, grid)[1]


@dataclass
class DensityRecord:
    rho: np.ndarray
    grid: np.ndarray
    rho_Q: np.ndarray
    mean: float
    variance: float

    @classmethod
    def from_state(cls, state, grid, overlaps=None):
        rho = density_matrix(state, overlaps)
        rho_q = one_body_density(rho, grid)
        mean, var = density_moments(rho_q, grid)
        return cls(rho, np.asarray(grid), rho_q, mean, var)

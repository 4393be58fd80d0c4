"""Monte-Carlo initial basis and projected initial amplitudes.

Every mode draws from its own PCG64 stream, spawned from one SeedSequence
in mode order, so a (seed, mode index) pair always yields the same numbers
regardless of how many other modes are sampled.

Distinguishable coherent modes are sampled from a Gaussian
exp(-sigma |z - z0|^2).  Second-quantised modes draw |z|^2 from a gamma
distribution of shape n + 1 and a uniform phase.  For occupied modes the
gamma scale is sigma, which puts the mode of the distribution at sigma * n.
For empty modes the scale is 1/sigma, so larger sigma packs the labels
more tightly around the vacuum.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .coherent import ProductTarget, label, overlap_matrix
from .errors import ConfigurationError, DegenerateBasisError
from .propagator import WavefunctionState, solve_amplitude_system

logger = logging.getLogger(__name__)


def mode_generators(seed, n_modes):
    """One independent generator per mode, derived deterministically from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(n_modes)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def sample_gaussian_mode(z0, sigma, K, rng):
    """K labels with density proportional to exp(-sigma |z - z0|^2)."""
    if not sigma > 0:
        raise ConfigurationError("sigma must be positive")
    width = np.sqrt(0.5 / sigma)
    draws = rng.normal(0.0, width, size=(K, 2))
    return complex(z0) + draws[:, 0] + 1j * draws[:, 1]


def sample_gamma_mode(n, sigma, K, rng):
    """K labels for a mode holding ``n`` bosons; see the module docstring for the scale rule."""
    if n < 0:
        raise ConfigurationError("occupation must be non-negative")
    if not sigma > 0:
        raise ConfigurationError("sigma must be positive")
    scale = sigma if n > 0 else 1.0 / sigma
    r2 = rng.gamma(n + 1.0, scale, size=K)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=K)
    return np.sqrt(r2) * np.exp(1j * phi)


@dataclass
class SamplingSpec:
    K: int
    initial_occupation: tuple
    sigma_occupied: float = 1.0
    sigma_empty: float = 1.0
    sigma_tunnelling: float = 1.0
    initial_tunnelling: tuple = None
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError("K must be at least 1")
        for name in ("sigma_occupied", "sigma_empty", "sigma_tunnelling"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        self.initial_occupation = tuple(int(n) for n in self.initial_occupation)
        if any(n < 0 for n in self.initial_occupation):
            raise ConfigurationError("occupations must be non-negative")
        if self.initial_tunnelling is not None:
            self.initial_tunnelling = tuple(float(v) for v in self.initial_tunnelling)
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must fit in 64 bits")

    @property
    def target(self):
        coherent = () if self.initial_tunnelling is None else (label(*self.initial_tunnelling),)
        return ProductTarget(coherent, self.initial_occupation)

    def sample_basis(self):
        """(K, M) labels: tunnelling mode first when present, then the Fock modes."""
        target = self.target
        gens = mode_generators(self.seed, target.n_modes)
        cols = []
        for i, z0 in enumerate(target.coherent):
            cols.append(sample_gaussian_mode(z0, self.sigma_tunnelling, self.K, gens[i]))
        for j, n in enumerate(self.initial_occupation):
            sigma = self.sigma_occupied if n > 0 else self.sigma_empty
            cols.append(sample_gamma_mode(n, sigma, self.K, gens[target.n_coherent + j]))
        return np.column_stack(cols)


@dataclass
class Projection:
    D: np.ndarray
    norm: float
    rank: int
    condition: float
    fidelity: float
    target_overlaps: np.ndarray = field(repr=False, default=None)

    @property
    def rank_deficient(self):
        return self.rank < self.D.size


def project_initial_amplitudes(basis, target, svd_cutoff=1e-10, renormalize=False):
    """Least-squares amplitudes with sum_l <z_k|z_l> D_l = <z_k|target>, actions zero.

    Returns a :class:`Projection` with the achieved norm <Psi(0)|Psi(0)>, the
    fidelity against the target and the conditioning of the overlap solve.
    A basis whose overlap matrix has no singular value above the cutoff
    raises :class:`DegenerateBasisError`.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=complex))
    if basis.shape[0] == 0:
        raise ConfigurationError("empty basis")
    O = overlap_matrix(basis)
    b = target.overlaps(basis)
    try:
        D, info = solve_amplitude_system(O, b, svd_cutoff)
    except DegenerateBasisError as exc:
        logger.error("initial projection failed: %s", exc)
        raise
    norm = float(np.vdot(D, O @ D).real)
    # <target|Psi(0)> = sum_l D_l <target|z_l>
    proj = np.vdot(b, D)
    fidelity = float(abs(proj) ** 2 / norm) if norm > 0 else 0.0
    if info.rank < D.size:
        logger.info("projection: overlap matrix rank %d of %d (condition %.3e)",
                    info.rank, D.size, info.condition)
    if renormalize and norm > 0:
        D = D / np.sqrt(norm)
        norm = 1.0
    return Projection(D, norm, info.rank, info.condition, fidelity, b)


def initial_state(model, spec, svd_cutoff=1e-10, renormalize=False):
    """Sample a basis for ``spec``, project the target onto it, return (state, projection)."""
    basis = spec.sample_basis()
    if basis.shape[1] != model.n_modes:
        raise ConfigurationError(
            f"sampling spec gives {basis.shape[1]} modes, model has {model.n_modes}")
    proj = project_initial_amplitudes(basis, spec.target, svd_cutoff, renormalize)
    return WavefunctionState(model, basis, proj.D, np.zeros(spec.K), 0.0), proj

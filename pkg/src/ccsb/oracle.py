"""Brute-force references for validating the coherent-state engine.

Nothing here uses coherent states for dynamics: Hamiltonians are built as
sparse matrices on enumerated Fock bases and propagated exactly.
"""

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from .coherent import label
from .errors import ConfigurationError
from .observables import density_moments, one_body_density, default_grid
from .series import TimeSeries
from .tables import build_tables

logger = logging.getLogger(__name__)

MAX_BASIS = 200_000
DENSE_LIMIT = 6000


def quadrature_delta(a, b, c, d, points=None):
    """Contact matrix element by Gauss-Hermite quadrature.

    The integrand exp(-2x^2) times a polynomial of degree a+b+c+d is mapped
    onto the weight exp(-u^2); ``points`` must be at least 2 + (a+b+c+d)/2
    for the rule to be exact.
    """
    s = a + b + c + d
    need = 2 + s // 2
    if points is None:
        points = need
    if points < need:
        raise ConfigurationError(f"{points} quadrature points cannot integrate degree {s} exactly")
    u, w = np.polynomial.hermite.hermgauss(points)
    x = u / np.sqrt(2.0)
    top = max(a, b, c, d)
    # normalised Hermite polynomials without the Gaussian factor
    h = np.zeros((top + 1, x.size))
    h[0] = np.pi ** -0.25
    if top >= 1:
        h[1] = np.sqrt(2.0) * x * h[0]
    for n in range(1, top):
        h[n + 1] = np.sqrt(2.0 / (n + 1)) * x * h[n] - np.sqrt(n / (n + 1)) * h[n - 1]
    return float(np.sum(w * h[a] * h[b] * h[c] * h[d]) / np.sqrt(2.0))


def analytic_noninteracting(xi, t):
    """Mean and variance of the density for the undisplaced ground state in the displaced trap."""
    t = np.asarray(t, dtype=float)
    return xi * (1.0 - np.cos(t)), np.full_like(t, 0.5)


class FockBasis:
    """All occupation vectors with ``n_particles`` bosons in ``n_modes`` modes."""

    def __init__(self, n_particles, n_modes):
        if n_particles < 0 or n_modes < 1:
            raise ConfigurationError("need n_particles >= 0 and n_modes >= 1")
        self.n_particles = n_particles
        self.n_modes = n_modes
        size = comb(n_particles + n_modes - 1, n_modes - 1)
        if size > MAX_BASIS:
            raise ConfigurationError(f"Fock basis of size {size} exceeds guard {MAX_BASIS}")
        self.states = np.array(list(self._enumerate(n_particles, n_modes)), dtype=np.int64)
        self.states = self.states.reshape(-1, n_modes)
        self.index = {tuple(s): i for i, s in enumerate(self.states)}

    @staticmethod
    def _enumerate(n, m):
        if m == 1:
            yield (n,)
            return
        for first in range(n, -1, -1):
            for rest in FockBasis._enumerate(n - first, m - 1):
                yield (first,) + rest

    def __len__(self):
        return len(self.states)

    def find(self, occupation):
        return self.index[tuple(int(v) for v in occupation)]

    def annihilator(self, mode, lower):
        """Sparse a_mode mapping this basis into ``lower`` (one particle fewer)."""
        rows, cols, vals = [], [], []
        for j, s in enumerate(self.states):
            n = s[mode]
            if n == 0:
                continue
            t = s.copy()
            t[mode] -= 1
            rows.append(lower.find(t))
            cols.append(j)
            vals.append(np.sqrt(n))
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(lower), len(self)))


def _stack(ops):
    return sp.vstack(ops, format="csr")


def one_body_operator(basis, h):
    """sum_ab h[a, b] a_a^dagger a_b on ``basis``."""
    h = np.asarray(h)
    m = basis.n_modes
    if basis.n_particles == 0:
        return sp.csr_matrix((len(basis), len(basis)))
    lower = FockBasis(basis.n_particles - 1, m)
    E = _stack([basis.annihilator(a, lower) for a in range(m)])
    return (E.conj().T @ sp.kron(sp.csr_matrix(h), sp.identity(len(lower)), format="csr") @ E).tocsr()


def two_body_operator(basis, delta_dense, coupling):
    """coupling/2 sum_abcd delta[a,b,c,d] a_a^dagger a_b^dagger a_d a_c on ``basis``."""
    m = basis.n_modes
    if basis.n_particles < 2:
        return sp.csr_matrix((len(basis), len(basis)))
    lower1 = FockBasis(basis.n_particles - 1, m)
    lower2 = FockBasis(basis.n_particles - 2, m)
    a1 = [basis.annihilator(a, lower1) for a in range(m)]
    a2 = [lower1.annihilator(a, lower2) for a in range(m)]
    pairs = _stack([a2[c] @ a1[d] for c in range(m) for d in range(m)])
    kernel = sp.kron(sp.csr_matrix(delta_dense.reshape(m * m, m * m)), sp.identity(len(lower2)),
                     format="csr")
    return (0.5 * coupling * (pairs.conj().T @ kernel @ pairs)).tocsr()


def density_matrix_fock(basis, psi, annihilators=None):
    """rho[a, b] = <psi| a_a^dagger a_b |psi>."""
    if annihilators is None:
        lower = FockBasis(basis.n_particles - 1, basis.n_modes)
        annihilators = [basis.annihilator(a, lower) for a in range(basis.n_modes)]
    v = np.array([A @ psi for A in annihilators])
    return v.conj() @ v.T


class _Evolver:
    """exp(-iHt) psi0 on a time grid, by eigendecomposition when affordable."""

    def __init__(self, H, psi0):
        self.H = H
        self.psi0 = psi0
        if H.shape[0] <= DENSE_LIMIT:
            w, V = np.linalg.eigh(H.toarray())
            self.w, self.V = w, V
            self.c0 = V.conj().T @ psi0
        else:
            self.w = None

    def states(self, t_grid):
        t_grid = np.asarray(t_grid, dtype=float)
        if self.w is not None:
            for t in t_grid:
                yield self.V @ (np.exp(-1j * self.w * t) * self.c0)
            return
        psi = self.psi0.astype(complex)
        prev = 0.0
        for t in t_grid:
            if t != prev:
                psi = expm_multiply(-1j * (t - prev) * self.H, psi)
                prev = t
            yield psi


@dataclass
class OracleResult:
    series: TimeSeries
    rho: np.ndarray = field(default=None, repr=False)


def trapped_bosons_hamiltonian(N, Omega, xi, lambda0, tables=None):
    """Sparse Fock-space Hamiltonian of the displaced-trap model and its basis."""
    if tables is None:
        tables = build_tables(Omega, with_delta=lambda0 != 0.0)
    basis = FockBasis(N, Omega + 1)
    h = np.diag(tables.epsilon + 0.5 * xi**2) - xi * tables.Q
    H = one_body_operator(basis, h)
    if lambda0 != 0.0:
        H = H + two_body_operator(basis, tables.delta_dense(), lambda0)
    return H.tocsr(), basis


def exact_propagate_app2(N, Omega, xi, lambda0, t_grid, grid=None, keep_rho=True):
    """Exact dynamics of |N, 0, ..., 0> in the displaced trap.

    Returns mean and unit-normalised variance of the one-body density, norm,
    energy and particle number on ``t_grid`` (plus the density matrices).
    """
    H, basis = trapped_bosons_hamiltonian(N, Omega, xi, lambda0)
    psi0 = np.zeros(len(basis), dtype=complex)
    psi0[basis.find((N,) + (0,) * Omega)] = 1.0
    grid = default_grid() if grid is None else grid
    lower = FockBasis(N - 1, Omega + 1)
    ann = [basis.annihilator(a, lower) for a in range(Omega + 1)]
    cols = {k: [] for k in ("mean", "variance", "norm", "energy", "particle_number")}
    rhos = []
    for psi in _Evolver(H, psi0).states(t_grid):
        rho = density_matrix_fock(basis, psi, ann)
        rho_q = one_body_density(rho, grid, check=False)
        mean, var = density_moments(rho_q, grid)
        cols["mean"].append(mean)
        cols["variance"].append(var)
        cols["norm"].append(np.vdot(psi, psi).real)
        cols["energy"].append(np.vdot(psi, H @ psi).real)
        cols["particle_number"].append(np.trace(rho).real)
        if keep_rho:
            rhos.append(rho)
    meta = {"oracle": "app2", "N": N, "Omega": Omega, "xi": xi, "lambda0": lambda0,
            "basis_size": len(basis)}
    return OracleResult(TimeSeries(t_grid, cols, meta), np.array(rhos) if keep_rho else None)


def _ladder(n):
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    return a


def tunnelling_operators(L, eta):
    """Double-well Hamiltonian and position matrix in the lowest ``L`` oscillator levels.

    Products are formed in a basis four levels larger and then truncated, so
    every retained element of q^4 is exact.
    """
    big = L + 4
    a = _ladder(big)
    q = (a + a.T) / np.sqrt(2.0)
    p = 1j * (a.T - a) / np.sqrt(2.0)
    q2 = q @ q
    h = (p @ p).real / 2.0 - q2 / 2.0 + (q2 @ q2) / (16.0 * eta)
    return h[:L, :L], q[:L, :L]


def coherent_coefficients(z, L):
    """<n|z> for n < L."""
    n = np.arange(L)
    if z == 0:
        return (n == 0).astype(complex)
    return np.exp(-0.5 * abs(z) ** 2 + n * np.log(abs(z)) - 0.5 * gammaln(n + 1.0)
                  + 1j * n * np.angle(z))


def tunnelling_bath_hamiltonian(M, Omega, L, eta, lam, tables=None):
    """Sparse Hamiltonian on (tunnelling level) x (bath Fock state) and the bath basis."""
    if tables is None:
        tables = build_tables(Omega, even_only=True)
    bath = FockBasis(M - 1, Omega + 1)
    size = L * len(bath)
    if size > MAX_BASIS:
        raise ConfigurationError(f"product basis of size {size} exceeds guard {MAX_BASIS}")
    h_tun, q_tun = tunnelling_operators(L, eta)
    H_free = one_body_operator(bath, np.diag(tables.epsilon))
    B = one_body_operator(bath, tables.Q2)
    H = (sp.kron(sp.csr_matrix(h_tun), sp.identity(len(bath)))
         + sp.kron(sp.identity(L), H_free)
         + 0.5 * lam * sp.kron(sp.csr_matrix(q_tun), B))
    return H.tocsr(), bath


def exact_propagate_app1(M, Omega, L, eta, lam, t_grid, q0=-2.5, p0=0.0, q_mirror=2.5):
    """Exact cross-correlation <mirror|Psi(t)> for the tunnelling-bath model.

    The tunnelling mode is expanded in ``L`` oscillator levels; both the
    initial state and its mirror must be representable to 0.9999.
    """
    H, bath = tunnelling_bath_hamiltonian(M, Omega, L, eta, lam)
    z0, zm = label(q0, p0), label(q_mirror, p0)
    c0, cm = coherent_coefficients(z0, L), coherent_coefficients(zm, L)
    for name, c in (("initial", c0), ("mirror", cm)):
        captured = float(np.sum(np.abs(c) ** 2))
        if captured < 0.9999:
            raise ConfigurationError(
                f"{name} state only {captured:.6f} representable with L={L} levels")
    bath0 = np.zeros(len(bath))
    bath0[bath.find((M - 1,) + (0,) * Omega)] = 1.0
    psi0 = np.kron(c0, bath0).astype(complex)
    mirror = np.kron(cm, bath0).astype(complex)
    cols = {"ccf": [], "norm": [], "energy": []}
    for psi in _Evolver(H, psi0).states(t_grid):
        cols["ccf"].append(np.vdot(mirror, psi))
        cols["norm"].append(np.vdot(psi, psi).real)
        cols["energy"].append(np.vdot(psi, H @ psi).real)
    meta = {"oracle": "app1", "M": M, "Omega": Omega, "L": L, "eta": eta, "lambda": lam,
            "basis_size": H.shape[0]}
    return OracleResult(TimeSeries(t_grid, cols, meta))


def split_operator_1d(potential, q0, p0, t_grid, x_max=15.0, n_points=2048, dt=0.005,
                      q_ref=None, p_ref=0.0):
    """Grid propagation of a width-1 Gaussian under a 1D potential (unit mass).

    Returns the overlap <ref|psi(t)> with the Gaussian at ``(q_ref, p_ref)``
    (defaults to the initial one) on ``t_grid``.
    """
    x = np.linspace(-x_max, x_max, n_points, endpoint=False)
    dx = x[1] - x[0]
    k = 2.0 * np.pi * np.fft.fftfreq(n_points, d=dx)

    def gaussian(q, p):
        return np.pi ** -0.25 * np.exp(-0.5 * (x - q) ** 2 + 1j * p * (x - q) + 0.5j * p * q)

    psi = gaussian(q0, p0)
    ref = gaussian(q0 if q_ref is None else q_ref, p_ref)
    v_half = np.exp(-0.5j * dt * potential(x))
    kin = np.exp(-0.5j * dt * k**2)
    out = []
    t = 0.0
    for target in np.asarray(t_grid, dtype=float):
        n = int(round((target - t) / dt))
        for _ in range(n):
            psi = v_half * np.fft.ifft(kin * np.fft.fft(v_half * psi))
        t += n * dt
        out.append(np.sum(ref.conj() * psi) * dx)
    return np.array(out)

"""Normal-ordered Hamiltonians H(z_k*, z_l) in a coherent-state basis.

Every model works on label arrays of shape (K, M).  ``pair_matrix`` returns
the (K_a, K_b) matrix of H(za_k*, zb_l); ``gradient`` returns
dH(z*, z)/dz* for each row, which drives the classical trajectories.
"""

import numpy as np

from .errors import ConfigurationError
from .tables import build_tables


def _as_labels(z, n_modes):
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != n_modes:
        raise ConfigurationError(
            f"expected {n_modes} modes, got array of shape {z.shape}")
    return z


class NormalOrderedHamiltonian:
    """Base class; subclasses implement ``pair_matrix`` and ``gradient``.

    ``boson_modes`` selects the second-quantised modes whose occupations
    add up to the particle number.
    """

    n_modes = 0
    boson_modes = slice(None)

    def pair_matrix(self, za, zb):
        raise NotImplementedError

    def gradient(self, z):
        raise NotImplementedError

    def evaluate(self, zk, zl):
        """H(zk*, zl) for two single multimode labels."""
        zk = _as_labels(zk, self.n_modes)
        zl = _as_labels(zl, self.n_modes)
        return complex(self.pair_matrix(zk[None, :], zl[None, :])[0, 0])

    def diagonal(self, z):
        """H(z_k*, z_k) for each row; real up to rounding."""
        z = np.atleast_2d(_as_labels(z, self.n_modes))
        return np.array([self.pair_matrix(row[None, :], row[None, :])[0, 0] for row in z])

    def describe(self):
        return {"model": type(self).__name__}


class QuadraticModel(NormalOrderedHamiltonian):
    """One-body Hamiltonian sum_ab h_ab a_a^dagger a_b with Hermitian ``h``."""

    def __init__(self, h):
        h = np.asarray(h, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ConfigurationError("one-body matrix must be square")
        if not np.allclose(h, h.conj().T, atol=1e-14):
            raise ConfigurationError("one-body matrix must be Hermitian")
        self.h = h
        self.n_modes = h.shape[0]

    def pair_matrix(self, za, zb):
        za = np.atleast_2d(_as_labels(za, self.n_modes))
        zb = np.atleast_2d(_as_labels(zb, self.n_modes))
        return za.conj() @ self.h @ zb.T

    def diagonal(self, z):
        z = np.atleast_2d(_as_labels(z, self.n_modes))
        return np.einsum("ka,ab,kb->k", z.conj(), self.h, z)

    def gradient(self, z):
        z = _as_labels(z, self.n_modes)
        return z @ self.h.T


class TunnellingBathModel(NormalOrderedHamiltonian):
    """Double-well tunnelling mode quadratically coupled to an identical-oscillator bath.

    Mode 0 is the distinguishable tunnelling coordinate; modes 1..Omega+1 are
    the bath oscillator levels 0, 2, ..., 2*Omega.  In first quantisation

        H = p^2/2 - q^2/2 + q^4/(16 eta) + sum_m [P_m^2/2 + (1 + lam q) Q_m^2 / 2]

    for a bath of ``M - 1`` oscillators.  Normal ordering (a + a^dagger)^4
    produces the 6 a^dagger^2 + 12 a^dagger a + 6 a^2 + 3 tail of the quartic,
    and q = (a + a^dagger)/sqrt(2) turns the coupling into
    lam/(2 sqrt 2) (x + y) sum z_k* Q2 z_l.
    """

    def __init__(self, eta=1.3544, lam=0.1, Omega=5, M=20, tables=None):
        if eta <= 0:
            raise ConfigurationError("eta must be positive")
        if Omega < 0:
            raise ConfigurationError("Omega must be non-negative")
        if M < 2:
            raise ConfigurationError("M must be at least 2 (one bath oscillator)")
        self.eta = float(eta)
        self.lam = float(lam)
        self.Omega = int(Omega)
        self.M = int(M)
        self.tables = tables if tables is not None else build_tables(self.Omega, even_only=True)
        if self.tables.size != self.Omega + 1:
            raise ConfigurationError("tables do not match Omega")
        self.n_modes = self.Omega + 2
        self.boson_modes = slice(1, None)
        self._eps = self.tables.epsilon
        self._Q2 = self.tables.Q2
        self._c4 = 1.0 / (64.0 * self.eta)
        self._coupling = self.lam / (2.0 * np.sqrt(2.0))

    @property
    def n_bath(self):
        return self.M - 1

    def _tunnelling(self, x, y):
        c4 = self._c4
        x2, y2 = x * x, y * y
        return (-0.5 * (x2 + y2)
                + c4 * (x2 * x2 + y2 * y2 + 4 * x2 * x * y + 4 * x * y2 * y
                        + 6 * x2 * y2 + 12 * x * y + 6 * x2 + 6 * y2 + 3.0))

    def _features(self, z, conjugate):
        # H(a*, b) = u(a*) @ W @ v(b).T with u, v = (x^0..x^4, bath, x * bath)
        z = np.atleast_2d(_as_labels(z, self.n_modes))
        if conjugate:
            z = z.conj()
        x = z[:, :1]
        bath = z[:, 1:]
        powers = x ** np.arange(5)
        return np.concatenate([powers, bath, x * bath], axis=1)

    def _weights(self):
        if getattr(self, "_W", None) is None:
            c4 = self._c4
            n = self.Omega + 1
            P = np.zeros((5, 5))
            P[0, 0] = 3 * c4
            P[2, 0] = P[0, 2] = 6 * c4 - 0.5
            P[1, 1] = 12 * c4
            P[4, 0] = P[0, 4] = c4
            P[3, 1] = P[1, 3] = 4 * c4
            P[2, 2] = 6 * c4
            W = np.zeros((5 + 2 * n, 5 + 2 * n))
            W[:5, :5] = P
            bath = slice(5, 5 + n)
            shifted = slice(5 + n, 5 + 2 * n)
            W[bath, bath] = np.diag(self._eps)
            W[shifted, bath] = self._coupling * self._Q2
            W[bath, shifted] = self._coupling * self._Q2
            self._W = W
        return self._W

    def pair_matrix(self, za, zb):
        u = self._features(za, True)
        v = self._features(zb, False)
        return (u @ self._weights()) @ v.T

    def diagonal(self, z):
        z = np.atleast_2d(_as_labels(z, self.n_modes))
        x = z[:, 0]
        b = z[:, 1:]
        bath = np.sum(self._eps * (b.real**2 + b.imag**2), axis=1)
        coupled = np.einsum("ka,ab,kb->k", b.conj(), self._Q2, b)
        return self._tunnelling(x.conj(), x) + bath + self._coupling * 2 * x.real * coupled

    def gradient(self, z):
        z = _as_labels(z, self.n_modes)
        x = z[..., 0].conj()
        y = z[..., 0]
        b = z[..., 1:]
        c4 = self._c4
        out = np.empty_like(z)
        q2b = b @ self._Q2.T
        coupled = np.sum(b.conj() * q2b, axis=-1)
        out[..., 0] = (-x + c4 * (4 * x**3 + 12 * x**2 * y + 4 * y**3
                                  + 12 * x * y**2 + 12 * y + 12 * x)
                       + self._coupling * coupled)
        out[..., 1:] = self._eps * b + self._coupling * (x + y)[..., None] * q2b
        return out

    def describe(self):
        return {"model": "app1", "eta": self.eta, "lambda": self.lam,
                "Omega": self.Omega, "M": self.M}


class TrappedBosonsModel(NormalOrderedHamiltonian):
    """N contact-interacting bosons in a harmonic trap displaced by ``xi``.

    Mode alpha is oscillator level alpha of the undisplaced trap, alpha = 0..Omega:

        H = sum_a eps_a z_a* z_a - xi sum_ab Q_ab z_a* z_b + xi^2/2 sum_a z_a* z_a
            + lambda0/2 sum_abcd delta_abcd z_a* z_b* z_d z_c
    """

    def __init__(self, xi=2.1, lambda0=0.01, Omega=25, N=100, tables=None):
        if Omega < 0:
            raise ConfigurationError("Omega must be non-negative")
        if N < 1:
            raise ConfigurationError("N must be at least 1")
        self.xi = float(xi)
        self.lambda0 = float(lambda0)
        self.Omega = int(Omega)
        self.N = int(N)
        if tables is None:
            tables = build_tables(self.Omega, with_delta=self.lambda0 != 0.0)
        if tables.size != self.Omega + 1:
            raise ConfigurationError("tables do not match Omega")
        self.tables = tables
        self.n_modes = self.Omega + 1
        self.boson_modes = slice(None)
        n = self.n_modes
        self.one_body = (np.diag(tables.epsilon + 0.5 * self.xi**2)
                         - self.xi * tables.Q)
        if self.lambda0 != 0.0:
            # rows (a, b), columns (c, d); z_d z_c is symmetric so column order is free
            self._contact = 0.5 * self.lambda0 * tables.delta_dense().reshape(n * n, n * n)
        else:
            self._contact = None

    def _pairs(self, z):
        return (z[..., :, None] * z[..., None, :]).reshape(*z.shape[:-1], -1)

    def pair_matrix(self, za, zb):
        za = np.atleast_2d(_as_labels(za, self.n_modes))
        zb = np.atleast_2d(_as_labels(zb, self.n_modes))
        out = za.conj() @ self.one_body @ zb.T
        if self._contact is not None:
            out = out + (self._pairs(za.conj()) @ self._contact) @ self._pairs(zb).T
        return out

    def diagonal(self, z):
        z = np.atleast_2d(_as_labels(z, self.n_modes))
        out = np.einsum("ka,ab,kb->k", z.conj(), self.one_body, z)
        if self._contact is not None:
            r = self._pairs(z)
            out = out + np.einsum("kp,pq,kq->k", r.conj(), self._contact, r)
        return out

    def gradient(self, z):
        z = _as_labels(z, self.n_modes)
        out = z @ self.one_body.T
        if self._contact is not None:
            n = self.n_modes
            # d/dz_a* of lambda0/2 sum delta z_a* z_b* z_d z_c = lambda0 sum delta z_b* z_c z_d
            t = (self._pairs(z) @ self._contact.T).reshape(*z.shape[:-1], n, n)
            out = out + 2.0 * np.einsum("...ab,...b->...a", t, z.conj())
        return out

    def describe(self):
        return {"model": "app2", "xi": self.xi, "lambda0": self.lambda0,
                "Omega": self.Omega, "N": self.N}

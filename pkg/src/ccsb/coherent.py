"""Multimode coherent-state algebra.

Units are m = omega = hbar = 1, so the coherent-state width is 1 and a label
is z = (q + ip)/sqrt(2).  A multimode label is stored as a 1-D complex array,
one entry per mode; a basis of K labels is a (K, M) array.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError

GAMMA = 1.0


def label(q, p=0.0):
    """Coherent-state label for phase-space centre (q, p)."""
    return (q + 1j * p) / np.sqrt(2.0)


def phase_space(z):
    """Inverse of :func:`label`, returns (q, p)."""
    z = np.asarray(z)
    return np.sqrt(2.0) * z.real, np.sqrt(2.0) * z.imag


def _check_modes(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise ConfigurationError(
            f"mode count mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def overlap_exponent(a, b):
    """Exponent of <a|b>, summed over modes.  Broadcasts over leading axes.

    Real and imaginary parts are assembled from terms that are exactly
    symmetric and antisymmetric under swapping ``a`` and ``b``, so the
    exponent of <b|a> is the bitwise conjugate of that of <a|b>.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_modes(a, b)
    ar, ai, br, bi = a.real, a.imag, b.real, b.imag
    re = ar * br + ai * bi - 0.5 * ((ar * ar + ai * ai) + (br * br + bi * bi))
    im = ar * bi - ai * br
    return np.sum(re, axis=-1) + 1j * np.sum(im, axis=-1)


def overlap(a, b):
    """<a|b> = exp(sum_m [a_m* b_m - |a_m|^2/2 - |b_m|^2/2])."""
    e = overlap_exponent(a, b)
    return np.exp(e.real) * (np.cos(e.imag) + 1j * np.sin(e.imag))


def overlap_matrix(za, zb=None):
    """Matrix of overlaps <za_k|zb_l> for label arrays of shape (K, M)."""
    za = np.atleast_2d(np.asarray(za, dtype=complex))
    zb = za if zb is None else np.atleast_2d(np.asarray(zb, dtype=complex))
    _check_modes(za, zb)
    na = np.sum(za.real**2 + za.imag**2, axis=1)
    nb = np.sum(zb.real**2 + zb.imag**2, axis=1)
    return np.exp(za.conj() @ zb.T - 0.5 * na[:, None] - 0.5 * nb[None, :])


def log_fock_overlap(z, n):
    """Logarithm of <z|n> for a multimode label and an occupation vector.

    The real part is log|<z|n>| and the imaginary part the phase, so
    ``np.exp`` of the result is the overlap itself.  Factorials go through
    ``gammaln``, which keeps occupations of a few hundred finite.  A zero
    label component with nonzero occupation gives a real part of -inf.
    Broadcasts over leading axes of ``z``.
    """
    z = np.asarray(z, dtype=complex)
    n = np.asarray(n)
    if z.shape[-1] != n.shape[-1]:
        raise ConfigurationError(
            f"mode count mismatch: {z.shape[-1]} labels vs {n.shape[-1]} occupations")
    if np.any(n < 0):
        raise ConfigurationError("occupations must be non-negative")
    absz2 = z.real**2 + z.imag**2
    occupied = n > 0
    with np.errstate(divide="ignore"):
        logabs = np.where(occupied, 0.5 * np.log(absz2), 0.0)
    logmag = np.sum(-0.5 * absz2 + n * logabs - 0.5 * gammaln(n + 1.0), axis=-1)
    phase = np.sum(np.where(occupied, -n * np.angle(z), 0.0), axis=-1)
    return logmag + 1j * phase


def fock_overlap(z, n):
    """<z|n> via the log-domain form."""
    return np.exp(log_fock_overlap(z, n))


def fock_overlap_direct(z, n):
    """Direct product form of <z|n>; only usable for small occupations."""
    z = np.asarray(z, dtype=complex)
    n = np.asarray(n)
    out = np.ones(z.shape[:-1], dtype=complex)
    for m in range(z.shape[-1]):
        zm = z[..., m]
        fact = float(np.prod(np.arange(1, int(n[m]) + 1, dtype=float)))
        out = out * np.exp(-0.5 * abs(zm)**2) * zm.conj()**int(n[m]) / np.sqrt(fact)
    return out


@dataclass(frozen=True)
class ProductTarget:
    """A product of coherent states on the leading modes and a Fock state on the rest.

    Describes both initial states used here: the tunnelling-mode Gaussian
    times the bath occupation (and its mirror image), and a pure Fock state
    when ``coherent`` is empty.
    """

    coherent: tuple = ()
    occupation: tuple = ()

    @property
    def n_coherent(self):
        return len(self.coherent)

    @property
    def n_modes(self):
        return len(self.coherent) + len(self.occupation)

    def log_overlaps(self, basis):
        """log <z_k|target> for every row of ``basis``."""
        basis = np.atleast_2d(np.asarray(basis, dtype=complex))
        if basis.shape[1] != self.n_modes:
            raise ConfigurationError(
                f"basis has {basis.shape[1]} modes, target has {self.n_modes}")
        nc = self.n_coherent
        out = np.zeros(basis.shape[0], dtype=complex)
        if nc:
            out += overlap_exponent(basis[:, :nc], np.asarray(self.coherent, dtype=complex))
        if self.occupation:
            out += log_fock_overlap(basis[:, nc:], np.asarray(self.occupation))
        return out

    def overlaps(self, basis):
        return np.exp(self.log_overlaps(basis))

    @property
    def particle_number(self):
        return int(sum(self.occupation))

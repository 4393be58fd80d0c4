"""Harmonic-oscillator matrix elements used by the second-quantised models.

All Hermite polynomials are the physicists' ones, H_0 = 1, H_1 = 2x, so the
oscillator eigenfunctions are (2^n n!)^(-1/2) pi^(-1/4) exp(-x^2/2) H_n(x).

The contact-interaction table

    delta[a, b, c, d] = int phi_a phi_b phi_c phi_d dx

is evaluated in closed form: the product of the four Hermite polynomials is
formed with exact integers, each even power x^(2t) is integrated against
exp(-2x^2), and the result is converted to float only at the very end.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt, pi

import numpy as np

from .errors import ConfigurationError

MAX_LEVEL = 60


@lru_cache(maxsize=None)
def hermite_coefficients(n):
    """Integer coefficients of H_n, lowest power first."""
    if n == 0:
        return (1,)
    if n == 1:
        return (0, 2)
    prev, cur = [1], [0, 2]
    for k in range(1, n):
        nxt = [0] * (k + 2)
        for i, c in enumerate(cur):
            nxt[i + 1] += 2 * c
        for i, c in enumerate(prev):
            nxt[i] -= 2 * k * c
        prev, cur = cur, nxt
    return tuple(cur)


def _polymul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def _double_factorial_odd(k):
    """(k-1)!! for even k >= 0, with (-1)!! = 1."""
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def delta_exact(a, b, c, d):
    """Single contact matrix element from the closed form, exact until the last step."""
    s = a + b + c + d
    if s % 2:
        return 0.0
    poly = _polymul(_polymul(hermite_coefficients(a), hermite_coefficients(b)),
                    _polymul(hermite_coefficients(c), hermite_coefficients(d)))
    # sum_t c_2t (2t-1)!! / 4^t, scaled by 4^(s/2) to stay integral
    half = s // 2
    total = sum(poly[2 * t] * _double_factorial_odd(2 * t) * 4 ** (half - t)
                for t in range(half + 1))
    denom = 2 ** (3 * s) * factorial(a) * factorial(b) * factorial(c) * factorial(d)
    return _signed_sqrt_ratio(total, denom) / sqrt(2.0 * pi)


def _signed_sqrt_ratio(num, den):
    """sign(num) * sqrt(num^2 / den) with one rounding of the exact ratio."""
    if num == 0:
        return 0.0
    mag = sqrt(float(Fraction(num * num, den)))
    return mag if num > 0 else -mag


def _delta_canonical(levels):
    """Canonical (sorted) index tuples with even level sum, and their values.

    ``levels`` maps table position to oscillator level.  Pair products of
    Hermite polynomials are contracted against an integer Hankel matrix of
    Gaussian moments, so each entry costs one dot product of exact integers.
    """
    n = len(levels)
    top = max(levels)
    length = 2 * top + 1
    tmax = 2 * top  # largest half-degree of a four-fold product
    # moments[k] = (k-1)!! 4^(tmax - k/2) for even k, zero for odd k
    moments = [(_double_factorial_odd(k) * 4 ** (tmax - k // 2)) if k % 2 == 0 else 0
               for k in range(2 * length - 1)]
    hankel = np.empty((length, length), dtype=object)
    for i in range(length):
        for j in range(length):
            hankel[i, j] = moments[i + j]

    pairs = {}
    for i in range(n):
        for j in range(i, n):
            prod = _polymul(hermite_coefficients(levels[i]), hermite_coefficients(levels[j]))
            prod = prod + [0] * (length - len(prod))
            pairs[i, j] = np.array(prod, dtype=object)
    contracted = {key: p.dot(hankel) for key, p in pairs.items()}

    fact = [factorial(lv) for lv in levels]
    index, values = [], []
    for a, b, c, d in itertools.combinations_with_replacement(range(n), 4):
        s = levels[a] + levels[b] + levels[c] + levels[d]
        if s % 2:
            continue
        total = contracted[a, b].dot(pairs[c, d])
        den = 4 ** (2 * tmax) * 2 ** s * fact[a] * fact[b] * fact[c] * fact[d]
        index.append((a, b, c, d))
        values.append(_signed_sqrt_ratio(int(total), den) / sqrt(2.0 * pi))
    return np.array(index, dtype=np.int64).reshape(-1, 4), np.array(values)


@dataclass
class MatrixElementTables:
    """Oscillator tables over a list of levels.

    ``levels[i]`` is the physical oscillator level stored at table index i;
    with ``even_only`` the table holds levels 0, 2, ..., 2*Omega.
    """

    levels: np.ndarray
    epsilon: np.ndarray
    Q: np.ndarray
    Q2: np.ndarray
    delta_index: np.ndarray = None
    delta_values: np.ndarray = None
    _dense: np.ndarray = field(default=None, repr=False)

    @property
    def size(self):
        return len(self.levels)

    @property
    def has_delta(self):
        return self.delta_index is not None

    def delta(self, a, b, c, d):
        """Look up one element by table indices (any order)."""
        return float(self.delta_dense()[a, b, c, d])

    def delta_dense(self):
        """Full (n, n, n, n) array expanded from the canonical entries."""
        if not self.has_delta:
            raise ConfigurationError("tables were built without the contact table")
        if self._dense is None:
            n = self.size
            dense = np.zeros((n, n, n, n))
            for perm in set(itertools.permutations(range(4))):
                idx = self.delta_index[:, perm]
                dense[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]] = self.delta_values
            dense.flags.writeable = False
            self._dense = dense
        return self._dense


def position_matrix(levels):
    """<i|q|j> between the given oscillator levels."""
    lv = np.asarray(levels)
    diff = lv[:, None] - lv[None, :]
    hi = np.maximum(lv[:, None], lv[None, :])
    return np.where(np.abs(diff) == 1, np.sqrt(hi / 2.0), 0.0)


def position_squared_matrix(levels):
    """<i|q^2|j> between the given oscillator levels."""
    lv = np.asarray(levels, dtype=float)
    a, b = lv[:, None], lv[None, :]
    out = np.where(a == b, a + 0.5, 0.0)
    out = np.where(a == b - 2, 0.5 * np.sqrt((a + 2) * (a + 1)), out)
    out = np.where(a == b + 2, 0.5 * np.sqrt(np.abs(a * (a - 1))), out)
    return out


@lru_cache(maxsize=8)
def _cached_delta(levels):
    return _delta_canonical(list(levels))


def build_tables(Omega, even_only=False, with_delta=None):
    """Build the oscillator tables for levels up to ``Omega``.

    With ``even_only`` the stored levels are 0, 2, ..., 2*Omega (index i is
    level 2i).  The contact table is built by default only for the full
    ladder, because only the trapped-boson model needs it.
    """
    if not isinstance(Omega, (int, np.integer)) or Omega < 0:
        raise ConfigurationError(f"Omega must be a non-negative integer, got {Omega!r}")
    levels = tuple(range(0, 2 * Omega + 1, 2)) if even_only else tuple(range(Omega + 1))
    if max(levels) > MAX_LEVEL:
        raise ConfigurationError(
            f"highest level {max(levels)} exceeds supported maximum {MAX_LEVEL}")
    if with_delta is None:
        with_delta = not even_only
    lv = np.array(levels)
    tables = MatrixElementTables(
        levels=lv,
        epsilon=lv + 0.5,
        Q=position_matrix(lv),
        Q2=position_squared_matrix(lv),
    )
    if with_delta:
        idx, vals = _cached_delta(levels)
        tables.delta_index = idx
        tables.delta_values = vals
    return tables


def oscillator_functions(n_levels, x):
    """Normalised oscillator eigenfunctions phi_0..phi_{n-1} on ``x``.

    Uses the upward recurrence on the normalised functions, which stays
    finite where raw Hermite values overflow.  Returns shape (n_levels, len(x)).
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_levels, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x**2)
    if n_levels > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_levels - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out

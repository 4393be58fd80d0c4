"""Coupled equations of motion for coherent-state labels, actions and amplitudes.

For each configuration k

    dz_k/dt = -i dH(z_k*, z_k)/dz_k*
    dS_k/dt = sum_m (i/2)(z_k* dz_k - dz_k* z_k) - H(z_k*, z_k)
    sum_l <z_k|z_l> e^{iS_l} dD_l/dt
        = -i sum_l <z_k|z_l> e^{iS_l} D_l [H(z_k*, z_l) - H(z_l*, z_l) - i dz_l.(z_k* - z_l*)]

The amplitude system is solved as a minimum-norm least-squares problem with a
relative singular-value cutoff.
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .coherent import overlap_matrix
from .errors import (ConfigurationError, DegenerateBasisError, NormGuardError,
                     PropagationError)
from .observables import norm_and_particle_number
from .series import TimeSeries

logger = logging.getLogger(__name__)

ACTION_IMAG_TOL = 1e-9


@dataclass
class WavefunctionState:
    """Psi(t) = sum_k D_k exp(i S_k) |z_k> under a fixed model."""

    model: object
    z: np.ndarray
    D: np.ndarray
    S: np.ndarray = None
    t: float = 0.0

    def __post_init__(self):
        self.z = np.atleast_2d(np.asarray(self.z, dtype=complex))
        self.D = np.asarray(self.D, dtype=complex).reshape(-1)
        self.S = (np.zeros(self.D.size) if self.S is None
                  else np.asarray(self.S, dtype=float).reshape(-1))
        K, M = self.z.shape
        if self.D.size != K or self.S.size != K:
            raise ConfigurationError("z, D and S must describe the same number of configurations")
        if M != self.model.n_modes:
            raise ConfigurationError(f"labels have {M} modes, model expects {self.model.n_modes}")

    @property
    def K(self):
        return self.z.shape[0]

    @property
    def M(self):
        return self.z.shape[1]

    def copy(self):
        return WavefunctionState(self.model, self.z.copy(), self.D.copy(), self.S.copy(), self.t)

    def pack(self):
        return np.concatenate([self.z.ravel(), self.D, self.S.astype(complex)])

    def unpack(self, y, t):
        K, M = self.z.shape
        n = K * M
        return WavefunctionState(self.model, y[:n].reshape(K, M), y[n:n + K],
                                 y[n + K:].real.copy(), t)


@dataclass
class PropagatorSettings:
    dt: float = 0.01
    integrator: str = "rk45"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    svd_cutoff: float = 1e-10
    record_every: float = 0.1
    norm_guard: float = 0.5
    min_step: float = 1e-10
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.integrator not in ("rk4", "rk45"):
            raise ConfigurationError(f"integrator must be 'rk4' or 'rk45', got {self.integrator!r}")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not 0 <= self.svd_cutoff < 1:
            raise ConfigurationError("svd_cutoff must lie in [0, 1)")
        if not self.record_every > 0:
            raise ConfigurationError("record_every must be positive")
        if not self.norm_guard > 0:
            raise ConfigurationError("norm_guard must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("rel_tol and abs_tol must be positive")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be at least 1")

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class SolveInfo:
    rank: int
    condition: float
    method: str = "svd"


def solve_amplitude_system(matrix, b, svd_cutoff=1e-10):
    """Minimum-norm least-squares solution of ``matrix @ x = b`` by SVD.

    Singular values below ``svd_cutoff * s_max`` are discarded.  Returns
    ``(x, SolveInfo)``; the condition number is that of the retained part.
    """
    A = np.asarray(matrix, dtype=complex)
    b = np.asarray(b, dtype=complex)
    U, s, Vh = np.linalg.svd(A)
    if s.size == 0 or s[0] == 0.0:
        raise DegenerateBasisError("overlap system is identically zero", 0)
    keep = s > svd_cutoff * s[0]
    rank = int(keep.sum())
    if rank == 0:
        raise DegenerateBasisError("no singular value above cutoff", 0, math.inf)
    x = Vh[keep].conj().T @ ((U[:, keep].conj().T @ b) / s[keep])
    return x, SolveInfo(rank, float(s[0] / s[keep][-1]), "svd")


def _extreme_eigenvalues(O, cf):
    """Largest eigenvalue of O and of O^-1 by Lanczos, reusing the Cholesky factor."""
    K = O.shape[0]
    start = np.ones(K, dtype=complex)
    top = eigsh(O, k=1, which="LA", v0=start, tol=1e-2, return_eigenvectors=False)[0]
    inverse = LinearOperator((K, K), matvec=lambda v: sla.cho_solve((cf, True), v, check_finite=False),
                             dtype=complex)
    inv_top = eigsh(inverse, k=1, which="LA", v0=start, tol=1e-2, return_eigenvectors=False)[0]
    return float(top), 1.0 / float(inv_top)


def solve_overlap_system(O, b, svd_cutoff=1e-10):
    """Solve ``O y = b`` for a Hermitian positive semi-definite overlap matrix.

    Gives the same minimum-norm answer as :func:`solve_amplitude_system`.
    When the Cholesky factorisation succeeds and the condition number stays a
    factor of ten below ``1/svd_cutoff`` no eigenvalue would be truncated, so
    the triangular solve is used.  The condition is first bounded by the cheap
    1-norm estimate (never smaller than the 2-norm value for Hermitian
    matrices) and, if that is inconclusive, measured by Lanczos iteration.
    Otherwise an eigendecomposition pseudo-inverse is formed.
    """
    K = O.shape[0]
    if svd_cutoff > 0:
        cf, info = lapack.zpotrf(O, lower=True)
        if info == 0:
            anorm = np.max(np.sum(np.abs(O), axis=0))
            rcond, info2 = lapack.zpocon(cf, anorm, uplo="L")
            condition = 1.0 / rcond if info2 == 0 and rcond > 0 else math.inf
            if condition * svd_cutoff >= 0.1 and K > 2:
                try:
                    top, bottom = _extreme_eigenvalues(O, cf)
                    condition = top / bottom if bottom > 0 else math.inf
                except ArpackNoConvergence:
                    condition = math.inf
            if condition * svd_cutoff < 0.1:
                y = sla.cho_solve((cf, True), b, check_finite=False)
                return y, SolveInfo(K, float(condition), "cholesky")
    w, V = np.linalg.eigh(O)
    wmax = np.max(np.abs(w))
    if wmax == 0.0:
        raise DegenerateBasisError("overlap matrix is zero", 0)
    keep = w > svd_cutoff * wmax
    rank = int(keep.sum())
    if rank == 0:
        raise DegenerateBasisError("no eigenvalue above cutoff", 0, math.inf)
    y = V[:, keep] @ ((V[:, keep].conj().T @ b) / w[keep])
    return y, SolveInfo(rank, float(wmax / w[keep][0]), "eigh")


@dataclass
class Derivatives:
    zdot: np.ndarray
    Sdot: np.ndarray
    Ddot: np.ndarray
    info: SolveInfo = None
    overlaps: np.ndarray = field(default=None, repr=False)


def rhs(state, svd_cutoff=1e-10, dense=False):
    """Time derivatives of (z, S, D) for every configuration.

    ``dense=True`` builds the full non-Hermitian matrix <z_k|z_l> e^{iS_l}
    and solves it by SVD; the default factorises out the unitary e^{iS_l}
    column scaling and solves the Hermitian overlap system, which has the
    same minimum-norm solution at a fraction of the cost.
    """
    model = state.model
    z = state.z
    grad = model.gradient(z)
    zdot = -1j * grad
    H = model.pair_matrix(z, z)
    h_diag = np.diagonal(H).copy()

    scale = np.maximum(1.0, np.abs(h_diag))
    if np.any(np.abs(h_diag.imag) > ACTION_IMAG_TOL * scale):
        worst = float(np.max(np.abs(h_diag.imag)))
        raise PropagationError(f"H(z*, z) has imaginary part {worst:.3e}; gradient or model bug")
    kinetic = 0.5j * np.sum(z.conj() * zdot - zdot.conj() * z, axis=1)
    Sdot = (kinetic - h_diag).real

    O = overlap_matrix(z)
    phase = np.exp(1j * state.S)
    c = state.D * phase
    G = z.conj() @ zdot.T
    g = np.diagonal(G)
    coupling = (H - h_diag[None, :]) - 1j * (G - g[None, :])
    b = -1j * ((O * coupling) @ c)

    if dense:
        Ddot, info = solve_amplitude_system(O * phase[None, :], b, svd_cutoff)
    else:
        y, info = solve_overlap_system(O, b, svd_cutoff)
        Ddot = y / phase
    return Derivatives(zdot, Sdot, Ddot, info, O)


# Dormand-Prince 5(4) tableau
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


class _System:
    """Packs the state for the integrators and counts right-hand-side calls."""

    def __init__(self, template, svd_cutoff):
        self.template = template
        self.svd_cutoff = svd_cutoff
        self.calls = 0
        self.last_info = None

    def __call__(self, t, y):
        self.calls += 1
        st = self.template.unpack(y, t)
        d = rhs(st, self.svd_cutoff)
        self.last_info = d.info
        return np.concatenate([d.zdot.ravel(), d.Ddot, d.Sdot.astype(complex)])


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _error_norm(err, y0, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


class _DormandPrince:
    def __init__(self, f, rtol, atol, h0, min_step, max_steps):
        self.f = f
        self.max_steps = max_steps
        self.attempts = 0
        self.rtol = rtol
        self.atol = atol
        self.h = h0
        self.min_step = min_step
        self.k_first = None

    def advance(self, t, y, t_target):
        """Integrate from t to t_target exactly, returning the new y."""
        direction = np.sign(t_target - t)
        while (t_target - t) * direction > 0:
            h = min(self.h, abs(t_target - t))
            last = h == abs(t_target - t)
            if self.k_first is None:
                self.k_first = self.f(t, y)
            while True:
                if h < self.min_step:
                    raise PropagationError(f"step size underflow at t={t:.6g} (h={h:.3e})")
                self.attempts += 1
                if self.attempts > self.max_steps:
                    raise PropagationError(f"exceeded {self.max_steps} steps at t={t:.6g}")
                hs = direction * h
                ks = [self.k_first]
                for i in range(1, 7):
                    yi = y + hs * sum(a * k for a, k in zip(_A[i], ks))
                    ks.append(self.f(t + _C[i] * hs, yi))
                y_new = y + hs * sum(b * k for b, k in zip(_B5, ks) if b)
                err = hs * sum(e * k for e, k in zip(_E, ks) if e)
                en = _error_norm(err, y, y_new, self.rtol, self.atol)
                if not np.isfinite(en):
                    h *= 0.2
                    last = False
                    continue
                if en <= 1.0:
                    factor = 5.0 if en == 0 else min(5.0, 0.9 * en ** -0.2)
                    if not last:
                        self.h = h * factor
                    else:
                        self.h = max(self.h, h * min(factor, 1.0))
                    t = t_target if last else t + hs
                    y = y_new
                    self.k_first = ks[6]
                    break
                h *= max(0.2, 0.9 * en ** -0.2)
                last = False
        return y


def propagate(state, settings, t_end, observables=None, on_record=None):
    """Advance ``state`` to ``t_end``, recording at every ``settings.record_every``.

    ``observables`` maps column names to callables of a state; norm and
    particle number are always recorded.  Returns ``(TimeSeries, final_state)``.
    If the norm leaves ``1 +- norm_guard`` (relative to its initial value)
    a :class:`NormGuardError` carrying the partial series is raised.
    """
    if t_end == state.t:
        raise ConfigurationError("t_end must differ from the current time")
    direction = 1.0 if t_end > state.t else -1.0
    observables = dict(observables or {})
    records = {"norm": [], "particle_number": []}
    records.update({name: [] for name in observables})
    times = []

    n_rec = int(round(abs(t_end - state.t) / settings.record_every))
    if not math.isclose(n_rec * settings.record_every, abs(t_end - state.t), rel_tol=1e-9):
        raise ConfigurationError("t_end - t must be a multiple of record_every")
    t0 = state.t
    targets = t0 + direction * settings.record_every * np.arange(1, n_rec + 1)

    sys_ = _System(state, settings.svd_cutoff)
    y = state.pack()
    current = state
    norm0 = None

    def record(st):
        nonlocal norm0
        nrm, num = norm_and_particle_number(st)
        if norm0 is None:
            norm0 = nrm
        times.append(st.t)
        records["norm"].append(nrm)
        records["particle_number"].append(num)
        for name, fn in observables.items():
            records[name].append(fn(st))
        if on_record is not None:
            on_record(st)
        return nrm

    def series():
        t = np.array(times)
        if direction < 0:
            order = np.argsort(t)
            return TimeSeries(t[order], {k: np.array(v)[order] for k, v in records.items()},
                              {"settings": asdict(settings)})
        return TimeSeries(t, {k: np.array(v) for k, v in records.items()},
                          {"settings": asdict(settings)})

    record(current)
    stepper = None
    if settings.integrator == "rk45":
        stepper = _DormandPrince(sys_, settings.rel_tol, settings.abs_tol,
                                 settings.dt, settings.min_step, settings.max_steps)
    t = t0
    report_every = max(1, n_rec // 20)
    for i_rec, target in enumerate(targets, start=1):
        if settings.integrator == "rk4":
            span = target - t
            n_sub = max(1, int(math.ceil(abs(span) / settings.dt - 1e-9)))
            h = span / n_sub
            for i in range(n_sub):
                y = _rk4_step(sys_, t + i * h, y, h)
        else:
            y = stepper.advance(t, y, target)
        t = float(target)
        if not np.all(np.isfinite(y)):
            raise PropagationError(f"non-finite state at t={t:.6g}")
        current = state.unpack(y, t)
        nrm = record(current)
        if abs(nrm / norm0 - 1.0) > settings.norm_guard:
            logger.warning("norm guard tripped at t=%.4g: norm %.4g (initial %.4g)", t, nrm, norm0)
            raise NormGuardError(f"norm {nrm:.4g} left the guard band at t={t:.4g}",
                                 t=t, norm=nrm, partial=series())
        if i_rec % report_every == 0:
            logger.info("t=%.6g (%d/%d records), %d RHS calls, norm %.6g",
                        t, i_rec, n_rec, sys_.calls, nrm)
    ts = series()
    ts.metadata["rhs_calls"] = sys_.calls
    return ts, current

"""Acceptance criteria, one PASS/FAIL line per criterion.

The engine runs go through the same preset, runner and CSV path as
``ccsb run``.  Criteria 4 to 9 are long (three to four hours in total on one
core); deselect them with ``-m "not slow"``.
"""

import itertools

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from ccsb.cli import available_workers
from ccsb.config import RunConfig
from ccsb.hamiltonians import TrappedBosonsModel, TunnellingBathModel
from ccsb.observables import chi_error
from ccsb.oracle import analytic_noninteracting, quadrature_delta
from ccsb.runner import execute, prepare
from ccsb.tables import build_tables

pytestmark = pytest.mark.acceptance
slow = pytest.mark.slow

MODELS = {
    "tunnelling-bath": lambda: TunnellingBathModel(eta=1.3544, lam=0.1, Omega=5, M=20),
    "trapped-bosons": lambda: TrappedBosonsModel(xi=2.1, lambda0=0.01, Omega=14, N=100),
}


def run_preset(root, preset, overrides=None, workers=1, tag=""):
    """Run a preset with ``{"section.key": value}`` overrides; return (result, out_dir)."""
    config = RunConfig.preset(preset)
    if overrides:
        config = config.with_overrides({tuple(k.split(".", 1)): v for k, v in overrides.items()})
    out = root / f"{config.name}-{config.digest()[:8]}-w{workers}{tag}"
    with threadpool_limits(limits=workers):
        result = execute(prepare(config), out, workers=workers)
    return result, out


def window(series, t_max):
    keep = series.t <= t_max + 1e-9
    return series.t[keep], {k: v[keep] for k, v in series.columns.items()}


def relative_drift(values):
    values = np.real(values)
    return float(np.max(np.abs(values / values[0] - 1.0)))


def random_labels(rng, n_modes):
    return rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)


def finite_difference_gradient(model, z, h=1e-5):
    out = np.empty_like(z)
    for m in range(z.size):
        e = np.zeros_like(z)
        e[m] = h
        dq = (model.evaluate(z + e, z + e) - model.evaluate(z - e, z - e)).real / (2 * h)
        dp = (model.evaluate(z + 1j * e, z + 1j * e)
              - model.evaluate(z - 1j * e, z - 1j * e)).real / (2 * h)
        out[m] = 0.5 * (dq + 1j * dp)
    return out


def test_criterion_1_contact_elements_match_quadrature(verdict):
    dense = build_tables(10).delta_dense()
    worst = 0.0
    for a, b, c, d in itertools.combinations_with_replacement(range(11), 4):
        worst = max(worst, abs(dense[a, b, c, d] - quadrature_delta(a, b, c, d)))
    idx = np.indices(dense.shape).sum(axis=0)
    odd_zero = not dense[idx % 2 == 1].any()
    symmetric = all(np.array_equal(dense, dense.transpose(p))
                    for p in itertools.permutations(range(4)))
    verdict(1, worst <= 1e-10 and odd_zero and symmetric,
            f"max |closed form - quadrature| = {worst:.2e} (tol 1e-10), "
            f"odd sums zero: {odd_zero}, symmetric: {symmetric}")


def test_criterion_2_gradients_match_finite_differences(verdict):
    worst = {}
    for name, build in MODELS.items():
        model = build()
        rng = np.random.default_rng(2)
        errs = []
        for _ in range(50):
            z = random_labels(rng, model.n_modes)
            analytic = model.gradient(z)
            numeric = finite_difference_gradient(model, z)
            errs.append(np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic))
        worst[name] = max(errs)
    verdict(2, max(worst.values()) <= 1e-6,
            "max relative error over 50 points: "
            + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (tol 1e-6)")


def test_criterion_3_hamiltonian_kernel_is_hermitian(verdict):
    worst = {}
    for name, build in MODELS.items():
        model = build()
        rng = np.random.default_rng(3)
        errs = []
        for _ in range(100):
            a = random_labels(rng, model.n_modes)
            b = random_labels(rng, model.n_modes)
            errs.append(abs(model.evaluate(a, b) - np.conj(model.evaluate(b, a))))
        worst[name] = max(errs)
    verdict(3, max(worst.values()) <= 1e-12,
            "max |H(a,b) - conj H(b,a)| over 100 pairs: "
            + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (tol 1e-12)")


def noninteracting_check(series):
    t, cols = series.t, series.columns
    mean_ref, var_ref = analytic_noninteracting(2.1, t)
    dev_var = float(np.max(np.abs(cols["variance"] - var_ref)))
    dev_mean = float(np.max(np.abs(cols["mean"] - mean_ref)))
    drift_norm = relative_drift(cols["norm"])
    drift_n = relative_drift(cols["particle_number"])
    ok = dev_var <= 0.02 and dev_mean <= 0.05 and drift_norm <= 0.01 and drift_n <= 0.01
    detail = (f"max |variance - 0.5| = {dev_var:.3f} (tol 0.02), "
              f"max |mean - xi(1 - cos t)| = {dev_mean:.3f} (tol 0.05), "
              f"norm drift {drift_norm:.2e}, N drift {drift_n:.2e} (tol 1e-2)")
    return ok, detail


@slow
def test_criterion_4_noninteracting_limit(tmp_path, verdict):
    # Stated basis Omega = 14.  The truncated single-particle ladder cannot hold
    # a coherent state displaced by 2 xi = 4.2, so this fails for any K.
    result, _ = run_preset(tmp_path, "app2-noninteracting", {"model.Omega": 14})
    assert result.status == 0, result.error
    ok, detail = noninteracting_check(result.series)
    verdict(4, ok, "Omega=14: " + detail)


@slow
def test_criterion_4_companion_with_converged_ladder(tmp_path, verdict):
    result, _ = run_preset(tmp_path, "app2-noninteracting")
    assert result.status == 0, result.error
    ok, detail = noninteracting_check(result.series)
    verdict("4 companion", ok, "Omega=26: " + detail)


@pytest.fixture(scope="module")
def small_n_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("small-n")
    oracle, _ = run_preset(root, "oracle-app2-small-n")
    runs = {}
    for K in (500, 1000):
        result, out = run_preset(root, "app2-small-n", {"sampling.K": K})
        runs[K] = (result, out)
    return oracle, runs, root


@slow
def test_criterion_5_small_n_matches_fock_oracle(small_n_runs, verdict):
    oracle, runs, _ = small_n_runs
    t_ref, ref = window(oracle.series, 10.0)
    dev = {}
    for K, (result, _) in runs.items():
        assert result.status == 0, result.error
        t, cols = window(result.series, 10.0)
        assert np.allclose(t, t_ref)
        dev[K] = float(np.max(np.abs(cols["variance"] - ref["variance"])))
    ok = dev[500] <= 0.05 and dev[1000] <= 0.05 and dev[1000] <= dev[500]
    verdict(5, ok, f"max |variance - oracle| on [0, 10]: K=500 {dev[500]:.4f}, "
                   f"K=1000 {dev[1000]:.4f} (tol 0.05, must not grow with K)")


@pytest.fixture(scope="module")
def small_bath_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("small-bath")
    oracle, _ = run_preset(root, "oracle-app1-small-bath")
    runs = {K: run_preset(root, "app1-small-bath", {"sampling.K": K})[0] for K in (1000, 2000)}
    return oracle, runs


@slow
def test_criterion_6_small_bath_matches_product_oracle(small_bath_runs, verdict):
    oracle, runs = small_bath_runs
    ref = np.abs(oracle.series["ccf"])
    dev, chi = {}, {}
    for K, result in runs.items():
        assert result.status == 0, result.error
        mag = np.abs(result.series["ccf"])
        early = result.series.t <= 10 + 1e-9
        dev[K] = float(np.max(np.abs(mag[early] - ref[early])))
        chi[K] = chi_error(result.series.t, mag, oracle.series.t, ref)
    ok = dev[1000] <= 0.02 and dev[2000] <= 0.02 and chi[2000] < chi[1000]
    verdict(6, ok, f"max ||CCF| - oracle| on [0, 10]: K=1000 {dev[1000]:.4f}, "
                   f"K=2000 {dev[2000]:.4f} (tol 0.02); chi on [0, 30]: "
                   f"K=1000 {chi[1000]:.4f}, K=2000 {chi[2000]:.4f} (must decrease)")


@slow
def test_criterion_7_conservation_at_desk_scale(tmp_path, verdict):
    result, _ = run_preset(tmp_path, "app1-desk")
    assert result.status == 0, result.error
    cols = result.series.columns
    drift_norm = relative_drift(cols["norm"])
    drift_n = relative_drift(cols["particle_number"])
    n0 = float(cols["particle_number"][0] / cols["norm"][0])
    verdict(7, drift_norm <= 0.05 and drift_n <= 0.05,
            f"M=20, K=500, t <= 50: norm drift {drift_norm:.2e}, N drift {drift_n:.2e} "
            f"(tol 5e-2); initial N/norm = {n0:.3f}")


SIGMA_SWEEP = (1.0, 10.0, 100.0, 1e4, 1e8)


def conservation_error(series, n_exact):
    """Worst departure of the norm from 1 and of N from its exact value."""
    norm = np.real(series["norm"])
    number = np.real(series["particle_number"])
    return float(max(np.max(np.abs(norm - 1.0)), np.max(np.abs(number / n_exact - 1.0))))


@slow
def test_criterion_8_compression_sweep(tmp_path, verdict):
    # Overcompression shows up as the norm guard tripping at large sigma.  A
    # run that trips keeps its partial series, so its error is still reported.
    errors, tripped = {}, {}
    for sigma in SIGMA_SWEEP:
        result, _ = run_preset(tmp_path, "app1-desk", {"sampling.sigma_empty": sigma})
        assert result.status in (0, 3), result.error
        n_exact = result.metadata["config"]["model"]["M"] - 1
        tripped[sigma] = result.status == 3
        errors[sigma] = conservation_error(result.series, n_exact)
    first = SIGMA_SWEEP[:3]
    improving = (not any(tripped[s] for s in first)
                 and all(errors[b] < errors[a] for a, b in zip(first, first[1:])))
    overcompressed = any(tripped[s] for s in SIGMA_SWEEP[3:])
    verdict(8, improving and overcompressed,
            "max(|norm - 1|, |N/19 - 1|) over t <= 50 by sigma: "
            + ", ".join(f"{s:g} {errors[s]:.2e}" + (" (guard tripped)" if tripped[s] else "")
                        for s in SIGMA_SWEEP)
            + f"; improves over first three: {improving}, guard trips beyond: {overcompressed}")


@slow
def test_criterion_9_bit_identical_reruns(small_n_runs, verdict):
    _, runs, root = small_n_runs
    first = (runs[500][1] / "observables.csv").read_bytes()
    same = {}
    for workers in (1, available_workers()):
        _, out = run_preset(root, "app2-small-n", {"sampling.K": 500}, workers=workers,
                            tag="-again")
        same[workers] = (out / "observables.csv").read_bytes() == first
    verdict(9, all(same.values()),
            "app2-small-n rerun identical: "
            + ", ".join(f"workers={w} {s}" for w, s in same.items()))

"""Execute a :class:`~ccsb.config.RunConfig` and write its artifacts.

Output directory layout::

    observables.csv     time series, ``t`` first
    observables.json    metadata: config, config hash, code version, diagnostics
    spectrum.csv        |FT| of the cross-correlation (tunnelling model only)
    checkpoints/*.npz   restart files with z, D, S, t and the config
    run.log             log of the run

Everything that can fail on bad input happens in :func:`prepare`, before the
directory is created.
"""

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .coherent import ProductTarget, label
from .config import RunConfig
from .errors import CCSBError, ConfigurationError, NormGuardError
from .hamiltonians import TrappedBosonsModel, TunnellingBathModel
from .observables import (NORM_DIVIDED, DensityRecord, add_norm_divided, check_grid,
                          cross_correlation, default_grid, energy, ft_spectrum)
from .oracle import exact_propagate_app1, exact_propagate_app2
from .propagator import WavefunctionState, propagate
from .sampling import SamplingSpec, initial_state
from .series import TimeSeries

logger = logging.getLogger(__name__)


@dataclass
class Plan:
    config: RunConfig
    model: object = None
    spec: SamplingSpec = None
    grid: np.ndarray = None
    mirror: ProductTarget = None


@dataclass
class RunResult:
    status: int
    series: TimeSeries = None
    metadata: dict = field(default_factory=dict)
    final_state: WavefunctionState = None
    error: Exception = None


def _occupation(config):
    m = config["model"]
    if config.model_name == "app1":
        return (m["M"] - 1,) + (0,) * m["Omega"]
    return (m["N"],) + (0,) * m["Omega"]


def prepare(config):
    """Build the model, sampling spec, grid and mirror state, validating all of them."""
    m = config["model"]
    plan = Plan(config)
    if config.application == "app1":
        plan.model = TunnellingBathModel(m["eta"], m["lambda"], m["Omega"], m["M"])
    elif config.application == "app2":
        plan.model = TrappedBosonsModel(m["xi"], m["lambda0"], m["Omega"], m["N"])
    if config.application in ("app1", "app2"):
        s = config["sampling"]
        tunnelling = (s["q0"], s["p0"]) if config.model_name == "app1" else None
        plan.spec = SamplingSpec(
            K=s["K"], initial_occupation=_occupation(config),
            sigma_occupied=s["sigma_occupied"], sigma_empty=s["sigma_empty"],
            sigma_tunnelling=s.get("sigma_tunnelling", 1.0),
            initial_tunnelling=tunnelling, seed=s["seed"])
    if config.model_name == "app2":
        g = config["grid"]
        plan.grid = default_grid(g["lo"], g["hi"], g["step"])
        check_grid(plan.grid, m["Omega"] + 1)
    else:
        q_mirror = config["observables"]["q_mirror"]
        plan.mirror = ProductTarget((label(q_mirror, 0.0),), _occupation(config))
    return plan


class _DensityCache:
    """Computes the one-body density once per recorded state."""

    def __init__(self, grid):
        self.grid = grid
        self._key = None
        self._record = None

    def __call__(self, state):
        key = (id(state), state.t)
        if key != self._key:
            self._record = DensityRecord.from_state(state, self.grid)
            self._key = key
        return self._record


def _needed(columns):
    """Requested columns plus the raw columns that derived ones are computed from."""
    return set(columns) | {NORM_DIVIDED[c][0] for c in columns if c in NORM_DIVIDED}


def _engine_observables(plan):
    cols = _needed(plan.config.columns)
    funcs = {}
    if "energy" in cols:
        funcs["energy"] = energy
    if "ccf" in cols:
        mirror = plan.mirror
        funcs["ccf"] = lambda st: cross_correlation(st, mirror)
    if "mean" in cols or "variance" in cols:
        density = _DensityCache(plan.grid)
        if "mean" in cols:
            funcs["mean"] = lambda st: density(st).mean
        if "variance" in cols:
            funcs["variance"] = lambda st: density(st).variance
    return funcs


def _select(series, columns):
    """Add the norm-divided columns, then keep the requested ones in request order."""
    add_norm_divided(series, [c for c in columns if c in NORM_DIVIDED])
    return TimeSeries(series.t, {c: series.columns[c] for c in columns}, series.metadata)


def save_checkpoint(path, state, config):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, z=state.z, D=state.D, S=state.S, t=np.array(state.t),
             config=np.array(json.dumps(config.to_dict(), sort_keys=True)),
             config_hash=np.array(config.digest()), code_version=np.array(__version__))
    return path


def load_checkpoint(path):
    """Return (config, z, D, S, t) from a checkpoint file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"checkpoint {path} does not exist")
    with np.load(path) as data:
        config = RunConfig.from_mapping(json.loads(str(data["config"])), str(path))
        return config, data["z"], data["D"], data["S"], float(data["t"])


def _write_spectrum(path, series):
    spec = ft_spectrum(series.t, series["ccf"])
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "magnitude"])
        writer.writerows([repr(float(w)), repr(float(m))]
                         for w, m in zip(spec.omega, spec.magnitude))
    return spec


def execute(plan, out_dir, restart=None, workers=None):
    """Run ``plan``, write artifacts into ``out_dir`` and return a :class:`RunResult`."""
    config = plan.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("ccsb")
    root.addHandler(handler)
    previous_level = root.level
    if previous_level == logging.NOTSET or previous_level > logging.INFO:
        root.setLevel(logging.INFO)
    meta = {
        "code_version": __version__,
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "application": config.application,
        "workers": workers,
    }
    started = time.perf_counter()
    try:
        result = _run(plan, out, restart, meta)
    except CCSBError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        result = RunResult(exc.exit_code, None, meta, None, exc)
        meta["error"] = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, NormGuardError) and exc.partial is not None:
            meta["norm_guard"] = {"t": exc.t, "norm": exc.norm}
            result.series = _select(exc.partial, config.columns)
    finally:
        root.removeHandler(handler)
        root.setLevel(previous_level)
        handler.close()
    meta["status"] = result.status
    meta["wall_seconds"] = time.perf_counter() - started
    if result.series is not None:
        result.series.metadata = {}
        result.series.write(out / "observables.csv", meta)
    else:
        (out / "observables.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    result.metadata = meta
    return result


def _run(plan, out, restart, meta):
    config = plan.config
    t_end = config["run"]["t_end"]
    record = config["propagator"]["record_every"]
    n_rec = int(round(t_end / record))
    if config.application == "oracle-app1":
        m = config["model"]
        t_grid = record * np.arange(n_rec + 1)
        res = exact_propagate_app1(m["M"], m["Omega"], config["oracle"]["L"], m["eta"],
                                   m["lambda"], t_grid, config["sampling"]["q0"],
                                   config["sampling"]["p0"], config["observables"]["q_mirror"])
        meta["oracle"] = res.series.metadata
        series = _select(res.series, config.columns)
        if "ccf" in series.columns and config["observables"]["spectrum"]:
            _write_spectrum(out / "spectrum.csv", series)
        return RunResult(0, series)
    if config.application == "oracle-app2":
        m = config["model"]
        t_grid = record * np.arange(n_rec + 1)
        res = exact_propagate_app2(m["N"], m["Omega"], m["xi"], m["lambda0"], t_grid,
                                   plan.grid, keep_rho=False)
        meta["oracle"] = res.series.metadata
        return RunResult(0, _select(res.series, config.columns))

    settings = config.propagator_settings()
    if restart is None:
        state, proj = initial_state(plan.model, plan.spec, settings.svd_cutoff,
                                    config["sampling"]["renormalize"])
        meta["projection"] = {"norm": proj.norm, "rank": proj.rank,
                              "condition": proj.condition, "fidelity": proj.fidelity}
        logger.info("projected initial state: norm %.6f, rank %d of %d, condition %.3e",
                    proj.norm, proj.rank, plan.spec.K, proj.condition)
    else:
        _, z, D, S, t0 = load_checkpoint(restart)
        state = WavefunctionState(plan.model, z, D, S, t0)
        meta["restart"] = {"from": str(restart), "t": t0}
        logger.info("restarting from %s at t=%.6g", restart, t0)

    every = config["run"]["checkpoint_every"]
    stride = None if every is None else int(round(every / record))
    counter = {"n": 0}

    def on_record(st):
        if stride and counter["n"] and counter["n"] % stride == 0:
            save_checkpoint(out / "checkpoints" / f"checkpoint_t{st.t:012.4f}.npz", st, config)
        counter["n"] += 1

    series, final = propagate(state, settings, t_end, _engine_observables(plan), on_record)
    meta["rhs_calls"] = series.metadata.get("rhs_calls")
    save_checkpoint(out / "checkpoints" / "final.npz", final, config)
    series = _select(series, config.columns)
    if config.application == "app1" and "ccf" in series.columns and config["observables"]["spectrum"]:
        _write_spectrum(out / "spectrum.csv", series)
    return RunResult(0, series, final_state=final)

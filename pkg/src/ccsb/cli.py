"""Command line: ``ccsb run``, ``ccsb compare``, ``ccsb tables``, ``ccsb presets``.

Exit codes: 0 success, 2 configuration error (nothing written), 3 norm guard
tripped (partial series written), 4 degenerate basis, 5 propagation error.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import RunConfig, parse_override, preset_names
from .errors import CCSBError, ConfigurationError
from .observables import chi_error, max_abs_difference
from .runner import execute, load_checkpoint, prepare
from .series import TimeSeries
from .tables import build_tables

OUTPUT_ROOT_ENV = "CCSB_OUTPUT_ROOT"


def available_workers():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _load_config(args):
    if args.restart:
        config, *_ = load_checkpoint(args.restart)
        if args.config or args.preset:
            raise ConfigurationError("--restart takes its configuration from the checkpoint")
    elif args.config and args.preset:
        raise ConfigurationError("give either a config file or --preset, not both")
    elif args.config:
        config = RunConfig.from_file(args.config)
    elif args.preset:
        config = RunConfig.preset(args.preset)
    else:
        raise ConfigurationError("need a config file, --preset or --restart")
    overrides = dict(parse_override(text) for text in args.set or ())
    if args.seed is not None:
        overrides[("sampling", "seed")] = args.seed
    if args.t_end is not None:
        overrides[("run", "t_end")] = args.t_end
    return config.with_overrides(overrides) if overrides else config


def _output_dir(args, config):
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "ccsb-runs"))
    return root / f"{config.name}-{config.digest()[:8]}"


def cmd_run(args):
    workers = args.workers or available_workers()
    if workers < 1:
        raise ConfigurationError("--workers must be at least 1")
    config = _load_config(args)
    plan = prepare(config)
    out = _output_dir(args, config)
    with threadpool_limits(limits=workers):
        result = execute(plan, out, restart=args.restart, workers=workers)
    if result.status == 0:
        print(f"{config.name}: finished, outputs in {out}")
    else:
        print(f"{config.name}: stopped with exit code {result.status}: {result.error}",
              file=sys.stderr)
    return result.status


def _series_path(path):
    path = Path(path)
    if path.is_dir():
        path = path / "observables.csv"
    if not path.is_file():
        raise ConfigurationError(f"no observables at {path}")
    return path


METRICS = {"chi": chi_error, "max-abs": max_abs_difference}


def compare_series(a, b, metric="chi", columns=None):
    """``{column: value}`` of ``metric`` between two :class:`TimeSeries`."""
    if metric not in METRICS:
        raise ConfigurationError(f"metric must be one of {', '.join(METRICS)}")
    if columns:
        missing = [c for c in columns if c not in a.columns or c not in b.columns]
        if missing:
            raise ConfigurationError(f"columns missing from one of the runs: {', '.join(missing)}")
    else:
        columns = [c for c in a.columns if c in b.columns]
        if not columns:
            raise ConfigurationError("the runs share no observable columns")
    fn = METRICS[metric]
    return {c: fn(a.t, a[c], b.t, b[c]) for c in columns}


def cmd_compare(args):
    a = TimeSeries.from_csv(_series_path(args.run_a))
    b = TimeSeries.from_csv(_series_path(args.run_b))
    columns = [c.strip() for c in args.columns.split(",")] if args.columns else None
    report = compare_series(a, b, args.metric, columns)
    for column, value in report.items():
        print(f"{column}\t{args.metric}\t{value!r}")
    if args.out:
        payload = {"run_a": str(args.run_a), "run_b": str(args.run_b), "metric": args.metric,
                   "values": report}
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_tables(args):
    tables = build_tables(args.Omega, even_only=args.even_only,
                          with_delta=False if args.no_delta else None)
    print(f"levels: {' '.join(str(int(v)) for v in tables.levels)}")
    print(f"epsilon: {' '.join(repr(float(v)) for v in tables.epsilon)}")
    print(f"Q nonzero: {int(np.count_nonzero(tables.Q))}  Q2 nonzero: {int(np.count_nonzero(tables.Q2))}")
    if tables.has_delta:
        print(f"delta canonical entries: {len(tables.delta_values)}")
    if args.out:
        arrays = {"levels": tables.levels, "epsilon": tables.epsilon, "Q": tables.Q,
                  "Q2": tables.Q2}
        if tables.has_delta:
            arrays.update(delta_index=tables.delta_index, delta_values=tables.delta_values)
        np.savez(args.out, **arrays)
        print(f"written to {args.out}")
    return 0


def cmd_presets(args):
    for name in preset_names():
        print(name)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ccsb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sample, propagate and record observables (or run an oracle)")
    run.add_argument("config", nargs="?", help="config .ini, or a run's observables.json")
    run.add_argument("--preset", help="named preset shipped with the package")
    run.add_argument("--seed", type=int, help="override [sampling] seed")
    run.add_argument("--t-end", type=float, help="override [run] t_end")
    run.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override any config value (repeatable)")
    run.add_argument("--out", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<name>-<hash>)")
    run.add_argument("--workers", type=int, help="BLAS threads (default: available cores)")
    run.add_argument("--restart", help="continue from a checkpoint .npz")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="compare observables of two runs")
    cmp_.add_argument("run_a")
    cmp_.add_argument("run_b")
    cmp_.add_argument("--metric", choices=sorted(METRICS), default="chi")
    cmp_.add_argument("--columns", help="comma-separated columns (default: all shared)")
    cmp_.add_argument("--out", help="write the report as JSON")
    cmp_.set_defaults(func=cmd_compare)

    tab = sub.add_parser("tables", help="dump matrix-element tables")
    tab.add_argument("--Omega", type=int, required=True)
    tab.add_argument("--even-only", action="store_true", help="levels 0, 2, ..., 2*Omega")
    tab.add_argument("--no-delta", action="store_true", help="skip the contact tensor")
    tab.add_argument("--out", help="write arrays to an .npz file")
    tab.set_defaults(func=cmd_tables)

    pre = sub.add_parser("presets", help="list shipped presets")
    pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    stream = logging.StreamHandler()
    stream.setLevel(logging.INFO if args.verbose else logging.WARNING)
    stream.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger("ccsb").addHandler(stream)
    try:
        return args.func(args)
    except CCSBError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    finally:
        logging.getLogger("ccsb").removeHandler(stream)


if __name__ == "__main__":
    sys.exit(main())

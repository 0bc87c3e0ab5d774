"""Command-line entry point: ``bench {run,pareto,elbow,gen-data}``.

Exit codes: 0 success, 2 configuration error, 3 I/O error. The worker pool
size for ``run`` comes from the FEDDP_BENCH_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..datagen import export_matrix
from ..dp import substream
from ..federated import FederatedRun, PrivacyUnit, estimate_clip_bounds
from ..feddp_init import CLIENT_PROPORTIONS, DATA_POINT_PROPORTIONS, InitBudget, server_radius
from .config import ConfigError, DataConfig, load_config
from .elbow import elbow_scan, locate_elbow
from .export import export_results, read_records, write_records
from .pareto import pareto_front
from .runner import build_dataset, run_experiment, workers_from_env

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class InputError(Exception):
    """Unreadable or malformed input/output files."""


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    try:
        workers = workers_from_env()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.data.kind == "import":
        try:
            build_dataset(cfg.data, cfg.seeds[0])
        except ValueError as exc:
            raise InputError(str(exc)) from None
    records = run_experiment(cfg, workers=workers)
    front = pareto_front(records)
    out = Path(args.out or cfg.output)
    paths = export_results(records, front, out, cfg.format, cfg)
    print(f"{len(records)} records, {len(front)} on the front -> {paths['records']}")
    return EXIT_OK


def _cmd_pareto(args) -> int:
    try:
        records = read_records(args.inp)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if not records:
        raise InputError(f"{args.inp}: no records")
    fmt = "json" if str(args.out).endswith(".json") else "csv"
    write_records(pareto_front(records), args.out, fmt)
    return EXIT_OK


def _cmd_elbow(args) -> int:
    cfg = load_config(args.config)
    rows = []
    for seed in cfg.seeds:
        ds = build_dataset(cfg.data, seed)
        run = FederatedRun(seed=seed, unit=cfg.unit, noise=cfg.noise)
        client = cfg.unit is PrivacyUnit.CLIENT
        budget = InitBudget.split(cfg.elbow_eps_init, cfg.delta,
                                  CLIENT_PROPORTIONS if client else DATA_POINT_PROPORTIONS)
        bounds = None
        if client:
            bounds = estimate_clip_bounds(ds.server, ds.partition.n // ds.partition.m, cfg.k_prime,
                                          server_radius(ds.server), run.rng("clip_bounds"))
        curve = elbow_scan(run, ds.server, ds.partition, cfg.k_prime, cfg.k_range, budget,
                           restarts=cfg.restarts, clip_bounds=bounds)
        elbow = locate_elbow(curve)
        rows.extend((seed, k, cost, elbow) for k, cost in curve)
        print(f"seed {seed}: elbow at k={elbow}")
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "elbow.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "k", "cost", "elbow"])
        for seed, k, cost, elbow in rows:
            writer.writerow([seed, k, repr(cost), elbow])
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    raw = Path(args.spec).read_bytes()
    try:
        spec = tomllib.loads(raw.decode())
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{args.spec}: {exc}") from None
    unknown = set(spec) - {"seed", "data"}
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    try:
        data = DataConfig(**spec.get("data", {}))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    if data.kind == "import":
        raise ConfigError("gen-data only generates synthetic data")
    ds = build_dataset(data, int(spec.get("seed", 0)))
    out = Path(args.out)
    fmt = "binary_f64" if out.suffix == ".bin" else "csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    export_matrix(ds.points, out, fmt)
    export_matrix(ds.server, out.with_name(f"{out.stem}_server{out.suffix}"), fmt)
    with out.with_name(f"{out.stem}_labels.csv").open("w", newline="") as fh:
        fh.writelines(f"{int(lbl)}\n" for lbl in ds.labels)
    print(f"wrote {len(ds.points)} points and {len(ds.server)} server points to {out.parent}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment grid and export records")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (defaults to the config's output)")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("pareto", help="extract the Pareto front of a records file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pareto)
    p = sub.add_parser("elbow", help="proxy cost curve over k and its elbow")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_elbow)
    p = sub.add_parser("gen-data", help="write a synthetic dataset to disk")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_data)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, InputError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``csmmwave {sweep-measurements,sweep-coherence,find-m-eps,trial}``.

Exit codes: 0 success, 1 configuration error, 2 runtime or dimension error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import replace
from typing import Optional, Sequence, TextIO

from . import __version__
from .config import ConfigError, load_config, parse_points, to_flat
from .sim import (
    CoherenceSweep,
    ExperimentConfig,
    MEpsilonNotFound,
    MeasurementSweep,
    SweepTable,
    find_m_epsilon,
    run_trial,
    sweep_coherence,
    sweep_measurements,
)

log = logging.getLogger("csmmwave")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_preamble(out: TextIO, config: ExperimentConfig, command: str, metadata: Optional[dict] = None):
    out.write(f"# csmmwave v{__version__}\n")
    out.write(f"# command = {command}\n")
    out.write(f"# seed = {config.master_seed}\n")
    for key, value in to_flat(config).items():
        out.write(f"# {key} = {value}\n")
    for key, value in (metadata or {}).items():
        if isinstance(value, (list, tuple)):
            value = ",".join(format_value(v) for v in value)
        out.write(f"# meta.{key} = {format_value(value)}\n")


def write_table(out: TextIO, table: SweepTable, config: ExperimentConfig, command: str):
    write_preamble(out, config, command, table.metadata)
    writer = csv.writer(out, lineterminator="\n")
    columns = table.columns()
    writer.writerow(columns)
    for row in table.rows:
        writer.writerow([format_value(getattr(row, c)) for c in columns])


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _parse_list(text: str, cast=float) -> list:
    return [cast(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value experiment file")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed")
    common.add_argument("--trials", type=int, metavar="N", help="Monte Carlo trials per point")
    common.add_argument("--out", metavar="PATH", help="output file (default stdout)")
    common.add_argument("--rate-mode", choices=["sinr", "indicator"])
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker processes")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="csmmwave", description="Monte Carlo simulator for compressed-sensing mmWave multi-user training.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-measurements", parents=[common], help="rate versus number of measurements")
    p.add_argument("--measurements", help="comma list of budgets or M_BSxM_MS pairs")

    p = sub.add_parser("sweep-coherence", parents=[common], help="effective rate versus coherence length")
    p.add_argument("--coherence", help="comma list of coherence lengths in symbols")
    p.add_argument("--measurements", help="comma list of budgets or M_BSxM_MS pairs")
    p.add_argument("--epsilon", type=float)

    p = sub.add_parser("find-m-eps", parents=[common], help="smallest budget reaching 1 - eps recovery")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--measurements", help="ascending comma list of budgets")
    p.add_argument("--wilson", action="store_true", help="require the Wilson lower limit to reach the target")

    p = sub.add_parser("trial", parents=[common], help="dump a single trial as JSON")
    p.add_argument("--index", type=int, default=0, help="trial index")
    p.add_argument("--measurements", type=int, help="total measurement budget")
    return parser


def _overrides(args) -> dict:
    values = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = value.strip()
    if args.seed is not None:
        values["master_seed"] = args.seed
    if args.trials is not None:
        values["n_trials"] = args.trials
    if args.rate_mode is not None:
        values["rate_mode"] = args.rate_mode
    if args.command == "sweep-coherence":
        values["sweep"] = "coherence"
        if args.coherence:
            values["coherence_lengths"] = args.coherence
        if args.measurements:
            values["coherence_measurements"] = args.measurements
        if args.epsilon is not None:
            values["epsilon"] = args.epsilon
    elif args.command == "sweep-measurements" and args.measurements:
        values["sweep"] = "measurements"
        values["measurements"] = args.measurements
    elif args.command == "trial" and args.measurements:
        values["m_total"] = args.measurements
    return values


def _trial_dump(config: ExperimentConfig, index: int) -> dict:
    result = run_trial(config, index)
    users = []
    for u, (real, est) in enumerate(zip(result.channels, result.estimates)):
        users.append(
            {
                "user": u,
                "gain": [real.gain.real, real.gain.imag],
                "aoa": real.aoa,
                "aod": real.aod,
                "aoa_index": real.aoa_grid_index,
                "aod_index": real.aod_grid_index,
                "est_aoa_index": est.aoa_index,
                "est_aod_index": est.aod_index,
                "est_gain": [est.atoms[0].gain_estimate.real, est.atoms[0].gain_estimate.imag],
                "residual_norm": est.residual_norm,
                "success": result.per_user_success[u],
                "rate": result.per_user_rate[u],
                "perfect_csi_rate": result.per_user_perfect_rate[u],
                "single_user_rate": result.per_user_single_rate[u],
            }
        )
    return {
        "version": __version__,
        "master_seed": config.master_seed,
        "trial_index": index,
        "m_bs": config.training.m_bs,
        "m_ms": config.training.m_ms,
        "training_symbols": result.training_symbols,
        "users": users,
    }


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config, _overrides(args))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "sweep-measurements":
            if not isinstance(config.sweep, MeasurementSweep):
                config = replace(config, sweep=MeasurementSweep(config.sweep.points))
            table = sweep_measurements(config, threads=args.threads)
            with _output(args.out) as out:
                write_table(out, table, config, args.command)
        elif args.command == "sweep-coherence":
            assert isinstance(config.sweep, CoherenceSweep)
            table = sweep_coherence(config, threads=args.threads)
            with _output(args.out) as out:
                write_table(out, table, config, args.command)
        elif args.command == "find-m-eps":
            n_bs, n_ms = config.channel.bs_geometry.n_antennas, config.channel.ms_geometry.n_antennas
            grid = [p.requested for p in (parse_points(args.measurements, n_bs, n_ms) if args.measurements else config.sweep.points)]
            try:
                result = find_m_epsilon(config, args.epsilon, grid, use_lower_bound=args.wilson, threads=args.threads)
                curve, m_eps, status = result.curve, result.m_eps, 0
            except MEpsilonNotFound as exc:
                curve, m_eps, status = exc.curve, None, EXIT_RUNTIME
                print(f"error: {exc}", file=sys.stderr)
            with _output(args.out) as out:
                write_preamble(out, config, args.command, {"epsilon": args.epsilon, "m_eps": m_eps})
                writer = csv.writer(out, lineterminator="\n")
                writer.writerow(["m_requested", "m_bs", "m_ms", "training_symbols", "p_hat", "p_wilson_low", "p_wilson_high", "n_trials"])
                for m, est in curve:
                    writer.writerow([m, est.m_bs, est.m_ms, est.training_symbols] + [format_value(v) for v in (est.p_hat, est.wilson_low, est.wilson_high)] + [config.n_trials])
            return status
        else:
            with _output(args.out) as out:
                json.dump(_trial_dump(config, args.index), out, indent=2)
                out.write("\n")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

"""
cli.py — Command-line front end
===============================

    dualband-memory [global options] simulate
    dualband-memory [global options] analyze --sweep omega=1:10:10 [--sweep ...]
    dualband-memory [global options] figures 2a [--from-csv PATH]
    dualband-memory [global options] validate [--fast]

Exit codes: 0 success, 1 configuration / domain / validity error,
2 numerical failure, 3 validation failure.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import apply_overrides, default_config, dumps_config, load_config, RunConfig
from .errors import (ConfigurationError, DomainError, NumericalFailure, OracleFailure,
                     SimulationError, ValidityError)
from .oracles import format_report, run_validation
from .output import (plot_panel, read_timeseries, timeseries_columns, write_manifest,
                     write_metrics, write_rows, write_timeseries)
from .polariton import SWEEP_PARAMETERS, sweep
from .protocol import PRESETS
from .simulation import polariton_params, run_scenario

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
PANELS = ("2a", "2b", "2c", "3a", "3b", "3c")
TWO_PI_MHZ = 2 * math.pi * 1e6

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_ORACLE = 3


@dataclass
class OutputBundle:
    """Paths written by one command."""
    csv: str = None
    metrics: str = None
    manifest: str = None
    plots: list = field(default_factory=list)


def configure_logging(verbose=False, log_file=None):
    """INFO (DEBUG with verbose) to stderr, mirrored to ``log_file`` when given."""
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format=LOG_FORMAT, handlers=handlers, force=True)


def panel_preset(panel):
    """
    Preset name of a figure panel ("2a" or "fig2a").

    Example:
        >>> panel_preset("3b")
        'fig3b'
    """
    name = panel if panel.startswith("fig") else f"fig{panel}"
    if name not in PRESETS:
        raise ConfigurationError(f"unknown panel {panel!r}; choose from {', '.join(PANELS)}",
                                 key="panel")
    return name


def parse_sweep(text):
    """
    Parse ``name=start:stop:num`` (MHz) into (name, values in rad/s).

    Example:
        >>> name, values = parse_sweep("omega=0:10:3")
        >>> name, [round(v / TWO_PI_MHZ, 6) for v in values]
        ('omega', [0.0, 5.0, 10.0])
    """
    try:
        name, spec = text.split("=", 1)
        start, stop, num = spec.split(":")
        start, stop, num = float(start), float(stop), int(num)
    except ValueError as exc:
        raise ConfigurationError(f"expected name=start:stop:num, got {text!r}",
                                 key="--sweep") from exc
    name = name.strip()
    if name not in SWEEP_PARAMETERS:
        raise ConfigurationError(f"cannot sweep {name!r}; choose from "
                                 f"{', '.join(SWEEP_PARAMETERS)}", key="--sweep")
    if num < 1 or not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigurationError(f"invalid range {spec!r}", key="--sweep")
    return name, np.linspace(start, stop, num) * TWO_PI_MHZ


def resolve_config(args):
    """Boundary config from --config plus flag overrides, validated into a RunConfig."""
    raw = load_config(args.config) if args.config else default_config()
    raw = apply_overrides(raw, samples=args.samples, grid=args.grid, rel_tol=args.rel_tol,
                          workers=args.workers, preset=args.preset,
                          dt_max_us=args.dt_max_us)
    if args.out:
        raw["output"]["directory"] = args.out
    return RunConfig.from_dict(raw)


def _failure_record(exc):
    return {"error": type(exc).__name__, "message": str(exc),
            "tau_s": exc.tau, "dt_s": exc.dt, "index": exc.index}


def _run(cfg, stem, plot_name=None):
    """Run the configured scenario and write its bundle under cfg.output_dir."""
    out = cfg.output_dir
    bundle = OutputBundle(csv=os.path.join(out, f"{stem}.csv"),
                          metrics=os.path.join(out, f"{stem}.metrics.json"),
                          manifest=os.path.join(out, f"{stem}.manifest.json"))
    try:
        result = run_scenario(cfg)
    except NumericalFailure as exc:
        if exc.partial is not None:
            write_timeseries(bundle.csv, exc.partial)
            logger.error("partial time series (%d samples) written to %s",
                         len(exc.partial), bundle.csv)
        write_manifest(bundle.manifest, cfg.raw, failure=_failure_record(exc))
        raise
    ts = result.timeseries
    write_timeseries(bundle.csv, ts)
    write_metrics(bundle.metrics, result.metrics,
                  extra={"scenario": result.scenario.name, "steps": ts.steps})
    write_manifest(bundle.manifest, cfg.raw)
    if cfg.plots:
        name = plot_name or result.scenario.name
        path = os.path.join(out, f"{name}.svg")
        plot_panel(path, timeseries_columns(ts), title=name)
        bundle.plots.append(path)
    return bundle


def cmd_simulate(cfg):
    """
    Run the configured scenario.

    Writes ``simulation.csv``, ``simulation.metrics.json``,
    ``simulation.manifest.json`` and, when plots are enabled, ``<preset>.svg``.
    """
    bundle = _run(cfg, "simulation")
    logger.info("simulation written to %s", cfg.output_dir)
    return bundle


def cmd_analyze(cfg, sweeps):
    """
    Polariton-theory sweep around the configured parameters.

    Args:
        cfg (RunConfig): Base configuration.
        sweeps (Sequence[str]): ``name=start:stop:num`` ranges (MHz).

    Returns:
        OutputBundle: ``analysis.csv`` with one row per grid point.
    """
    ranges = dict(parse_sweep(s) for s in sweeps)
    base = polariton_params(cfg)
    rows = sweep(base, ranges, workers=cfg.workers)
    header = [f"{name}_MHz" for name in ranges] + ["darkness", "omega_mode_MHz", "v_g_m_s",
                                                   "overlap"]
    table = [[row[name] / TWO_PI_MHZ for name in ranges]
             + [row["darkness"], row["omega_mode"] / TWO_PI_MHZ, row["v_g"], row["overlap"]]
             for row in rows]
    path = os.path.join(cfg.output_dir, "analysis.csv")
    write_rows(path, header, table)
    write_manifest(os.path.join(cfg.output_dir, "analysis.manifest.json"), cfg.raw)
    return OutputBundle(csv=path, manifest=os.path.join(cfg.output_dir, "analysis.manifest.json"))


def cmd_figures(cfg, panel, from_csv=None):
    """
    Render one figure panel, simulating it unless ``from_csv`` is given.

    Files are named after the preset (``fig2a.csv``, ``fig2a.svg``, ...).
    """
    preset = panel_preset(panel)
    if from_csv:
        path = os.path.join(cfg.output_dir, f"{preset}.svg")
        plot_panel(path, read_timeseries(from_csv), title=preset)
        return OutputBundle(csv=from_csv, plots=[path])
    if cfg.scenario.name != preset:
        raw = apply_overrides(cfg.raw, preset=preset)
        cfg = RunConfig.from_dict(raw)
    cfg = _with_plots(cfg)
    return _run(cfg, preset, plot_name=preset)


def _with_plots(cfg):
    if cfg.plots:
        return cfg
    raw = dict(cfg.raw)
    raw["output"] = dict(raw["output"], plots=True)
    return RunConfig.from_dict(raw)


def cmd_validate(cfg, fast=False):
    """
    Run the validation suite and print its table.

    Raises:
        OracleFailure: If any check fails; ``report`` holds the results.
    """
    results = run_validation(cfg, fast=fast)
    report = format_report(results)
    print(report)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise OracleFailure(f"{len(failed)} check(s) failed: {', '.join(failed)}", report=results)
    return results


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dualband-memory",
        description="Dual-wavelength dark-state-polariton memory simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON configuration or run manifest")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default configuration and exit")
    parser.add_argument("--samples", type=int, help="points of the output time grid")
    parser.add_argument("--grid", type=int, help="spatial grid points")
    parser.add_argument("--rel-tol", type=float, help="relative tolerance of the step control")
    parser.add_argument("--dt-max-us", type=float,
                        help="largest global step in us; sets the run time (default 2e-3)")
    parser.add_argument("--workers", type=int, help="threads for the atomic step and sweeps")
    parser.add_argument("--preset", help="scenario preset (fig2a ... fig3c)")
    parser.add_argument("-v", "--verbose", action="store_true", help="per-step DEBUG logging")
    parser.add_argument("--log-file", help="also write the log to this file")

    sub = parser.add_subparsers(dest="command")
    sub.add_parser("simulate", help="run the configured scenario")
    analyze = sub.add_parser("analyze", help="polariton-theory parameter sweep")
    analyze.add_argument("--sweep", action="append", default=[], metavar="NAME=START:STOP:NUM",
                         help=f"range in MHz; NAME in {', '.join(SWEEP_PARAMETERS)}")
    figures = sub.add_parser("figures", help="simulate and plot one figure panel")
    figures.add_argument("panel", choices=PANELS + tuple(f"fig{p}" for p in PANELS))
    figures.add_argument("--from-csv", help="re-plot an existing simulate CSV")
    validate = sub.add_parser("validate", help="run the validation suite")
    validate.add_argument("--fast", action="store_true",
                          help="skip the co-simulation checks")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.log_file)

    if args.print_default_config:
        sys.stdout.write(dumps_config(default_config()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_INVALID

    try:
        cfg = resolve_config(args)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "analyze":
            if not args.sweep:
                raise ConfigurationError("at least one range is required", key="--sweep")
            cmd_analyze(cfg, args.sweep)
        elif args.command == "figures":
            cmd_figures(cfg, args.panel, args.from_csv)
        elif args.command == "validate":
            cmd_validate(cfg, fast=args.fast)
    except (ConfigurationError, DomainError, ValidityError) as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except NumericalFailure as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OracleFailure as exc:
        logger.error("%s", exc)
        return EXIT_ORACLE
    except SimulationError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    return EXIT_OK


__all__ = [
    "OutputBundle", "configure_logging", "panel_preset", "parse_sweep", "resolve_config",
    "cmd_simulate", "cmd_analyze", "cmd_figures", "cmd_validate", "build_parser", "main",
]

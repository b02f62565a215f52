# -*- coding: utf-8 -*-
# Copyright © 2024 The stealthkey developers. All rights reserved.
# This file is part of the stealthkey project. See LICENSE in the root
# directory for licensing information.

"""The ``stealthkey`` experiment runner.

Every subcommand resolves an :py:class:`ExperimentConfig` from built-in
defaults, an optional JSON file given with ``--config``, and command-line
flags, in increasing order of precedence. The resolved configuration is
echoed under ``"config"`` in JSON output.

Exit codes are 0 on success, 1 for invalid input, 2 when a guard or a
required property refuses the request, and 3 for numeric failures.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from collections import OrderedDict

import numpy as np

from stealthkey import StealthKeyException, __version__
from stealthkey.bounds import (BudgetParams, NotMarkovError, key_schedule,
                               sk_bounds)
from stealthkey.degrade import (LP_TOL, MARKOV_TOL, ORDER_QUANTILES,
                                TAIL_MASS, DegenerateMarginalError,
                                GridMismatchError, OrderViolationError,
                                classify, order_grid, order_violation)
from stealthkey.probcore import DistributionError, SizeGuardError, load
from stealthkey.protocol import (DEFAULT_DELTA, SWEEP_FIELDS, CodebookError,
                                 GuardExceededError, Sweep)
from stealthkey.sources import (DEFAULT_BINS, SatelliteSpec, bsc_cascade,
                                gaussian_quantizer, parse_fade, quantize,
                                quantize_batches, satellite_sample,
                                write_csv)
from stealthkey.special import NakagamiSpec, SpecialFunctionError


log = logging.getLogger(__name__)


LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_REFUSED = 2
EXIT_NUMERIC = 3


class ConfigError(StealthKeyException):
    """Raised for missing, malformed, or out-of-range settings."""


DEFAULTS = {
    "bounds": {"dist": None},
    "degrade": {"dist": None, "tol": LP_TOL, "markov_tol": MARKOV_TOL},
    "order": {"mx": 1.0, "wx": 3.0, "mz": 1.0, "wz": 2.0,
              "grid": ORDER_QUANTILES, "tail": TAIL_MASS},
    "satellite": {"source_variance": 1.0, "fade_x": "nakagami:1,3",
                  "fade_z": "nakagami:1,2", "n": 10 ** 6,
                  "bins": DEFAULT_BINS, "batches": 10, "samples_out": None},
    "simulate": {"dist": None, "cascade": [0.1, 0.2], "ns": [2],
                 "rate": 0.125, "rate1s": None, "r1_offsets": [0.25],
                 "codebooks": 1, "mode": "auto", "trials": 10000,
                 "delta": DEFAULT_DELTA, "workers": None, "csv": None},
    "budget": {"dz": None, "dy": None, "xi": None, "n": None,
               "omega": None, "dist": None, "per_block": False},
}

GLOBAL_DEFAULTS = {"seed": 0, "format": "json", "output": None}


class ExperimentConfig:
    """Resolved settings of one subcommand.

    :ivar command:
        The subcommand name.

    :ivar values:
        Settings keyed by their snake_case names, including ``seed``,
        ``format`` and ``output``.
    """

    def __init__(self, command, values):
        self.command = command
        self.values = values

    @classmethod
    def resolve(cls, command, file_values=None, flag_values=None):
        """Merge defaults, then ``file_values``, then ``flag_values``.

        A config file may hold settings at the top level or in a section
        named after the subcommand; the section wins.

        :raises ConfigError:
            For unknown settings.
        """
        values = dict(GLOBAL_DEFAULTS)
        values.update(DEFAULTS[command])
        known = set(values)
        layers = []
        if file_values:
            if not isinstance(file_values, dict):
                raise ConfigError("Config file must hold a JSON object")

            section = file_values.get(command, {})
            top = {key: value for key, value in file_values.items()
                   if key not in DEFAULTS}
            layers.extend([top, section])

        layers.append(flag_values or {})
        for layer in layers:
            unknown = set(layer) - known
            if unknown:
                raise ConfigError("Unknown setting(s) for {}: {}".format(
                    command, ", ".join(sorted(unknown))))

            values.update(layer)

        config = cls(command, values)
        config.validate()
        return config

    def __getitem__(self, key):
        return self.values[key]

    def require(self, *keys):
        missing = [key for key in keys if self.values.get(key) is None]
        if missing:
            raise ConfigError("{} needs {}".format(self.command,
                                                   ", ".join(missing)))

    def _number(self, key, kind=float, low=None, strict=False):
        value = self.values.get(key)
        if value is None:
            return

        try:
            value = kind(value)
        except (TypeError, ValueError):
            raise ConfigError("{} must be a number, got {!r}".format(
                key, value)) from None

        if kind is float and not math.isfinite(value):
            raise ConfigError("{} must be finite".format(key))

        if low is not None and (value < low or (strict and value == low)):
            raise ConfigError("{} must be {} {}, got {!r}".format(
                key, ">" if strict else ">=", low, value))

        self.values[key] = value

    def validate(self):
        """Check every setting against its module's preconditions."""
        self._number("seed", int, 0)
        if self["format"] not in ("json", "csv"):
            raise ConfigError("format must be json or csv")

        check = getattr(self, "_validate_" + self.command)
        check()

    def _validate_bounds(self):
        self.require("dist")

    def _validate_degrade(self):
        self.require("dist")
        self._number("tol", float, 0.0)
        self._number("markov_tol", float, 0.0)

    def _validate_order(self):
        for key in ("mx", "wx", "mz", "wz", "tail"):
            self._number(key, float, 0.0, True)

        self._number("grid", int, 2)

    def _validate_satellite(self):
        self._number("source_variance", float, 0.0, True)
        self._number("n", int, 1)
        self._number("bins", int, 2)
        self._number("batches", int, 1)

    def _validate_simulate(self):
        for key in ("rate", "delta"):
            self._number(key, float, 0.0, key == "delta")

        for key in ("codebooks", "trials"):
            self._number(key, int, 1)

        self._number("workers", int, 1)
        if self["mode"] not in ("auto", "exact", "mc"):
            raise ConfigError("mode must be auto, exact or mc")

        if not self["ns"] or any(int(n) < 1 for n in self["ns"]):
            raise ConfigError("ns must list blocklengths of at least 1")

        if self["rate1s"] is not None and any(r < 0 for r in self["rate1s"]):
            raise ConfigError("rate1s must be nonnegative")

        if self["dist"] is None and len(self["cascade"]) != 2:
            raise ConfigError("cascade must be [p, q]")

    def _validate_budget(self):
        self.require("dz", "dy", "xi", "n", "omega")
        self._number("dz", float, 0.0)
        self._number("dy", float, 0.0)
        self._number("xi", float)
        if not 0.0 < self["xi"] < 1.0:
            raise ConfigError("xi must lie in (0, 1)")

        self._number("n", int, 1)
        self._number("omega", float, 0.0, True)

    def to_dict(self):
        return dict(self.values, command=self.command)


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers, "
                                         "got {!r}".format(text)) from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers, "
                                         "got {!r}".format(text)) from None


def build_parser():
    """The argument parser. Subcommand options default to
    :py:data:`argparse.SUPPRESS` so that only given flags override the
    config file."""
    common = argparse.ArgumentParser(add_help=False,
                                     argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file of settings")
    common.add_argument("--seed", type=int, help="global seed (default 0)")
    common.add_argument("--format", choices=["json", "csv"],
                        help="output format (default json)")
    common.add_argument("-o", "--output", help="write output here, not to "
                                               "stdout")

    parser = argparse.ArgumentParser(
        prog="stealthkey",
        description="Bounds, degradedness checks and simulations for "
                    "stealthy secret key generation.")
    parser.add_argument("--version", action="version",
                        version="%(prog)s " + __version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true",
                           help="log debug messages")
    verbosity.add_argument("-q", "--quiet", action="store_true",
                           help="log errors only")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    def add(name, help_text):
        return commands.add_parser(name, parents=[common], help=help_text,
                                   argument_default=argparse.SUPPRESS)

    sub = add("bounds", "capacity bounds of a source")
    sub.add_argument("dist", help="JointDist3 JSON file")

    sub = add("degrade", "classify a source's degradedness")
    sub.add_argument("dist", help="JointDist3 JSON file")
    sub.add_argument("--tol", type=float, help="LP residual tolerance")
    sub.add_argument("--markov-tol", dest="markov_tol", type=float,
                     help="I(X;Z|Y) tolerance")

    sub = add("order", "usual stochastic order of Nakagami fading powers")
    for name, what in (("mx", "Alice's shape"), ("wx", "Alice's spread"),
                       ("mz", "Willie's shape"), ("wz", "Willie's spread")):
        sub.add_argument("--" + name, type=float, help=what)

    sub.add_argument("--grid", type=int, help="quantile points in the grid")
    sub.add_argument("--tail", type=float, help="tail mass of the far point")

    sub = add("satellite", "plug-in bounds of the fading satellite model")
    sub.add_argument("--source-variance", dest="source_variance",
                     type=float)
    sub.add_argument("--fade-x", dest="fade_x",
                     help="nakagami:m,w or const:a")
    sub.add_argument("--fade-z", dest="fade_z",
                     help="nakagami:m,w or const:a")
    sub.add_argument("--n", type=int, help="number of samples")
    sub.add_argument("--bins", type=int, help="bins per coordinate")
    sub.add_argument("--batches", type=int,
                     help="batches for the batch-means error")
    sub.add_argument("--samples-out", dest="samples_out",
                     help="write the raw samples as CSV")

    sub = add("simulate", "simulate key generation over random codebooks")
    sub.add_argument("--dist", help="JointDist3 JSON file (default: the "
                                    "binary cascade)")
    sub.add_argument("--cascade", type=_float_list, help="p,q of the "
                                                         "binary cascade")
    sub.add_argument("--ns", type=_int_list, help="blocklengths")
    sub.add_argument("--rate", type=float, help="key rate R")
    sub.add_argument("--rate1s", type=_float_list,
                     help="confusion rates R1")
    sub.add_argument("--r1-offsets", dest="r1_offsets", type=_float_list,
                     help="confusion rates as offsets from the threshold")
    sub.add_argument("--codebooks", type=int, help="codebooks per point")
    sub.add_argument("--mode", choices=["auto", "exact", "mc"])
    sub.add_argument("--trials", type=int, help="Monte Carlo trials")
    sub.add_argument("--delta", type=float, help="typicality delta")
    sub.add_argument("--workers", type=int, help="enumeration threads")
    sub.add_argument("--csv", help="write the sweep table here as it runs")

    sub = add("budget", "key budget of covert communication")
    sub.add_argument("--dz", type=float, help="D(P_Z||Q_Z) in bits")
    sub.add_argument("--dy", type=float, help="D(P_Y||Q_Y) in bits")
    sub.add_argument("--xi", type=float, help="slack in (0, 1)")
    sub.add_argument("--n", type=int, help="blocklength")
    sub.add_argument("--omega", type=float, help="omega_n")
    sub.add_argument("--dist", help="source to generate the keys from")
    sub.add_argument("--per-block", dest="per_block", action="store_true",
                     help="spend one phase-one bit per block")
    return parser


def _read_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise ConfigError("Cannot read config {}: {}".format(
            path, e.strerror)) from None
    except json.JSONDecodeError as e:
        raise ConfigError("{}: line {}, column {}: {}".format(
            path, e.lineno, e.colno, e.msg)) from None


def cmd_bounds(config):
    return sk_bounds(load(config["dist"])).to_dict()


def cmd_degrade(config):
    verdict = classify(load(config["dist"]), config["markov_tol"],
                       config["tol"])
    return verdict.to_dict()


def cmd_order(config):
    spec_x = NakagamiSpec(config["mx"], config["wx"])
    spec_z = NakagamiSpec(config["mz"], config["wz"])
    grid = order_grid(spec_x, spec_z, config["grid"], config["tail"])
    point = order_violation(spec_x, spec_z, grid)
    return OrderedDict([("ordered", point is None), ("violation", point),
                        ("gridPoints", len(grid))])


def _batch_errors(batches):
    if len(batches) < 2:
        return None

    records = [sk_bounds(joint).to_dict() for joint in batches]
    return {key: float(np.std([r[key] for r in records], ddof=1) /
                       math.sqrt(len(records)))
            for key in records[0] if key != "achievable"}


def cmd_satellite(config):
    spec = SatelliteSpec(config["source_variance"],
                         parse_fade(config["fade_x"]),
                         parse_fade(config["fade_z"]))
    samples = satellite_sample(spec, config["n"], config["seed"])
    if config["samples_out"]:
        write_csv(samples, config["samples_out"])
        log.info("Wrote %d samples to %s", samples.n, config["samples_out"])

    quantizer = gaussian_quantizer(samples, config["bins"])
    bounds = sk_bounds(quantize(samples, quantizer))
    batches = quantize_batches(samples, quantizer,
                               min(config["batches"], samples.n))
    return OrderedDict([("spec", spec.to_dict()), ("samples", samples.n),
                        ("bins", config["bins"]),
                        ("bounds", bounds.to_dict()),
                        ("stderr", _batch_errors(batches)),
                        ("pluginEstimates", True)])


class _SweepCsv:
    """Slot writing each finished sweep row to an open CSV file."""

    def __init__(self, f):
        self.writer = csv.DictWriter(f, fieldnames=SWEEP_FIELDS)
        self.writer.writeheader()
        self.file = f

    def __call__(self, sender, done, total, row):
        # pylint: disable=unused-argument
        self.writer.writerow(row.to_dict())
        self.file.flush()


def _log_progress(sender, done, total, row):
    # pylint: disable=unused-argument
    log.info("[%d/%d] n=%d R1=%.4g codebook %d (%s): pe=%.4g eff=%.4g",
             done, total, row.n, row.rate1, row.codebook, row.mode, row.pe,
             row.eff_secrecy)


def _summarize(rows):
    groups = OrderedDict()
    for row in rows:
        groups.setdefault((row.n, row.rate1), []).append(row)

    return [OrderedDict([("n", n), ("R1", rate1),
                         ("codebooks", len(group)),
                         ("meanPe", float(np.mean([r.pe for r in group]))),
                         ("meanEffSecrecyPerSymbol", float(np.mean(
                             [r.eff_secrecy_per_symbol for r in group])))])
            for (n, rate1), group in groups.items()]


def cmd_simulate(config):
    if config["dist"] is not None:
        joint = load(config["dist"])
    else:
        joint = bsc_cascade(*config["cascade"])

    kwargs = {"codebooks": config["codebooks"], "mode": config["mode"],
              "trials": config["trials"], "delta": config["delta"],
              "seed": config["seed"], "workers": config["workers"]}
    ns = [int(n) for n in config["ns"]]
    if config["rate1s"] is not None:
        sweep = Sweep(joint, ns, config["rate"], config["rate1s"], **kwargs)
    else:
        sweep = Sweep.around_threshold(joint, ns, config["rate"],
                                       config["r1_offsets"], **kwargs)

    sweep.progress.add(_log_progress)
    sweep.mode_switched.add(lambda sender, spec, mode: log.info(
        "n=%d runs in %s mode", spec.n, mode))
    if config["csv"]:
        with open(config["csv"], "w", newline="", encoding="utf-8") as f:
            sweep.progress.add(_SweepCsv(f))
            rows = sweep.run()
    else:
        rows = sweep.run()

    return OrderedDict([("rows", [row.to_dict() for row in rows]),
                        ("summary", _summarize(rows))])


def cmd_budget(config):
    params = BudgetParams(config["n"], config["xi"], config["omega"])
    joint = load(config["dist"]) if config["dist"] else None
    schedule = key_schedule(joint, params, config["dz"], config["dy"],
                            config["per_block"])
    result = schedule.to_dict()
    result["params"] = params.to_dict()
    return result


COMMANDS = {"bounds": cmd_bounds, "degrade": cmd_degrade, "order": cmd_order,
            "satellite": cmd_satellite, "simulate": cmd_simulate,
            "budget": cmd_budget}


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()

    if isinstance(value, np.ndarray):
        return value.tolist()

    raise TypeError("Not serializable: {!r}".format(type(value).__name__))


def _flatten(result, prefix=""):
    flat = OrderedDict()
    for key, value in result.items():
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix + key + "."))
        elif not isinstance(value, list):
            flat[prefix + key] = value

    return flat


def render(command, config, result):
    """Format a result for output.

    CSV output of ``simulate`` is the sweep table; every other command
    gives a single header and row.
    """
    if config["format"] == "json":
        return json.dumps(OrderedDict([("command", command),
                                       ("config", config.to_dict()),
                                       ("result", result)]),
                          indent=2, default=_jsonable) + "\n"

    if command == "simulate":
        rows = result["rows"]
        fields = SWEEP_FIELDS
    else:
        rows = [_flatten(result)]
        fields = list(rows[0])

    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return out.getvalue()


def exit_code(exc):
    """The process exit status for a stealthkey exception."""
    if isinstance(exc, (GuardExceededError, SizeGuardError, NotMarkovError,
                        OrderViolationError)):
        return EXIT_REFUSED

    if isinstance(exc, (DistributionError, SpecialFunctionError, ConfigError,
                        DegenerateMarginalError, GridMismatchError,
                        CodebookError)):
        return EXIT_INVALID

    # Solver failures, inconsistent bounds and anything unforeseen.
    return EXIT_NUMERIC


def configure_logging(verbose=False, quiet=False):
    level = logging.WARNING
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.ERROR

    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def main(argv=None):
    """Run the command line; returns the exit status."""
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    configure_logging(args.pop("verbose"), args.pop("quiet"))
    config_path = args.pop("config", None)

    try:
        file_values = _read_config(config_path) if config_path else None
        config = ExperimentConfig.resolve(command, file_values, args)
        log.debug("Resolved config: %r", config.values)
        text = render(command, config, COMMANDS[command](config))
        if config["output"]:
            with open(config["output"], "w", encoding="utf-8") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
    except StealthKeyException as e:
        log.error("%s: %s", type(e).__name__, e)
        return exit_code(e)
    except OSError as e:
        log.error("%s: %s", e.filename or "I/O error", e.strerror)
        return EXIT_INVALID

    return EXIT_OK

"""
tanglegame.py
Tangle simulation and attachment game

Experiment driver: configuration parsing and the command line.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from tanglegame.analysis.equilibrium import SweepError, analyse, equilibrium_frame, sweep
from tanglegame.analysis.metrics import approval_cdf, cost_frame, little_check
from tanglegame.io import write_dot, write_frame, write_manifest, write_sim_output
from tanglegame.simulation.config import SimConfig
from tanglegame.simulation.simulator import SimulationError, run, run_replicas

logger = logging.getLogger(__name__)

MODES = ("single", "sweep", "cdf", "little")
REQUIRED = ("lambda", "q", "h", "alpha", "M0", "T_end")
DEFAULT_P_GRID = (0.0,) + tuple(float(p) for p in np.linspace(0.02, 0.5, 10))
CDF_GRID = np.linspace(0.0, 20.0, 201)
DOT_LIMIT = 2000

# config key -> (SimConfig field, value parser)
SIM_KEYS = {
    "lambda": ("rate", float),
    "q": ("q", float),
    "h": ("h", float),
    "alpha": ("alpha", float),
    "M0": ("m0", int),
    "T_end": ("t_end", float),
    "warmup": ("warmup", float),
    "seed": ("seed", int),
    "p_greedy": ("p_greedy", float),
    "gamma": ("gamma", float),
    "theta": ("theta", float),
    "K_reattach": ("k_reattach", float),
    "N": ("n_nodes", int),
    "redraws": ("redraws", int),
    "conflict_redraws": ("conflict_redraws", int),
    "max_walk_steps": ("max_walk_steps", int),
    "dense_cap": ("dense_cap", int),
    "solver_cap": ("solver_cap", int),
    "mc_samples": ("mc_samples", int),
}
SPEC_KEYS = ("mode", "replicas", "p_grid", "gammas", "processes", "out")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully validated experiment.

    Attributes
    ----------
    mode : str
        ``single``, ``sweep``, ``cdf`` or ``little``.
    config : SimConfig
        Simulation parameters.
    p_grid : tuple(float)
        Greedy fractions of a sweep.
    replicas : int
        Runs per configuration.
    gammas : tuple(float)
        Selfish fractions theta0 is reported for.
    processes : int
        Worker processes for replicas.
    out : str
        Output directory.
    """
    mode: str
    config: SimConfig
    p_grid: tuple = DEFAULT_P_GRID
    replicas: int = 1
    gammas: tuple = (1.0,)
    processes: int = 1
    out: str = "results"


def _parse_value(key, parser, text):
    try:
        return parser(text)
    except ValueError:
        raise ConfigError("{}: cannot read {!r} as {}.".format(key, text, parser.__name__)) from None


def _parse_list(key, text):
    values = tuple(_parse_value(key, float, item.strip()) for item in text.split(",") if item.strip())
    if not values:
        raise ConfigError("{}: empty list.".format(key))
    return values


def parse_config(text):
    """Parse a flat ``key=value`` configuration into an ExperimentSpec.

    Parameters
    ----------
    text : str
        One pair per line; ``#`` starts a comment.

    Returns
    -------
    ExperimentSpec
    """
    pairs = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("line {}: expected key=value, got {!r}.".format(number, raw.strip()))
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SIM_KEYS and key not in SPEC_KEYS:
            raise ConfigError("line {}: unknown key {!r}.".format(number, key))
        if key in pairs:
            raise ConfigError("line {}: duplicate key {!r}.".format(number, key))
        pairs[key] = value
    missing = [key for key in REQUIRED if key not in pairs]
    if missing:
        raise ConfigError("missing required keys: {}.".format(", ".join(missing)))

    kwargs = {}
    for key, (name, parser) in SIM_KEYS.items():
        if key in pairs:
            kwargs[name] = _parse_value(key, parser, pairs[key])
    try:
        config = SimConfig(**kwargs)
    except ValueError as err:
        raise ConfigError(str(err)) from None

    mode = pairs.get("mode", "single")
    if mode not in MODES:
        raise ConfigError("mode must be one of {}, got {!r}.".format(", ".join(MODES), mode))
    replicas = _parse_value("replicas", int, pairs.get("replicas", "1"))
    processes = _parse_value("processes", int, pairs.get("processes", "1"))
    if replicas < 1:
        raise ConfigError("replicas must be >= 1, got {}.".format(replicas))
    if processes < 1:
        raise ConfigError("processes must be >= 1, got {}.".format(processes))
    if "p_grid" in pairs:
        p_grid = _parse_list("p_grid", pairs["p_grid"])
    else:
        p_grid = tuple(p for p in DEFAULT_P_GRID if p <= config.gamma)
    if any(p < 0 or p > config.gamma for p in p_grid) or any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ConfigError("p_grid must be strictly increasing inside [0, gamma={}].".format(config.gamma))
    gammas = _parse_list("gammas", pairs["gammas"]) if "gammas" in pairs else (1.0,)
    if any(not 0 < g <= 1 for g in gammas):
        raise ConfigError("gammas must lie in (0, 1], got {}.".format(gammas))
    out = pairs.get("out", "results")
    return ExperimentSpec(mode, config, p_grid, replicas, gammas, processes, out)


def format_config(spec):
    """Configuration text that `parse_config` reads back into `spec`."""
    config = spec.config
    lines = ["mode={}".format(spec.mode)]
    for key, (name, _) in SIM_KEYS.items():
        lines.append("{}={!r}".format(key, getattr(config, name)))
    lines.append("replicas={}".format(spec.replicas))
    lines.append("p_grid={}".format(",".join(repr(p) for p in spec.p_grid)))
    lines.append("gammas={}".format(",".join(repr(g) for g in spec.gammas)))
    lines.append("processes={}".format(spec.processes))
    lines.append("out={}".format(spec.out))
    return "\n".join(lines) + "\n"


def run_single(spec, dump_dot=False):
    output = run(spec.config)
    write_sim_output(output, spec.out)
    output.print_summary()
    if dump_dot:
        view = output.tangle.snapshot(spec.config.t_end, 0.0)
        if view.size < DOT_LIMIT:
            write_dot(view, os.path.join(spec.out, "tangle.dot"))
        else:
            logger.warning("Tangle of %d vertices too large for a DOT dump (limit %d)", view.size, DOT_LIMIT)
    return output


def run_cdf(spec):
    outputs = run_replicas(spec.config, spec.replicas, spec.processes)
    cdf = approval_cdf(outputs, CDF_GRID)
    write_frame(pd.DataFrame({"t": CDF_GRID, "cdf": cdf}), os.path.join(spec.out, "cdf.csv"))
    print("{:<30} {:>16.12f}".format("approved within 5s", float(approval_cdf(outputs, [5.0])[0])))
    return cdf


def run_little(spec):
    outputs = run_replicas(spec.config, spec.replicas, spec.processes)
    check = little_check(outputs)
    write_frame(pd.DataFrame([check.as_row()]), os.path.join(spec.out, "little.csv"))
    for label, value in check.as_row().items():
        print("{:<30} {:>16.12f}".format(label, value))
    return check


def run_sweep(spec):
    def on_point(p, outputs, summary):
        write_frame(cost_frame(outputs), os.path.join(spec.out, "costs_p{:g}.csv".format(p)))

    costs_path = os.path.join(spec.out, "costs.csv")
    try:
        curves = sweep(spec.config, spec.p_grid, spec.replicas, spec.processes, on_point=on_point)
    except SweepError as err:
        if err.partial.summaries:
            write_frame(pd.DataFrame([s.as_row() for s in err.partial.summaries]), costs_path)
        raise
    write_frame(pd.DataFrame([s.as_row() for s in curves.summaries]), costs_path)
    report = analyse(curves, spec.gammas, spec.config.n_nodes)
    write_frame(equilibrium_frame(curves, report), os.path.join(spec.out, "equilibrium.csv"))
    report.print_summary()
    return report


def build_parser():
    parser = argparse.ArgumentParser(prog="tanglegame",
                                     description="Tangle simulation and default/greedy attachment game.")
    parser.add_argument("--config", required=True, help="key=value experiment file")
    parser.add_argument("--mode", choices=MODES, help="override the configured mode")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--processes", type=int, help="worker processes for replicas")
    parser.add_argument("--dump-dot", action="store_true", help="write the final tangle as DOT (single mode)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    return parser


def main(argv=None):
    """Run the experiment described by the command line; returns the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=max(logging.WARNING - 10 * args.verbose, logging.DEBUG),
                        format="%(asctime)s %(name)s %(levelname)s: %(message)s")
    try:
        with open(args.config) as handle:
            spec = parse_config(handle.read())
        overrides = {}
        if args.mode is not None:
            overrides["mode"] = args.mode
        if args.out is not None:
            overrides["out"] = args.out
        if args.processes is not None:
            if args.processes < 1:
                raise ConfigError("processes must be >= 1, got {}.".format(args.processes))
            overrides["processes"] = args.processes
        if args.seed is not None:
            overrides["config"] = spec.config.with_seed(args.seed)
        spec = replace(spec, **overrides)
        os.makedirs(spec.out, exist_ok=True)
        logger.info("Running %s experiment into %s", spec.mode, spec.out)
        if spec.mode == "single":
            run_single(spec, args.dump_dot)
        elif spec.mode == "sweep":
            run_sweep(spec)
        elif spec.mode == "cdf":
            run_cdf(spec)
        else:
            run_little(spec)
        write_manifest(spec, spec.out)
    except ConfigError as err:
        print("config error: {}".format(err), file=sys.stderr)
        return 2
    except (SimulationError, RuntimeError, ValueError) as err:
        print("runtime error: {}".format(err), file=sys.stderr)
        return 3
    except OSError as err:
        print("io error: {}".format(err), file=sys.stderr)
        return 4
    logger.info("Done")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""
Command line entry point: parse flags, load the scenario and route to a command module
"""
import argparse
import logging
import sys

from config import COMMANDS, EXIT_CODES, load_scenario, parse_grid
from errors import ConfigError, GeodesicsError
from utils import setup_logging

from commands import check, cusp_report, geodesic, mckeithan_scan, strata, value_gap

logger = logging.getLogger(__name__)


def parse_args(argv=None):
    p = argparse.ArgumentParser(
        description="Singular and abnormal extremals, cusps of abnormal geodesics and local time-minimal syntheses"
    )
    p.add_argument("command", help=f"one of: {', '.join(COMMANDS)}")
    p.add_argument("--config", type=str, default=None, help="scenario JSON file")
    p.add_argument("--out", type=str, default="out", help="output directory")
    p.add_argument("--tol", type=float, default=None, help="integrator relative tolerance")
    p.add_argument("--grid", type=str, default=None, metavar="w_min,w_max,s_min,s_max,n",
                   help="terminal grid for synthesis / mckeithan")
    p.add_argument("--seed", type=int, default=None, help="seed of the randomized checks")
    p.add_argument("--verbose", action="store_true", help="debug logging")
    return p.parse_args(argv)


def _overrides(args):
    overrides = {'seed': args.seed}
    if args.tol is not None:
        if args.tol <= 0:
            raise ConfigError(f"--tol must be positive, got {args.tol}")
        overrides['tol'] = args.tol
    if args.grid is not None:
        overrides['grid'] = parse_grid(args.grid)
    return overrides


def run(args):
    """Execute one command; returns the exit status"""
    command = args.command
    if command not in COMMANDS:
        logger.error("unknown command '%s' (expected one of %s)", command, ", ".join(COMMANDS))
        return EXIT_CODES['unknown_command']

    scenario = load_scenario(args.config, command, _overrides(args))
    logger.info("running command=%s config=%s out=%s", command, args.config, args.out)

    # Route to command modules
    if command == 'geodesic':
        paths = geodesic.run(scenario, args.out)
    elif command == 'cusp':
        paths = cusp_report.run(scenario, args.out)
    elif command == 'value-gap':
        paths = value_gap.run(scenario, args.out)
    elif command == 'synthesis':
        paths = strata.run(scenario, args.out)
    elif command == 'mckeithan':
        paths = mckeithan_scan.run(scenario, args.out)
    else:
        paths, failed = check.run(scenario, args.out)
        if failed:
            logger.error("%d invariant check(s) failed", failed)
            return EXIT_CODES['check_failed']

    logger.info("command=%s wrote %d file(s)", command, len(paths))
    return EXIT_CODES['ok']


def main(argv=None):
    args = parse_args(argv)
    setup_logging(args.verbose)
    try:
        return run(args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CODES['schema']
    except GeodesicsError as e:
        logger.error("numerical failure %s: %s", type(e).__name__, e)
        return EXIT_CODES['numerical']


if __name__ == '__main__':
    sys.exit(main())

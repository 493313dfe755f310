import argparse
import logging
import sys

import commands
import sweep
import utils
from exceptions import ConfigError, NumericalError, TruncationTooLarge
from models import ModelTag

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger("run")


def _common_flags():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=str, default=None, help="Config file merged over the built-in config.yaml")
    parser.add_argument(
        "-m", "--model", type=str, default=None, choices=[t.value for t in ModelTag], help="Potential family"
    )
    parser.add_argument("--sigma", type=float, nargs="+", default=None, help="Asymmetry parameter(s) σ")
    parser.add_argument("--out", type=str, default=None, help="Output directory")
    parser.add_argument("--grid-points", dest="grid_points", type=int, default=None, help="Grid points n")
    parser.add_argument("--k-states", dest="k_states", type=int, default=None, help="Eigenstates K")
    parser.add_argument("--k-trunc", dest="k_trunc", type=int, default=None, help="OTOC truncation K_t")
    parser.add_argument(
        "--convention", type=str, default=None, choices=utils.CONVENTIONS, help="Momentum matrix convention"
    )
    parser.add_argument("--beta", type=float, nargs="+", default=None, help="Inverse temperature(s)")
    parser.add_argument("--tmax", type=float, default=None, help="Last sample time")
    parser.add_argument("--samples", type=int, default=None, help="Number of time samples")
    parser.add_argument("--workers", type=int, default=None, help="Sweep worker pool size")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only, no progress bars")
    return parser


def get_args_parser():
    parser = argparse.ArgumentParser(description="OTOC, Loschmidt echo and spectra of perturbed 1D wells")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    subparsers.add_parser("spectrum", parents=[common], help="Potential, eigenvalues and spectral statistics")
    subparsers.add_parser("otoc", parents=[common], help="Microcanonical and thermal OTOCs with growth fits")
    subparsers.add_parser("echo", parents=[common], help="Loschmidt echo comparison")
    subparsers.add_parser("classical", parents=[common], help="Fixed points, region maps and phase portraits")
    subparsers.add_parser("sweep", parents=[common], help="Run commands over (model, σ) cells with a manifest")
    render = subparsers.add_parser("render", help="Draw PNG figures from a finished run")
    render.add_argument("run_dir", type=str, help="Directory written by another command")
    render.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    render.add_argument("-q", "--quiet", action="store_true", help="Warnings only")
    return parser


def _configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)
    logging.captureWarnings(True)


def dispatch(args):
    """Run one parsed command and return its exit code."""
    if args.command == "render":
        written = commands.render(args.run_dir)
        logger.info("rendered %d figures", len(written))
        return EXIT_OK

    config = utils.resolve_run_config(args, args.config)
    if args.command == "sweep":
        manifest = sweep.cmd_sweep(
            config,
            models=None if args.model is None else [args.model],
            sigmas=args.sigma,
        )
        return EXIT_OK if manifest["status"] == "ok" else EXIT_NUMERICAL
    if args.command == "echo" and (args.model is not None or args.sigma is not None):
        written = commands.cmd_echo(config, compare={})
    else:
        written = commands.COMMANDS[args.command](config)
    logger.info("%s wrote %d files under %s", args.command, len(written), config.out)
    return EXIT_OK


def main(argv=None):
    args = get_args_parser().parse_args(argv)
    _configure_logging(args)
    try:
        return dispatch(args)
    except (ConfigError, TruncationTooLarge) as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    except NumericalError as err:
        logger.error("%s: %s", type(err).__name__, err)
        return EXIT_NUMERICAL
    except ValueError as err:
        logger.error("invalid request: %s", err)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

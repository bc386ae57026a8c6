import argparse
import logging
import sys
from typing import Callable, Optional, Sequence

from pydantic import ValidationError

from app import __version__, config
from app.config import settings
from app.commands import cmd_analyze, cmd_compare, cmd_inflection, cmd_simulate
from app.exceptions import AoiOutageError, UsageError
from app.models.simulation import Axis, VarianceConvention

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so every failure maps to an exit code."""

    def error(self, message: str):
        raise UsageError(message)


def _list_of(cast: Callable, name: str) -> Callable[[str], list]:
    def parse(text: str) -> list:
        items = [item.strip() for item in text.split(",") if item.strip()]
        try:
            return [cast(item) for item in items]
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"invalid {name} list {text!r}") from e
    parse.__name__ = f"{name}_list"
    return parse


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def create_parser() -> CliParser:
    """Create and configure the command-line parser."""
    parser = CliParser(
        prog="aoi-outage",
        description="Outage probability of AoI-aware networked control loops",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default: AOI_LOG_LEVEL or INFO)")

    # options shared by the commands
    io_options = CliParser(add_help=False)
    io_options.add_argument("--out", default=None, help="Output file; '-' for stdout")
    io_options.add_argument("--format", choices=["csv", "json"], default=None, dest="output_format")

    scenario_options = CliParser(add_help=False)
    scenario_options.add_argument("--scenario", required=True, help="Scenario JSON file")

    run_options = CliParser(add_help=False)
    run_options.add_argument("--seed", type=int, default=None)
    run_options.add_argument("--threads", type=_positive_int, default=None, help="Worker count (default: AOI_THREADS)")
    run_options.add_argument("--executor", choices=["thread", "process"], default=None)
    run_options.add_argument("--episodes", type=_positive_int, default=None)
    run_options.add_argument("--horizon", type=_positive_int, default=None)
    run_options.add_argument("--confidence", type=_probability, default=None)

    conventions = [c.value for c in VarianceConvention]
    axes = [a.value for a in Axis]

    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    analyze = subparsers.add_parser("analyze", parents=[scenario_options, io_options], help="Tabulate p_out per age")
    analyze.add_argument("--ages", type=_list_of(int, "age"), default=None)
    analyze.add_argument("--convention", choices=conventions, default=None)
    analyze.add_argument("--axis", choices=axes, default=None)
    analyze.add_argument("--noise-scale", type=float, default=1.0)

    simulate = subparsers.add_parser(
        "simulate", parents=[scenario_options, io_options, run_options], help="Monte-Carlo outage rates"
    )
    simulate.add_argument("--convention", choices=conventions, default=None)
    simulate.add_argument("--noise-scale", type=float, default=1.0)
    simulate.add_argument("--fixed-age", type=_positive_int, default=None)

    compare = subparsers.add_parser(
        "compare", parents=[scenario_options, io_options, run_options], help="Model vs simulation grid"
    )
    compare.add_argument("--noise-grid", type=_list_of(float, "noise"), default=None)
    compare.add_argument("--ages", "--age-grid", dest="age_grid", type=_list_of(int, "age"), default=None)
    compare.add_argument("--convention", choices=conventions + ["auto"], default=None)
    compare.add_argument("--acceptance", action="store_true", help="Exit 3 when too few cells are within CI")
    compare.add_argument("--stationary", action="store_true", help="Add an unconditioned row per noise level")

    inflection = subparsers.add_parser("inflection", parents=[io_options], help="Inflection point of p_out")
    inflection.add_argument("--delta-g", type=float, required=True)
    inflection.add_argument("--axis", choices=axes, default=None)

    return parser


def _run(args: argparse.Namespace) -> None:
    convention = getattr(args, "convention", None)
    if convention not in (None, "auto"):
        convention = VarianceConvention(convention)
    axis = Axis(args.axis) if getattr(args, "axis", None) else None

    if args.command == "analyze":
        if args.ages is not None and not args.ages:
            raise UsageError("--ages must not be empty")
        cmd_analyze(
            args.scenario,
            ages=args.ages,
            output_path=args.out,
            convention=convention,
            axis=axis,
            noise_scale=args.noise_scale,
            output_format=args.output_format,
        )
    elif args.command == "simulate":
        cmd_simulate(
            args.scenario,
            output_path=args.out,
            seed=args.seed,
            threads=args.threads,
            executor=args.executor,
            noise_scale=args.noise_scale,
            fixed_age=args.fixed_age,
            episodes=args.episodes,
            horizon=args.horizon,
            convention=convention,
            confidence=args.confidence,
            output_format=args.output_format,
        )
    elif args.command == "compare":
        cmd_compare(
            args.scenario,
            noise_grid=args.noise_grid,
            age_grid=args.age_grid,
            output_path=args.out,
            convention=convention,
            seed=args.seed,
            threads=args.threads,
            executor=args.executor,
            episodes=args.episodes,
            horizon=args.horizon,
            confidence=args.confidence,
            acceptance=args.acceptance,
            include_stationary=args.stationary,
            output_format=args.output_format,
        )
    else:
        cmd_inflection(args.delta_g, axis=axis, output_path=args.out, output_format=args.output_format)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the process exit code."""
    # Configure logging
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    if config.settings_error is not None:
        logger.error(f"Invalid AOI_* configuration: {config.settings_error}")
        return 1
    try:
        args = create_parser().parse_args(argv)
        if args.log_level:
            logging.getLogger().setLevel(args.log_level.upper())
        _run(args)
    except AoiOutageError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return 1
    except (ValueError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from src.config.settings import settings
from src.environment.field import FieldError, export_field, generate
from src.experiments.graph import build_graph
from src.experiments.state import RunSpec
from src.experiments.utils import ConfigRejected, load_config_file, parse_override
from src.sim.world import NumericalAbort

logger = logging.getLogger("gbpstack")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

EXPERIMENTS = ("source-seek", "coverage", "rc-sweep", "comms-failure")


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="[%(name)s] %(levelname)s %(message)s", force=True)


def parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got '{text}'") from e
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbpstack", description="Multi-robot GBP stack simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", type=Path, help="JSON object of config values")
    run.add_argument("--seeds", type=parse_seeds, help="comma-separated seeds")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--workers", type=int, help="parallel cell workers")

    field = sub.add_parser("export-field", help="write a ground-truth field as a text grid")
    field.add_argument("--seed", type=int, required=True)
    field.add_argument("--d", type=float, default=100.0)
    field.add_argument("--rd", type=float, default=10.0)
    field.add_argument("--octaves", type=int, default=4)
    field.add_argument("--out", type=Path, help="file to write; defaults under the output directory")
    return parser


def build_spec(args: argparse.Namespace) -> RunSpec:
    """--override beats --config; both beat the experiment preset."""
    values = load_config_file(args.config) if args.config else {}
    for text in args.override:
        key, value = parse_override(text)
        values[key] = value
    fields = {"experiment": args.experiment, "config": values}
    if args.seeds:
        fields["seeds"] = args.seeds
    if args.out:
        fields["output_dir"] = args.out
    if args.workers:
        fields["workers"] = args.workers
    try:
        return RunSpec(**fields)
    except ValidationError as e:
        raise ConfigRejected(str(e)) from e


def run_command(args: argparse.Namespace) -> int:
    spec = build_spec(args)
    logger.info("%s: seeds %s -> %s", spec.experiment, spec.seeds, spec.output_dir)
    final = build_graph().invoke({"spec": spec})
    logger.info("manifest written to %s", final.get("manifest"))
    return EXIT_OK


def export_field_command(args: argparse.Namespace) -> int:
    try:
        field = generate(args.seed, args.d, args.rd, octaves=args.octaves)
    except FieldError as e:
        raise ConfigRejected(str(e)) from e
    path = args.out or Path(settings.output_dir) / f"field_seed{args.seed}_D{args.d:g}_rD{args.rd:g}.txt"
    export_field(field, path)
    print(path)
    return EXIT_OK


def cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        if args.command == "run":
            return run_command(args)
        return export_field_command(args)
    except ConfigRejected as e:
        logger.error("config rejected: %s", e)
        return EXIT_CONFIG
    except NumericalAbort as e:
        logger.error("%s", e)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(cli())

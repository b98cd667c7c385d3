import argparse
import sys
from typing import Optional, Sequence

from fellcheck import __version__
from fellcheck.commands import converge, fiber, fixture, random_family, verify
from fellcheck.logging_config import log_structured, set_level
from fellcheck.metrics import write_metrics

COMMANDS = (verify, converge, fixture, fiber, random_family)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fellcheck",
        description="Partial representations of free groups: axioms, projection calculus, "
                    "approximation maps and Fell-bundle checks on finite-dimensional models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        type=str.upper, help="override LOG_LEVEL")
    parser.add_argument("--metrics-out", metavar="FILE", default=None,
                        help="write Prometheus metrics here when the command ends")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    log_structured("Command started", level="debug", command=args.command)
    code = args.handler(args)
    if args.metrics_out:
        write_metrics(args.metrics_out)
    log_structured("Command finished", level="debug", command=args.command, exit_code=code)
    return code


if __name__ == "__main__":
    sys.exit(main())

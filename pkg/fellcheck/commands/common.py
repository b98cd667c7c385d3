import sys
from typing import Optional

from fellcheck.exceptions import InputError
from fellcheck.freegroup import GeneratorSet, Word


def add_rep_flag(parser):
    parser.add_argument("--rep", required=True, metavar="FILE", help="representation envelope (JSON)")


def add_tolerance_flags(parser):
    parser.add_argument("--atol", type=float, default=None, help="absolute tolerance (default 1e-10)")
    parser.add_argument("--rtol", type=float, default=None, help="relative tolerance (default 1e-12)")


def add_out_flag(parser, what: str = "output"):
    parser.add_argument("--out", metavar="FILE", default=None, help=f"write the {what} here instead of stdout")


def positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise InputError(f"expected a positive integer, got {value}")
    return n


def parse_word(gens: GeneratorSet, text: Optional[str]) -> Word:
    return gens.parse(text or "")


def emit(text: str, out: Optional[str] = None):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

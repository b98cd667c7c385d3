from pydantic import ValidationError

from fellcheck.commands.common import add_out_flag, emit, positive_int
from fellcheck.envelope import dump_envelope, envelope_for
from fellcheck.exceptions import InputError, handle_cli_errors
from fellcheck.fixtures import build_fixture, fixture_depth, parse_adjacency
from fellcheck.logging_config import log_structured
from fellcheck.models import FixtureSpec


def register(subparsers):
    parser = subparsers.add_parser("fixture", help="emit a canonical example representation")
    parser.add_argument("kind", choices=["tree", "ck", "parity", "delta", "random"])
    parser.add_argument("--gens", type=positive_int, default=2, help="number of generators (default 2)")
    parser.add_argument("--depth", type=positive_int, default=2, help="truncation depth L (default 2)")
    parser.add_argument("--matrix", default=None,
                        help="ck adjacency: I2, J3, '0,1;1,0' or a JSON file")
    parser.add_argument("--seed", type=int, default=None, help="random: seed")
    parser.add_argument("--dim", type=positive_int, default=None, help="random: Hilbert space dimension")
    parser.add_argument("--dim-cap", type=positive_int, default=None, help="override FELL_DIM_CAP")
    add_out_flag(parser, "envelope")
    parser.set_defaults(handler=run)


def spec_from_args(args) -> FixtureSpec:
    fields = {"kind": args.kind, "m": args.gens, "L": args.depth}
    if args.kind == "ck":
        if not args.matrix:
            raise InputError("ck fixture requires --matrix")
        A = parse_adjacency(args.matrix)
        fields.update(A=A, m=len(A))
    if args.kind == "random":
        fields.update(seed=args.seed, dim=args.dim)
    try:
        return FixtureSpec(**fields)
    except ValidationError as exc:
        raise InputError(f"Invalid fixture parameters: {exc}") from exc


@handle_cli_errors
def run(args) -> int:
    spec = spec_from_args(args)
    source = build_fixture(spec, dim_cap=args.dim_cap)
    env = envelope_for(source, depth=fixture_depth(spec), spec=spec)
    emit(dump_envelope(env), args.out)
    log_structured("Fixture emitted", level="info", kind=spec.kind, dim=env.dim)
    return 0

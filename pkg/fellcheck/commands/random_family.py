from fellcheck.commands.common import emit, positive_int
from fellcheck.envelope import dump_envelope, dump_json, envelope_for
from fellcheck.exceptions import handle_cli_errors
from fellcheck.fixtures import random_family
from fellcheck.models import FixtureSpec
from fellcheck.prep import validate_family


def register(subparsers):
    parser = subparsers.add_parser("random", help="seeded random family of partial isometries and its validation")
    parser.add_argument("--dim", type=positive_int, required=True)
    parser.add_argument("--gens", type=positive_int, default=2)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--length", type=positive_int, default=2, help="product length to validate (default 2)")
    parser.add_argument("--out", metavar="FILE", default=None, help="also write the envelope here")
    parser.set_defaults(handler=run)


@handle_cli_errors
def run(args) -> int:
    family = random_family(args.dim, args.gens, args.seed)
    if args.out:
        spec = FixtureSpec(kind="random", m=args.gens, seed=args.seed, dim=args.dim)
        emit(dump_envelope(envelope_for(family, spec=spec)), args.out)
    report = validate_family(family, args.length)
    emit(dump_json(report.model_dump(exclude_none=True)))
    return 0 if report.accepted else 1

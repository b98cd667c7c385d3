from fellcheck.bundle import FellBundle
from fellcheck.commands.common import add_out_flag, add_rep_flag, emit, parse_word, positive_int
from fellcheck.envelope import dump_json, effective_tolerance, load_envelope, representation_from_envelope
from fellcheck.exceptions import handle_cli_errors


def register(subparsers):
    parser = subparsers.add_parser("fiber", help="rank and stabilization certificate of a fiber B_t")
    add_rep_flag(parser)
    parser.add_argument("--word", default="", help='grading word such as "x"; empty for the unit fiber')
    parser.add_argument("--r-depth", type=positive_int, default=None,
                        help="starting word length for the range projections (default 2|t| + 2)")
    add_out_flag(parser, "fiber report")
    parser.set_defaults(handler=run)


@handle_cli_errors
def run(args) -> int:
    env, _ = load_envelope(args.rep)
    rep = representation_from_envelope(env, effective_tolerance(env))
    t = parse_word(rep.gens, args.word)
    F = FellBundle(rep, args.r_depth).fiber(t)
    emit(dump_json(F.report().model_dump()), args.out)
    return 0

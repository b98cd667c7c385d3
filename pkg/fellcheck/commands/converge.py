from fellcheck.approx import ProjectionFamily, convergence_study, require_decomposable
from fellcheck.commands.common import add_out_flag, add_rep_flag, emit, parse_word, positive_int
from fellcheck.envelope import effective_tolerance, load_envelope, representation_from_envelope
from fellcheck.exceptions import handle_cli_errors
from fellcheck.logging_config import log_structured


def register(subparsers):
    parser = subparsers.add_parser("converge", help="error table of the averaging approximation of σ(t)")
    add_rep_flag(parser)
    parser.add_argument("--word", default="", help='word such as "x.y^-1"; empty for the unit')
    parser.add_argument("--nmax", type=positive_int, default=8, help="largest n (default 8)")
    parser.add_argument("--depth", type=positive_int, default=None,
                        help="truncation depth when the envelope does not record one")
    add_out_flag(parser, "CSV")
    parser.set_defaults(handler=run)


@handle_cli_errors
def run(args) -> int:
    env, _ = load_envelope(args.rep)
    rep = representation_from_envelope(env, effective_tolerance(env))
    t = parse_word(rep.gens, args.word)
    mu, nu = require_decomposable(t)

    depth = env.depth or args.depth
    if depth is None:
        depth = args.nmax + max(len(mu), len(nu))
        log_structured("No truncation depth recorded; assuming the minimal one", level="warning", depth=depth)
    table = convergence_study(ProjectionFamily(rep, depth), t, range(1, args.nmax + 1))
    emit(table.to_csv(), args.out)
    return 0

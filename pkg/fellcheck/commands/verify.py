from fellcheck.commands.common import add_out_flag, add_rep_flag, add_tolerance_flags, emit, positive_int
from fellcheck.envelope import dump_json, effective_tolerance, load_envelope, representation_from_envelope
from fellcheck.exceptions import handle_cli_errors
from fellcheck.logging_config import log_structured
from fellcheck.services.verification import run_verification

DEFAULT_DEPTH = 3


def register(subparsers):
    parser = subparsers.add_parser("verify", help="run the full verification suite on a representation")
    add_rep_flag(parser)
    parser.add_argument("--depth", type=positive_int, default=DEFAULT_DEPTH,
                        help=f"levels for the projection relations and sum identities (default {DEFAULT_DEPTH})")
    parser.add_argument("--r-depth", type=positive_int, default=2,
                        help="starting word length for fiber generation (default 2)")
    add_tolerance_flags(parser)
    add_out_flag(parser, "JSON report")
    parser.set_defaults(handler=run)


@handle_cli_errors
def run(args) -> int:
    env, digest = load_envelope(args.rep)
    tol = effective_tolerance(env, args.atol, args.rtol)
    rep = representation_from_envelope(env, tol)
    report = run_verification(rep, args.depth, tol, r_depth=args.r_depth, input_sha256=digest)
    emit(dump_json(report.model_dump(exclude_none=True)), args.out)
    for failure in report.failures():
        log_structured("Check failed", level="warning", check=failure.name,
                       residual=failure.residual, witness=failure.witness)
    return 0 if report.passed else 1

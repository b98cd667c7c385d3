import sys
from functools import wraps
from fellcheck.logging_config import log_structured


class FellCheckError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""
    exit_code = 1


class InputError(FellCheckError, ValueError):
    exit_code = 2


class ParseError(InputError):
    exit_code = 2


class ResourceError(FellCheckError):
    exit_code = 3


class CheckFailure(FellCheckError):
    exit_code = 1


class VanishingWordError(InputError):
    """Raised for words outside μν⁻¹ form, where σ(t) = 0 identically."""
    exit_code = 1


def handle_cli_errors(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except FellCheckError as exc:
            log_structured("Command failed", level="error", error=str(exc),
                           error_type=type(exc).__name__, exit_code=exc.exit_code)
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
        except MemoryError as exc:
            log_structured("Out of memory", level="error", error=str(exc), exit_code=ResourceError.exit_code)
            print(f"error: out of memory: {exc} (use a smaller fixture or lower --nmax)", file=sys.stderr)
            return ResourceError.exit_code
        except Exception as exc:
            log_structured("Unhandled exception", level="error", error=str(exc))
            print(f"internal error: {exc}", file=sys.stderr)
            return 1
    return wrapper

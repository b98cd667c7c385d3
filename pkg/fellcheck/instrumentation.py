import time
from functools import wraps
from fellcheck.logging_config import log_structured
from fellcheck.metrics import CHECK_COUNT, CHECK_LATENCY


def _outcome(result) -> str:
    if isinstance(result, bool):
        return "pass" if result else "fail"
    passed = getattr(result, "passed", None)
    if isinstance(passed, bool):
        return "pass" if passed else "fail"
    return "done"


def instrumented(check: str):
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                CHECK_COUNT.labels(check=check, outcome="error").inc()
                log_structured("Check raised", level="debug", check=check, error=str(e))
                raise
            process_time = time.perf_counter() - start_time

            outcome = _outcome(result)
            CHECK_COUNT.labels(check=check, outcome=outcome).inc()
            CHECK_LATENCY.labels(check=check).observe(process_time)
            log_structured("Check processed", level="debug", check=check,
                           outcome=outcome, process_time=process_time)
            return result
        return wrapper
    return decorator

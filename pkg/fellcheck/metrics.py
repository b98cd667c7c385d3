from prometheus_client import Counter, Histogram, generate_latest

CHECK_COUNT = Counter(
    "fellcheck_checks_total",
    "Total number of checks executed",
    ["check", "outcome"]
)

CHECK_LATENCY = Histogram(
    "fellcheck_check_duration_seconds",
    "Check duration",
    ["check"]
)


def write_metrics(path: str):
    with open(path, "wb") as fh:
        fh.write(generate_latest())

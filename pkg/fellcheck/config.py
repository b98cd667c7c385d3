import os

# =========================
# 🌍 ENVIRONMENT CONFIG
# =========================
ENVIRONMENT = os.getenv("ENVIRONMENT", "development")
LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
SERVICE_NAME = os.getenv("FELL_SERVICE_NAME", "fellcheck")

# =========================
# 🧮 NUMERICS
# =========================
DEFAULT_ATOL = float(os.getenv("FELL_ATOL", "1e-10"))
DEFAULT_RTOL = float(os.getenv("FELL_RTOL", "1e-12"))
# Seuil d'acceptation Gram–Schmidt (norme HS du résidu)
SPAN_THRESHOLD = float(os.getenv("FELL_SPAN_THRESHOLD", "1e-8"))

# =========================
# 🚧 RESOURCE LIMITS
# =========================
DIM_CAP = int(os.getenv("FELL_DIM_CAP", "4096"))
MAX_PRODUCTS = int(os.getenv("FELL_MAX_PRODUCTS", "50000"))
WORKERS = int(os.getenv("FELL_WORKERS", "1"))
# Tours r_depth supplémentaires avant qu'une fibre se stabilise
FIBER_MAX_GROWTH = int(os.getenv("FELL_FIBER_MAX_GROWTH", "8"))
# Above this many basis pairs, bilinear containment is sampled with seeded random combinations
PAIR_LIMIT = int(os.getenv("FELL_PAIR_LIMIT", "400"))
# Octets autorisés pour les opérateurs mis en cache par une étude de convergence
MEMORY_CAP = int(float(os.getenv("FELL_MEMORY_CAP", str(8 * 2**30))))

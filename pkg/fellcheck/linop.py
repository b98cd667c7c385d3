# Résidu comparé à atol + rtol * produit des normes spectrales des opérandes
import hashlib
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from fellcheck.exceptions import CheckFailure, InputError
from fellcheck.models import ToleranceConfig

Operator = np.ndarray


class Verdict(str, Enum):
    SELFADJOINT = "selfadjoint"
    NOT_IDEMPOTENT = "not-idempotent"
    NOT_CONTRACTION = "not-contraction"


def as_operator(A) -> Operator:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"Operator must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("Operator has non-finite entries")
    return A


def identity(dim: int) -> Operator:
    return np.eye(dim)


def zeros(dim: int) -> Operator:
    return np.zeros((dim, dim))


def same_dim(*ops: Operator) -> int:
    dims = {op.shape for op in ops}
    if len(dims) != 1:
        raise InputError(f"Dimension mismatch: {sorted(dims)}")
    return ops[0].shape[0]


def adjoint(A: Operator) -> Operator:
    return A.conj().T


def spectral_norm(A: Operator) -> float:
    if A.size == 0:
        return 0.0
    s = linalg.svdvals(A)
    return float(s[0]) if s.size else 0.0


def hs_norm(A: Operator) -> float:
    return float(np.linalg.norm(A, "fro"))


def residual(A: Operator, B: Operator) -> float:
    return spectral_norm(A - B)


def effective_tol(tol: Optional[ToleranceConfig], *ops: Operator) -> float:
    tol = tol or ToleranceConfig()
    if tol.rtol == 0:
        return tol.atol
    norms = {}
    for op in ops:
        if id(op) not in norms:
            norms[id(op)] = spectral_norm(op)
    return tol.bound(*(norms[id(op)] for op in ops))


def is_projection(A: Operator, tol: Optional[ToleranceConfig] = None) -> bool:
    bound = effective_tol(tol, A, A)
    return residual(A @ A, A) <= bound and residual(A, adjoint(A)) <= bound


def is_partial_isometry(A: Operator, tol: Optional[ToleranceConfig] = None) -> bool:
    return residual(A @ adjoint(A) @ A, A) <= effective_tol(tol, A, A)


def commutator_norm(A: Operator, B: Operator) -> float:
    same_dim(A, B)
    return spectral_norm(A @ B - B @ A)


def commute(A: Operator, B: Operator, tol: Optional[ToleranceConfig] = None) -> bool:
    return commutator_norm(A, B) <= effective_tol(tol, A, B)


def idempotent_contraction_selfadjoint_check(p: Operator, tol: Optional[ToleranceConfig] = None) -> Verdict:
    """An idempotent contraction is self-adjoint; raises CheckFailure if not."""
    bound = effective_tol(tol, p, p)
    if residual(p @ p, p) > bound:
        return Verdict.NOT_IDEMPOTENT
    if spectral_norm(p) > 1 + bound:
        return Verdict.NOT_CONTRACTION
    gap = residual(p, adjoint(p))
    if gap > bound:
        raise CheckFailure(f"Idempotent contraction is not self-adjoint (residual {gap:.3e})")
    return Verdict.SELFADJOINT


def product_partial_isometry_criterion(u: Operator, v: Operator,
                                       tol: Optional[ToleranceConfig] = None) -> tuple[bool, bool]:
    """(uv is a partial isometry, u*u commutes with vv*); the two must agree."""
    same_dim(u, v)
    if not is_partial_isometry(u, tol) or not is_partial_isometry(v, tol):
        raise InputError("Both operands must be partial isometries")
    lhs = is_partial_isometry(u @ v, tol)
    rhs = commute(adjoint(u) @ u, v @ adjoint(v), tol)
    return lhs, rhs


def operator_key(A: Operator, decimals: int = 9) -> str:
    rounded = np.round(np.asarray(A, dtype=complex), decimals) + 0j
    h = hashlib.blake2b(digest_size=16)
    h.update(str(rounded.shape).encode())
    h.update(np.ascontiguousarray(rounded).tobytes())
    return h.hexdigest()


def psd_leq(A: Operator, B: Operator, tol: Optional[ToleranceConfig] = None) -> bool:
    D = B - A
    D = (D + adjoint(D)) / 2
    return float(np.linalg.eigvalsh(D).min(initial=0.0)) >= -effective_tol(tol, A, B)


def range_projection(A: Operator) -> Operator:
    Q = linalg.orth(A)
    return Q @ adjoint(Q)


def _off_diagonal(A: Operator) -> float:
    return spectral_norm(A - np.diag(np.diag(A)))


def commuting_certificate(projections: Sequence[Operator],
                          tol: Optional[ToleranceConfig] = None) -> tuple[float, Optional[tuple[int, int]]]:
    """(residual, witness) for pairwise commutation of a projection family."""
    # base standard, puis base propre d'une combinaison aléatoire ; sinon recherche par paires
    if len(projections) < 2:
        return 0.0, None
    tol = tol or ToleranceConfig()
    same_dim(*projections)
    bound = tol.bound(1.0, 1.0)

    worst = max(_off_diagonal(P) for P in projections)
    if worst <= bound:
        return worst, None

    # Generic weights separate the joint eigenspaces
    rng = np.random.default_rng(0)
    weights = rng.uniform(1.0, 2.0, size=len(projections))
    H = sum(w * P for w, P in zip(weights, projections))
    _, V = np.linalg.eigh((H + adjoint(H)) / 2)
    worst = max(_off_diagonal(adjoint(V) @ P @ V) for P in projections)
    if worst <= bound:
        return worst, None

    worst = 0.0
    for i in range(len(projections)):
        for j in range(i + 1, len(projections)):
            gap = commutator_norm(projections[i], projections[j])
            if gap > bound:
                return gap, (i, j)
            worst = max(worst, gap)
    return worst, None


def all_commute(projections: Sequence[Operator],
                tol: Optional[ToleranceConfig] = None) -> Optional[tuple[int, int]]:
    return commuting_certificate(projections, tol)[1]

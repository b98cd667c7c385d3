# e(t) = σ(t)σ(t)*, P_k = Σ_{|α|=k} e(α), Q_0 = 1 - P_1
# f(t) = σ(t) Q_0 σ(t)*, Q_k = Σ_{|α|=k} f(α) ; sommes en ordre lexicographique
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from fellcheck import linop
from fellcheck.config import MEMORY_CAP, WORKERS
from fellcheck.exceptions import CheckFailure, InputError, ResourceError, VanishingWordError
from fellcheck.freegroup import GeneratorSet, Word, enumerate_positive, pos_neg_decompose, positive_words_up_to
from fellcheck.instrumentation import instrumented
from fellcheck.logging_config import log_structured
from fellcheck.models import CheckReport, CheckResult, ConvergenceRow, ConvergenceTable, ToleranceConfig
from fellcheck.prep import Representation, worst_result

Operator = linop.Operator


class ProjectionFamily:
    def __init__(self, rep: Representation, depth: int):
        if depth < 1:
            raise InputError("depth must be at least 1")
        self.rep = rep
        self.depth = depth
        self.gens = rep.gens
        self.dim = rep.dim
        self._f: dict[tuple, Operator] = {}
        self._P: dict[int, Operator] = {}
        self._Q: dict[int, Operator] = {}
        self._lock = threading.Lock()

    def _level(self, k: int) -> int:
        if not 0 <= k <= self.depth:
            raise InputError(f"Level {k} outside 0..{self.depth}")
        return k

    def sigma(self, t: Word) -> Operator:
        return self.rep.evaluate(t)

    def e(self, t: Word) -> Operator:
        return self.rep.e(t)

    def f(self, t: Word) -> Operator:
        key = t.over(self.gens).letters
        cached = self._f.get(key)
        if cached is not None:
            return cached
        s = self.sigma(t)
        value = s @ self.Q(0) @ linop.adjoint(s)
        with self._lock:
            return self._f.setdefault(key, value)

    def P(self, k: int) -> Operator:
        k = self._level(k)
        cached = self._P.get(k)
        if cached is not None:
            return cached
        value = sum((self.e(alpha) for alpha in enumerate_positive(self.gens, k)),
                    np.zeros((self.dim, self.dim)))
        with self._lock:
            return self._P.setdefault(k, value)

    def Q(self, k: int) -> Operator:
        k = self._level(k)
        cached = self._Q.get(k)
        if cached is not None:
            return cached
        if k == 0:
            value = np.eye(self.dim) - self.P(1)
        else:
            value = sum((self.f(alpha) for alpha in enumerate_positive(self.gens, k)),
                        np.zeros((self.dim, self.dim)))
        with self._lock:
            return self._Q.setdefault(k, value)


def e_proj(pf: ProjectionFamily, t: Word) -> Operator:
    return pf.e(t)


def f_proj(pf: ProjectionFamily, t: Word) -> Operator:
    return pf.f(t)


def P(pf: ProjectionFamily, k: int) -> Operator:
    return pf.P(k)


def Q(pf: ProjectionFamily, k: int) -> Operator:
    return pf.Q(k)


@dataclass(frozen=True, eq=False)
class Section:
    gens: GeneratorSet
    dim: int
    values: Mapping[Word, Operator] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for word, op in self.values.items():
            op = np.asarray(op)
            if op.shape != (self.dim, self.dim):
                raise InputError(f"Section value at {word.display()} has shape {op.shape}, expected {self.dim}")
            if np.any(op != 0):
                clean[word.over(self.gens)] = op
        object.__setattr__(self, "values", dict(sorted(clean.items(), key=lambda kv: kv[0].sort_key())))

    @classmethod
    def delta(cls, t: Word, value: Operator) -> "Section":
        value = np.asarray(value)
        return cls(t.gens, value.shape[0], {t: value})

    @property
    def support(self) -> list[Word]:
        return list(self.values)

    def __contains__(self, t: Word) -> bool:
        return t in self.values

    def __getitem__(self, t: Word) -> Operator:
        op = self.values.get(t)
        return op if op is not None else np.zeros((self.dim, self.dim))

    def get(self, t: Word) -> Optional[Operator]:
        return self.values.get(t)

    def items(self):
        return self.values.items()

    def total(self) -> Operator:
        return sum(self.values.values(), np.zeros((self.dim, self.dim)))

    def gram(self) -> Operator:
        """Σ_t a(t)* a(t)."""
        return sum((linop.adjoint(a) @ a for a in self.values.values()), np.zeros((self.dim, self.dim)))


def _check_n(pf: ProjectionFamily, n: int):
    if not 1 <= n <= pf.depth:
        raise InputError(f"n must be in 1..{pf.depth}, got {n}")


def b_map(pf: ProjectionFamily, n: int) -> Section:
    _check_n(pf, n)
    values = {}
    for alpha in positive_words_up_to(pf.gens, n):
        values[alpha] = pf.f(alpha) if len(alpha) < n else pf.e(alpha)
    return Section(pf.gens, pf.dim, values)


def a_map(pf: ProjectionFamily, n: int) -> Section:
    """a_n(α) = ((1/n) Σ_{k<=n} b_k(α))^{1/2}, en forme close."""
    _check_n(pf, n)
    values = {pf.gens.identity(): pf.Q(0)}
    for alpha in positive_words_up_to(pf.gens, n)[1:]:
        f, e = pf.f(alpha), pf.e(alpha)
        values[alpha] = math.sqrt((n - len(alpha) + 1) / n) * f + math.sqrt(1 / n) * (e - f)
    return Section(pf.gens, pf.dim, values)


def _averaging_terms(a: Section, t: Word, b: Operator):
    t = t.over(a.gens)
    for r, ar in a.items():
        atr = a.get(t * r)
        if atr is not None:
            yield r, linop.adjoint(atr) @ b @ ar


def averaging_map(a: Section, t: Word, b: Operator, rep: Optional[Representation] = None) -> Operator:
    """Σ_r a(tr)* b a(r) over r with r and tr both in the support of a."""
    b = np.asarray(b)
    if b.shape != (a.dim, a.dim) or (rep is not None and rep.dim != a.dim):
        raise InputError(f"Dimension mismatch: operator {b.shape}, section dim {a.dim}")
    return sum((term for _, term in _averaging_terms(a, t, b)), np.zeros((a.dim, a.dim)))


def averaging_support(a: Section, t: Word, b: Operator, tol: Optional[ToleranceConfig] = None) -> list[Word]:
    tol = tol or ToleranceConfig()
    return [r for r, term in _averaging_terms(a, t, np.asarray(b)) if linop.spectral_norm(term) > tol.atol]


def require_decomposable(t: Word) -> tuple[Word, Word]:
    parts = pos_neg_decompose(t)
    if parts is None:
        raise VanishingWordError(f"σ(t) = 0: t is not of the form μν⁻¹ (t = {t.display()})")
    return parts


def convergence_error(pf: ProjectionFamily, t: Word, n: int) -> float:
    sigma = pf.sigma(t)
    return linop.spectral_norm(sigma - averaging_map(a_map(pf, n), t, sigma))


# σ, e et f par mot positif, plus la section a_n en cours
CACHED_PER_WORD = 4


def estimate_study_bytes(pf: ProjectionFamily, depth: int) -> int:
    m = pf.gens.size
    words = depth + 1 if m == 1 else (m ** (depth + 1) - 1) // (m - 1)
    family = getattr(pf.rep, "family", None)
    itemsize = np.result_type(*family.images).itemsize if family is not None else np.dtype(complex).itemsize
    return CACHED_PER_WORD * words * pf.dim * pf.dim * itemsize


def study_range(pf: ProjectionFamily, t: Word, n_range: Iterable[int],
                max_bytes: Optional[int] = None) -> list[int]:
    mu, nu = require_decomposable(t)
    ns = sorted(set(n_range))
    if not ns or ns[0] < 1:
        raise InputError("n_range must be a non-empty set of positive integers")
    need = ns[-1] + max(len(mu), len(nu))
    if need > pf.depth:
        raise InputError(f"n up to {ns[-1]} with t = {t.display()} needs depth {need}, family has {pf.depth}")
    cap = MEMORY_CAP if max_bytes is None else max_bytes
    estimate = estimate_study_bytes(pf, need)
    if estimate > cap:
        raise ResourceError(
            f"n up to {ns[-1]} with t = {t.display()} needs about {estimate / 2**30:.1f} GiB of cached operators, "
            f"above the cap {cap / 2**30:.1f} GiB (set FELL_MEMORY_CAP to raise it)"
        )
    return ns


@instrumented("convergence_study")
def convergence_study(pf: ProjectionFamily, t: Word, n_range: Iterable[int],
                      workers: Optional[int] = None, max_bytes: Optional[int] = None) -> ConvergenceTable:
    ns = study_range(pf, t, n_range, max_bytes)

    workers = workers or WORKERS
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(lambda n: convergence_error(pf, t, n), ns))
    else:
        errors = [convergence_error(pf, t, n) for n in ns]

    table = ConvergenceTable(word=t.display(), rows=[ConvergenceRow(n=n, error=err) for n, err in zip(ns, errors)])
    log_structured("Convergence study finished", level="debug", word=t.display(),
                   first_error=errors[0], last_error=errors[-1])
    return table


def column_isometry_check(a: Section, tol: Optional[ToleranceConfig] = None) -> tuple[float, float]:
    """(‖V‖, ‖Σ a(t)*a(t)‖^{1/2}) for the column V stacking one block a(t) per support word."""
    if not a.values:
        raise InputError("Section has empty support")
    tol = tol or ToleranceConfig()
    V = np.vstack(list(a.values.values()))
    colnorm = linop.spectral_norm(V)
    sumnorm = math.sqrt(linop.spectral_norm(a.gram()))
    if abs(colnorm - sumnorm) > tol.bound(colnorm, sumnorm):
        raise CheckFailure(f"‖V‖ = {colnorm!r} but ‖Σ a*a‖^(1/2) = {sumnorm!r}")
    return colnorm, sumnorm


def _projection_gap(A: Operator) -> float:
    return max(linop.residual(A @ A, A), linop.residual(A, linop.adjoint(A)))


def _fits(pf: ProjectionFamily, *words: Word) -> bool:
    limit = pf.rep.max_length
    return limit is None or all(len(w) <= limit for w in words)


@instrumented("check_projection_relations")
def check_projection_relations(pf: ProjectionFamily, words: Sequence[Word],
                               tol: Optional[ToleranceConfig] = None) -> CheckReport:
    tol = tol or ToleranceConfig()
    bound = tol.bound(1.0, 1.0)
    positive = positive_words_up_to(pf.gens, pf.depth)
    eye = np.eye(pf.dim)

    def covariance():
        for t in words:
            for s in words:
                ts = t * s
                if _fits(pf, ts):
                    sig = pf.sigma(t)
                    yield f"({t.display()},{s.display()})", linop.residual(sig @ pf.f(s), pf.f(ts) @ sig)

    def level_orthogonality():
        for k in range(1, pf.depth + 1):
            level = enumerate_positive(pf.gens, k)
            for a in level:
                for b in level:
                    if a != b:
                        gap = max(linop.spectral_norm(pf.e(a) @ pf.e(b)),
                                  linop.spectral_norm(pf.f(a) @ pf.f(b)),
                                  linop.spectral_norm(pf.e(a) @ pf.f(b)))
                        yield f"({a.display()},{b.display()})", gap

    def f_orthogonality():
        for a in positive:
            for b in positive:
                if a != b:
                    yield f"({a.display()},{b.display()})", linop.spectral_norm(pf.f(a) @ pf.f(b))

    def partition(n: int) -> Operator:
        return sum((pf.Q(k) for k in range(n)), np.zeros_like(eye)) + pf.P(n)

    report = CheckReport()
    report.add(worst_result("projection-e", ((t.display(), _projection_gap(pf.e(t))) for t in words), bound))
    report.add(worst_result("projection-f", ((t.display(), _projection_gap(pf.f(t))) for t in words), bound))
    report.add(worst_result("covariance-f", covariance(), bound))
    report.add(worst_result("f-below-e", ((t.display(), linop.residual(pf.e(t) @ pf.f(t), pf.f(t))) for t in words), bound))
    report.add(worst_result("level-orthogonality", level_orthogonality(), bound))
    report.add(worst_result("q-difference", ((f"k={k}", linop.residual(pf.Q(k), pf.P(k) - pf.P(k + 1)))
                                       for k in range(pf.depth)), bound))
    report.add(worst_result("partition-of-unity", ((f"n={n}", linop.residual(partition(n), eye))
                                             for n in range(1, pf.depth + 1)), bound))
    report.add(worst_result("f-orthogonality", f_orthogonality(), bound))
    return report


@instrumented("check_sum_identities")
def check_sum_identities(pf: ProjectionFamily, tol: Optional[ToleranceConfig] = None) -> CheckReport:
    tol = tol or ToleranceConfig()
    bound = tol.bound(1.0, 1.0)
    eye = np.eye(pf.dim)
    report = CheckReport()
    constant_gap = 0.0
    for n in range(1, pf.depth + 1):
        report.add(worst_result(f"sum-b-{n}", [(f"n={n}", linop.residual(b_map(pf, n).total(), eye))], bound))
        gram = a_map(pf, n).gram()
        report.add(worst_result(f"sum-a-{n}", [(f"n={n}", linop.residual(gram, eye))], bound))
        constant_gap = max(constant_gap, abs(linop.spectral_norm(gram) - 1.0))
    report.add(worst_result("bound-constant", [("sup_n ‖Σ a_n* a_n‖", constant_gap)], bound))
    return report


def check_unit_fiber_commutation(pf: ProjectionFamily, n: int, words: Sequence[Word],
                                 tol: Optional[ToleranceConfig] = None) -> CheckResult:
    tol = tol or ToleranceConfig()
    a = a_map(pf, n)

    def residuals():
        for alpha, value in a.items():
            for r in words:
                yield f"({alpha.display()},{r.display()})", linop.commutator_norm(value, pf.e(r))

    return worst_result(f"unit-fiber-commutation-{n}", residuals(), tol.bound(1.0, 1.0))

# Fibres B_t : bases orthonormales pour le produit HS <A, B> = tr(A*B)
# projections commutantes : les atomes fois σ(t) sont déjà deux à deux orthogonaux
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from fellcheck import linop
from fellcheck.approx import ProjectionFamily, Section, a_map, averaging_map, study_range
from fellcheck.config import FIBER_MAX_GROWTH, PAIR_LIMIT, SPAN_THRESHOLD, WORKERS
from fellcheck.exceptions import InputError
from fellcheck.freegroup import Word, lengths_add
from fellcheck.instrumentation import instrumented
from fellcheck.logging_config import log_structured
from fellcheck.models import CheckReport, ConvergenceRow, ConvergenceTable, FiberReport, ToleranceConfig
from fellcheck.prep import Representation, worst_result

Operator = linop.Operator


class SpanBuilder:
    def __init__(self, dim: int, threshold: float = SPAN_THRESHOLD):
        self.dim = dim
        self.threshold = threshold
        self.rank = 0
        self.rejected_max = 0.0
        self._rows = np.zeros((8, dim * dim), dtype=complex)

    def _project_out(self, v: np.ndarray) -> np.ndarray:
        if self.rank:
            M = self._rows[: self.rank]
            for _ in range(2):
                v = v - M.T @ (M.conj() @ v)
        return v

    def add(self, A: Operator) -> bool:
        v = self._project_out(np.asarray(A, dtype=complex).reshape(-1))
        r = float(np.linalg.norm(v))
        if r <= self.threshold:
            self.rejected_max = max(self.rejected_max, r)
            return False
        if self.rank == self._rows.shape[0]:
            self._rows = np.vstack([self._rows, np.zeros_like(self._rows)])
        self._rows[self.rank] = v / r
        self.rank += 1
        return True

    def basis(self) -> tuple[Operator, ...]:
        return tuple(row.reshape(self.dim, self.dim) for row in self._rows[: self.rank])


def _flatten(ops: Sequence[Operator], dim: int) -> np.ndarray:
    if not len(ops):
        return np.zeros((0, dim * dim), dtype=complex)
    return np.vstack([np.asarray(op, dtype=complex).reshape(1, -1) for op in ops])


def span_residuals(candidates: Sequence[Operator], basis: Sequence[Operator], dim: int) -> np.ndarray:
    """HS residual of each candidate after projection onto an orthonormal basis."""
    C = _flatten(candidates, dim)
    if C.shape[0] == 0:
        return np.zeros(0)
    B = _flatten(basis, dim)
    if B.shape[0]:
        C = C - (C @ B.conj().T) @ B
    return np.linalg.norm(C, axis=1)


def _max_offdiag(A: Operator) -> float:
    return float(np.abs(A - np.diag(np.diag(A))).max(initial=0.0))


class ProjectionLattice:
    def __init__(self, projections: Sequence[Operator], dim: int, r_depth: int,
                 threshold: float = SPAN_THRESHOLD):
        self.projections = list(projections)
        self.dim = dim
        self.r_depth = r_depth
        self._V: Optional[np.ndarray] = None
        self.groups: Optional[list[np.ndarray]] = self._atoms(threshold)

    @property
    def commutative(self) -> bool:
        return self.groups is not None

    def _atoms(self, threshold: float) -> Optional[list[np.ndarray]]:
        if not self.projections:
            return [np.arange(self.dim)]
        if max(_max_offdiag(P) for P in self.projections) <= threshold:
            D = np.array([np.real(np.diag(P)) for P in self.projections])
        else:
            rng = np.random.default_rng(0)
            weights = rng.uniform(1.0, 2.0, size=len(self.projections))
            H = sum(w * P for w, P in zip(weights, self.projections))
            _, V = np.linalg.eigh((H + linop.adjoint(H)) / 2)
            rotated = [linop.adjoint(V) @ P @ V for P in self.projections]
            if max(_max_offdiag(R) for R in rotated) > threshold:
                return None
            self._V = V
            D = np.array([np.real(np.diag(R)) for R in rotated])
        signs = D > 0.5
        if np.abs(D - signs).max(initial=0.0) > threshold:
            return None
        groups: dict[bytes, list[int]] = {}
        for j in range(self.dim):
            groups.setdefault(signs[:, j].tobytes(), []).append(j)
        return [np.array(idx) for idx in groups.values()]

    def atom_products(self, A: Operator) -> list[Operator]:
        out = []
        for g in self.groups:
            if self._V is None:
                B = np.zeros_like(A)
                B[g, :] = A[g, :]
            else:
                Vg = self._V[:, g]
                B = Vg @ (linop.adjoint(Vg) @ A)
            out.append(B)
        return out


def lattice_for(rep: Representation, r_depth: int, threshold: float = SPAN_THRESHOLD) -> ProjectionLattice:
    projections = [p for _, p in _distinct_by_length(rep.range_projections(r_depth), rep.dim)]
    return ProjectionLattice(projections, rep.dim, r_depth, threshold)


def _distinct_by_length(walk: Iterable[tuple[Word, Operator]], dim: int) -> list[tuple[int, Operator]]:
    eye_key = linop.operator_key(np.eye(dim))
    distinct: dict[str, tuple[int, Operator]] = {}
    for w, p in walk:
        key = linop.operator_key(p)
        if key != eye_key and key not in distinct:
            distinct[key] = (len(w), p)
    return list(distinct.values())


@dataclass(frozen=True, eq=False)
class FiberBasis:
    word: Word
    basis: tuple[Operator, ...]
    dim: int
    stabilized: bool = True
    residual_max: float = 0.0
    r_depth: int = 0
    threshold: float = SPAN_THRESHOLD

    @property
    def rank(self) -> int:
        return len(self.basis)

    def residual(self, A: Operator) -> float:
        return float(span_residuals([A], self.basis, self.dim)[0])

    def contains(self, A: Operator) -> bool:
        return self.residual(A) <= self.threshold * max(1.0, linop.hs_norm(A))

    def gram(self) -> np.ndarray:
        B = _flatten(self.basis, self.dim)
        return B.conj() @ B.T

    def report(self) -> FiberReport:
        return FiberReport(word=self.word.display(), rank=self.rank,
                           stabilized=self.stabilized, residual_max=self.residual_max)


def _normalized(candidates: Sequence[Operator], threshold: float) -> tuple[list[Operator], float]:
    basis, rejected = [], 0.0
    for c in candidates:
        n = linop.hs_norm(c)
        if n > threshold:
            basis.append(c / n)
        else:
            rejected = max(rejected, n)
    return basis, rejected


def _closure(builder: SpanBuilder, seeds: Sequence[Operator], projections: Sequence[Operator]) -> int:
    """Close span(builder) under left multiplication; returns the rank added."""
    start = builder.rank
    frontier = list(seeds)
    while frontier:
        added = []
        for b in frontier:
            for p in projections:
                candidate = p @ b
                if builder.add(candidate):
                    added.append(candidate)
        frontier = added
    return builder.rank - start


def _span_with(lattice: ProjectionLattice, sigma: Operator, threshold: float) -> tuple[list[Operator], float]:
    if lattice.commutative:
        return _normalized(lattice.atom_products(sigma), threshold)
    builder = SpanBuilder(lattice.dim, threshold)
    if builder.add(sigma):
        _closure(builder, builder.basis(), lattice.projections)
    return list(builder.basis()), builder.rejected_max


def _build_fiber(rep: Representation, t: Word, lattice: ProjectionLattice, next_lattice: ProjectionLattice,
                 threshold: float) -> FiberBasis:
    sigma = rep.evaluate(t)
    basis, rejected = _span_with(lattice, sigma, threshold)
    longer, _ = _span_with(next_lattice, sigma, threshold)
    # the longer span contains the shorter one, so equal rank means equal span
    stabilized = len(longer) == len(basis)
    return FiberBasis(word=t, basis=tuple(basis), dim=rep.dim, stabilized=stabilized,
                      residual_max=rejected, r_depth=lattice.r_depth, threshold=threshold)


@instrumented("fiber")
def fiber(rep: Representation, t: Word, r_depth: Optional[int] = None,
          threshold: Optional[float] = None) -> FiberBasis:
    """Orthonormal basis of span{e(r_1)⋯e(r_k)σ(t) : |r_i| <= r_depth}."""
    r_depth = 2 * len(t) + 2 if r_depth is None else r_depth
    threshold = SPAN_THRESHOLD if threshold is None else threshold
    F = _build_fiber(rep, t, lattice_for(rep, r_depth, threshold), lattice_for(rep, r_depth + 1, threshold),
                     threshold)
    log_structured("Fiber built", level="debug", word=t.display(), rank=F.rank,
                   r_depth=r_depth, stabilized=F.stabilized)
    return F


class FellBundle:
    def __init__(self, rep: Representation, r_depth: Optional[int] = None, threshold: Optional[float] = None,
                 max_growth: Optional[int] = None):
        self.rep = rep
        self.r_depth = r_depth
        self.threshold = SPAN_THRESHOLD if threshold is None else threshold
        self.max_growth = FIBER_MAX_GROWTH if max_growth is None else max_growth
        self._fibers: dict[tuple, FiberBasis] = {}
        self._walked: list[tuple[int, Operator]] = []
        self._walked_depth = -1
        self._lattices: dict[int, ProjectionLattice] = {}
        self._lock = threading.Lock()

    def _projections_up_to(self, r: int) -> list[Operator]:
        if r > self._walked_depth:
            # one walk also covers the r + 1 lattice used by the certificate
            self._walked = _distinct_by_length(self.rep.range_projections(r + 1), self.rep.dim)
            self._walked_depth = r + 1
        return [p for length, p in self._walked if length <= r]

    def lattice(self, r: int) -> ProjectionLattice:
        with self._lock:
            cached = self._lattices.get(r)
            if cached is None:
                cached = ProjectionLattice(self._projections_up_to(r), self.rep.dim, r, self.threshold)
                self._lattices[r] = cached
            return cached

    def fiber(self, t: Word, r_depth: Optional[int] = None) -> FiberBasis:
        t = t.over(self.rep.gens)
        base = r_depth if r_depth is not None else self.r_depth
        base = 2 * len(t) + 2 if base is None else base
        key = (t.letters, base)
        cached = self._fibers.get(key)
        if cached is not None:
            return cached
        r = base
        while True:
            F = _build_fiber(self.rep, t, self.lattice(r), self.lattice(r + 1), self.threshold)
            if F.stabilized or r >= base + self.max_growth:
                break
            r += 1
        with self._lock:
            return self._fibers.setdefault(key, F)


def _as_bundle(source: Union[FellBundle, Representation], r_depth: Optional[int]) -> FellBundle:
    if isinstance(source, FellBundle):
        return source
    return FellBundle(source, r_depth)


def _unit(A: Operator) -> Operator:
    n = linop.hs_norm(A)
    return A / n if n > 0 else A


def _random_combination(ops: Sequence[Operator], rng: np.random.Generator) -> Operator:
    c = rng.standard_normal(len(ops))
    return _unit(sum(ci * op for ci, op in zip(c, ops)))


def bilinear_products(left: Sequence[Operator], right: Sequence[Operator],
                      fn: Callable[[Operator, Operator], Operator] = np.matmul,
                      limit: Optional[int] = None, samples: int = 16) -> list[Operator]:
    """fn over all basis pairs, or over seeded random combinations above `limit` pairs."""
    limit = PAIR_LIMIT if limit is None else limit
    if not len(left) or not len(right):
        return []
    if len(left) * len(right) <= limit:
        return [fn(a, b) for a in left for b in right]
    rng = np.random.default_rng(0)
    return [fn(_random_combination(left, rng), _random_combination(right, rng)) for _ in range(samples)]


def _containment(candidates: Sequence[Operator], target: FiberBasis) -> float:
    res = span_residuals(candidates, target.basis, target.dim)
    return float(res.max()) if res.size else 0.0


def _pair(t: Word, s: Word) -> str:
    return f"({t.display()},{s.display()})"


@instrumented("check_bundle_axioms")
def check_bundle_axioms(source: Union[FellBundle, Representation], words: Sequence[Word],
                        r_depth: Optional[int] = None, tol: Optional[ToleranceConfig] = None,
                        max_product_length: Optional[int] = None) -> CheckReport:
    """B_t B_s ⊆ B_ts, B_t* ⊆ B_{t⁻¹} and σ(t) ∈ B_t for the listed words."""
    bundle = _as_bundle(source, r_depth)
    bound = bundle.threshold

    def products():
        for t in words:
            for s in words:
                if max_product_length is not None and len(t) + len(s) > max_product_length:
                    continue
                Bt, Bs, Bts = bundle.fiber(t), bundle.fiber(s), bundle.fiber(t * s)
                yield _pair(t, s), _containment(bilinear_products(Bt.basis, Bs.basis), Bts)

    def adjoints():
        for t in words:
            Bt, Binv = bundle.fiber(t), bundle.fiber(t.inverse())
            yield t.display(), _containment([linop.adjoint(b) for b in Bt.basis], Binv)

    def generators():
        for t in words:
            yield t.display(), bundle.fiber(t).residual(bundle.rep.evaluate(t))

    report = CheckReport()
    report.add(worst_result("bundle-product", products(), bound))
    report.add(worst_result("bundle-adjoint", adjoints(), bound))
    report.add(worst_result("bundle-contains-sigma", generators(), bound))
    unstable = [t.display() for t in words if not bundle.fiber(t).stabilized]
    if unstable:
        report.notes.append(f"fiber rank not stabilized for: {', '.join(unstable)}")
    return report


def _spans_back(bundle: FellBundle, t: Word, s: Word) -> float:
    Bt, Bs, Bts = bundle.fiber(t), bundle.fiber(s), bundle.fiber(t * s)
    if not Bts.rank:
        return 0.0
    # B_t·σ(s) ⊆ B_t·B_s is usually enough
    builder = SpanBuilder(bundle.rep.dim, bundle.threshold)
    sigma_s = bundle.rep.evaluate(s)
    for b in Bt.basis:
        builder.add(b @ sigma_s)
    back = span_residuals(Bts.basis, builder.basis(), Bts.dim)
    if float(back.max()) <= bundle.threshold:
        return float(back.max())
    for p in bilinear_products(Bt.basis, Bs.basis, samples=Bts.rank + 4):
        builder.add(p)
    return float(span_residuals(Bts.basis, builder.basis(), Bts.dim).max())


@instrumented("check_bundle_semisaturated")
def check_bundle_semisaturated(source: Union[FellBundle, Representation], pairs: Sequence[tuple[Word, Word]],
                               r_depth: Optional[int] = None, tol: Optional[ToleranceConfig] = None) -> CheckReport:
    """span(B_t·B_s) = B_ts whenever |ts| = |t| + |s|."""
    bundle = _as_bundle(source, r_depth)

    def residuals():
        for t, s in pairs:
            if not lengths_add(t, s):
                continue
            Bt, Bs, Bts = bundle.fiber(t), bundle.fiber(s), bundle.fiber(t * s)
            forward = _containment(bilinear_products(Bt.basis, Bs.basis), Bts)
            yield _pair(t, s), max(forward, _spans_back(bundle, t, s))

    report = CheckReport()
    report.add(worst_result("bundle-semi-saturated", residuals(), bundle.threshold))
    return report


@instrumented("check_bundle_orthogonal")
def check_bundle_orthogonal(source: Union[FellBundle, Representation], tol: Optional[ToleranceConfig] = None,
                            r_depth: Optional[int] = None) -> CheckReport:
    """b_x* b_y = 0 for basis elements of fibers over distinct generators."""
    bundle = _as_bundle(source, r_depth)
    tol = tol or ToleranceConfig()
    gens = [bundle.rep.gens.gen(label) for label in bundle.rep.gens.labels]

    def residuals():
        for x in gens:
            for y in gens:
                if x == y:
                    continue
                Bx, By = bundle.fiber(x), bundle.fiber(y)
                prods = bilinear_products(Bx.basis, By.basis, lambda a, b: linop.adjoint(a) @ b)
                yield _pair(x, y), max((linop.spectral_norm(p) for p in prods), default=0.0)

    report = CheckReport()
    report.add(worst_result("bundle-orthogonal", residuals(), tol.bound(1.0, 1.0)))
    return report


def _span_of(ops: Sequence[Operator], dim: int, threshold: float) -> tuple[Operator, ...]:
    builder = SpanBuilder(dim, threshold)
    for op in ops:
        builder.add(op)
    return builder.basis()


def _spans_products(ops: Sequence[Operator], left: Sequence[Operator], right: Sequence[Operator],
                    dim: int, threshold: float) -> bool:
    """span(ops) == span{a @ b : a in left, b in right}."""
    own = _span_of(ops, dim, threshold)
    sampled = bilinear_products(left, right)
    if sampled and float(span_residuals(sampled, own, dim).max()) > threshold:
        return False
    # produits contenus dans span(ops) : rang égal, espaces égaux
    builder = SpanBuilder(dim, threshold)
    for a in left:
        for b in right:
            builder.add(a @ b)
            if builder.rank == len(own):
                return True
    return builder.rank == len(own)


def is_tro(E: FiberBasis, tol: Optional[ToleranceConfig] = None) -> bool:
    """E E* E ⊆ E."""
    left = bilinear_products(E.basis, E.basis, lambda a, b: a @ linop.adjoint(b))
    triples = bilinear_products(left, E.basis)
    return _containment(triples, E) <= E.threshold


def _check_partial_isometry(u: Operator, tol: Optional[ToleranceConfig]):
    if not linop.is_partial_isometry(u, tol):
        raise InputError("u must be a partial isometry")


def tro_associated(u: Operator, E: FiberBasis, tol: Optional[ToleranceConfig] = None) -> bool:
    """span(u*E) = span(E*E) and span(uE*) = span(EE*)."""
    _check_partial_isometry(u, tol)
    u_star = linop.adjoint(u)
    adj = [linop.adjoint(b) for b in E.basis]
    return (_spans_products([u_star @ b for b in E.basis], adj, E.basis, E.dim, E.threshold)
            and _spans_products([u @ b for b in adj], E.basis, adj, E.dim, E.threshold))


def tro_strictly_associated(u: Operator, E: FiberBasis, tol: Optional[ToleranceConfig] = None) -> bool:
    if not tro_associated(u, E, tol):
        return False
    tol = tol or ToleranceConfig()
    joint = np.hstack(E.basis) if E.basis else np.zeros((E.dim, 1))
    gap = linop.residual(linop.range_projection(u), linop.range_projection(joint))
    return gap <= max(E.threshold, tol.bound(1.0, 1.0))


def _same_section_space(f: Section, g: Section):
    if f.gens != g.gens or f.dim != g.dim:
        raise InputError(f"Section mismatch: dims {f.dim}/{g.dim}, generators {f.gens!r}/{g.gens!r}")


def section_convolve(f: Section, g: Section) -> Section:
    """(f·g)(t) = Σ_s f(s) g(s⁻¹t)."""
    _same_section_space(f, g)
    values: dict[Word, Operator] = {}
    for s, fs in f.items():
        for u, gu in g.items():
            t = s * u
            values[t] = values.get(t, 0) + fs @ gu
    return Section(f.gens, f.dim, values)


def section_star(f: Section) -> Section:
    return Section(f.gens, f.dim, {t.inverse(): linop.adjoint(v) for t, v in f.items()})


def section_l1_norm(f: Section) -> float:
    return sum((linop.spectral_norm(v) for v in f.values.values()), 0.0)


def conditional_expectation(f: Section) -> Operator:
    return f[f.gens.identity()]


def _fiber_error(pf: ProjectionFamily, F: FiberBasis, n: int) -> float:
    a = a_map(pf, n)
    return max((linop.spectral_norm(b - averaging_map(a, F.word, b)) for b in F.basis), default=0.0)


@instrumented("fiber_convergence_study")
def fiber_convergence_study(pf: ProjectionFamily, F: FiberBasis, n_range, workers: Optional[int] = None,
                            max_bytes: Optional[int] = None) -> ConvergenceTable:
    ns = study_range(pf, F.word, n_range, max_bytes)

    workers = workers or WORKERS
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(lambda n: _fiber_error(pf, F, n), ns))
    else:
        errors = [_fiber_error(pf, F, n) for n in ns]
    return ConvergenceTable(word=F.word.display(), rows=[ConvergenceRow(n=n, error=e) for n, e in zip(ns, errors)])


@instrumented("check_fiber_factorization")
def check_fiber_factorization(bundle: FellBundle, F: FiberBasis, tol: Optional[ToleranceConfig] = None) -> CheckReport:
    """b = b·e(t⁻¹) = (bσ(t)*)σ(t) with bσ(t)* in the unit fiber, for b in B_t."""
    tol = tol or ToleranceConfig()
    rep, t = bundle.rep, F.word
    sigma = rep.evaluate(t)
    source = rep.e(t.inverse())
    unit = bundle.fiber(t.gens.identity(), r_depth=max(F.r_depth, len(t)))
    bound = tol.bound(1.0, 1.0)

    report = CheckReport()
    report.add(worst_result("factorization-source",
                            ((f"b{i}", linop.residual(b @ source, b)) for i, b in enumerate(F.basis)), bound))
    report.add(worst_result("factorization-through-unit",
                            ((f"b{i}", linop.residual(b @ linop.adjoint(sigma) @ sigma, b))
                             for i, b in enumerate(F.basis)), bound))
    report.add(worst_result("factorization-unit-fiber",
                            ((f"b{i}", unit.residual(b @ linop.adjoint(sigma))) for i, b in enumerate(F.basis)),
                            unit.threshold))
    return report

# PartialRep : produits des images le long du mot réduit
# TableRep : un opérateur par mot, pour les contre-exemples
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Protocol, Sequence

import numpy as np

from fellcheck import linop
from fellcheck.config import MAX_PRODUCTS
from fellcheck.exceptions import InputError, ResourceError
from fellcheck.freegroup import GeneratorSet, Word, enumerate_positive, lengths_add, pos_neg_decompose
from fellcheck.instrumentation import instrumented
from fellcheck.logging_config import log_structured
from fellcheck.models import CheckReport, CheckResult, ToleranceConfig, ValidationReport

Operator = linop.Operator


class Representation(Protocol):
    gens: GeneratorSet
    dim: int
    max_length: Optional[int]

    def evaluate(self, t: Word) -> Operator: ...

    def e(self, t: Word) -> Operator: ...

    def range_projections(self, max_length: int) -> Iterator[tuple[Word, Operator]]: ...


def _frozen(A: Operator) -> Operator:
    A = np.array(A)
    A.flags.writeable = False
    return A


@dataclass(frozen=True, eq=False)
class GeneratorFamily:
    gens: GeneratorSet
    images: tuple[Operator, ...]
    tol: ToleranceConfig = field(default_factory=ToleranceConfig)

    def __post_init__(self):
        if len(self.images) != self.gens.size:
            raise InputError(f"Expected {self.gens.size} images, got {len(self.images)}")
        images = tuple(_frozen(linop.as_operator(img)) for img in self.images)
        linop.same_dim(*images)
        for label, img in zip(self.gens.labels, images):
            if not linop.is_partial_isometry(img, self.tol):
                raise InputError(f"Image of generator {label!r} is not a partial isometry")
        object.__setattr__(self, "images", images)

    @classmethod
    def from_images(cls, images: Mapping[str, Operator], labels: Optional[Sequence[str]] = None,
                    tol: Optional[ToleranceConfig] = None) -> "GeneratorFamily":
        labels = list(labels) if labels is not None else list(images)
        missing = [label for label in labels if label not in images]
        if missing:
            raise InputError(f"Missing images for generators {missing}")
        return cls(GeneratorSet(tuple(labels)), tuple(images[label] for label in labels),
                   tol or ToleranceConfig())

    @property
    def dim(self) -> int:
        return self.images[0].shape[0]

    def image(self, label: str) -> Operator:
        return self.images[self.gens.index_of(label)]

    def restrict(self, labels: Sequence[str]) -> "GeneratorFamily":
        return GeneratorFamily.from_images({label: self.image(label) for label in labels}, labels, self.tol)


class PartialRep:
    """σ on arbitrary words: ordered products of generator images and adjoints."""

    max_length: Optional[int] = None

    def __init__(self, family: GeneratorFamily, validation: Optional[ValidationReport] = None):
        self.family = family
        self.gens = family.gens
        self.dim = family.dim
        self.validation = validation
        self._letters = {}
        for i, img in enumerate(family.images):
            self._letters[(i, 1)] = img
            self._letters[(i, -1)] = _frozen(linop.adjoint(img))
        self._sigma: dict[tuple, Operator] = {(): _frozen(np.eye(self.dim))}
        self._range: dict[tuple, Operator] = {}
        self._lock = threading.Lock()

    @classmethod
    def validated(cls, family: GeneratorFamily, max_product_length: int,
                  tol: Optional[ToleranceConfig] = None) -> "PartialRep":
        rep = cls(family)
        rep.validate(max_product_length, tol)
        return rep

    def validate(self, max_product_length: int, tol: Optional[ToleranceConfig] = None) -> ValidationReport:
        self.validation = validate_family(self.family, max_product_length, tol)
        return self.validation

    def __call__(self, t: Word) -> Operator:
        return self.evaluate(t)

    def evaluate(self, t: Word) -> Operator:
        letters = t.over(self.gens).letters
        cached = self._sigma.get(letters)
        if cached is not None:
            return cached
        # reprise depuis le plus long préfixe mémorisé
        k = len(letters) - 1
        while letters[:k] not in self._sigma:
            k -= 1
        value = self._sigma[letters[:k]]
        for j in range(k, len(letters)):
            value = _frozen(value @ self._letters[letters[j]])
            with self._lock:
                value = self._sigma.setdefault(letters[: j + 1], value)
        return value

    def e(self, t: Word) -> Operator:
        letters = t.over(self.gens).letters
        cached = self._range.get(letters)
        if cached is not None:
            return cached
        s = self.evaluate(t)
        value = _frozen(s @ linop.adjoint(s))
        with self._lock:
            return self._range.setdefault(letters, value)

    def range_projections(self, max_length: int) -> Iterator[tuple[Word, Operator]]:
        """e(r) for every word |r| <= max_length with σ(r) != 0, in canonical order."""
        # sans mémo ; les mots à σ nul ne sont pas prolongés
        frontier = [((), np.eye(self.dim))]
        for depth in range(max_length + 1):
            next_frontier = []
            for letters, sigma in frontier:
                yield Word(self.gens, letters), sigma @ linop.adjoint(sigma)
                if depth == max_length:
                    continue
                for i in range(self.gens.size):
                    for s in (1, -1):
                        if letters and letters[-1] == (i, -s):
                            continue
                        nxt = sigma @ self._letters[(i, s)]
                        if np.any(nxt):
                            next_frontier.append((letters + ((i, s),), nxt))
            frontier = next_frontier


class TableRep:
    """Explicit word → operator table, for representations not generated by their images."""

    def __init__(self, gens: GeneratorSet, table: Mapping[Word, Operator]):
        if not table:
            raise InputError("Table must not be empty")
        self.gens = gens
        self._table = {}
        for word, op in table.items():
            self._table[word.over(gens).letters] = _frozen(linop.as_operator(op))
        self.dim = linop.same_dim(*self._table.values())
        self.max_length = max(len(letters) for letters in self._table)
        self._range: dict[tuple, Operator] = {}
        self._lock = threading.Lock()

    def __call__(self, t: Word) -> Operator:
        return self.evaluate(t)

    def evaluate(self, t: Word) -> Operator:
        letters = t.over(self.gens).letters
        try:
            return self._table[letters]
        except KeyError:
            raise InputError(f"Word {t.display()!r} is not listed in the table") from None

    def e(self, t: Word) -> Operator:
        letters = t.over(self.gens).letters
        cached = self._range.get(letters)
        if cached is not None:
            return cached
        s = self.evaluate(t)
        value = _frozen(s @ linop.adjoint(s))
        with self._lock:
            return self._range.setdefault(letters, value)

    def words(self) -> list[Word]:
        return sorted((Word(self.gens, letters) for letters in self._table), key=Word.sort_key)

    def range_projections(self, max_length: int) -> Iterator[tuple[Word, Operator]]:
        for w in self.words():
            if len(w) <= max_length and np.any(self.evaluate(w)):
                yield w, self.e(w)


def evaluate(rep: Representation, t: Word) -> Operator:
    return rep.evaluate(t)


def _report_tol(tol: Optional[ToleranceConfig]) -> tuple[ToleranceConfig, float]:
    tol = tol or ToleranceConfig()
    return tol, tol.bound(1.0, 1.0)


def _pair(t: Word, s: Word) -> str:
    return f"({t.display()},{s.display()})"


def _product_label(labels: Sequence[str]) -> str:
    return "·".join(labels)


@instrumented("validate_family")
def validate_family(family: GeneratorFamily, max_product_length: int,
                    tol: Optional[ToleranceConfig] = None,
                    max_products: Optional[int] = None) -> ValidationReport:
    """Partial-isometry and commuting-range conditions on products from U ∪ U*, breadth-first."""
    if max_product_length < 1:
        raise InputError("max_product_length must be at least 1")
    tol, bound = _report_tol(tol or family.tol)
    budget = max_products or MAX_PRODUCTS

    letters = []
    for label, img in zip(family.gens.labels, family.images):
        letters.append((f"u_{label}", img))
        letters.append((f"u_{label}*", linop.adjoint(img)))

    seen: set[str] = set()
    range_keys: set[str] = set()
    ranges: list[tuple[str, Operator]] = []
    worst_pi, witness_pi = 0.0, None
    frontier: list[tuple[tuple[str, ...], Operator]] = [((), np.eye(family.dim))]

    for _ in range(max_product_length):
        next_frontier = []
        for labels, prod in frontier:
            for name, op in letters:
                w = prod @ op
                key = linop.operator_key(w)
                if key in seen:
                    continue
                seen.add(key)
                if len(seen) > budget:
                    raise ResourceError(f"validate_family exceeded {budget} distinct products")
                path = labels + (name,)
                next_frontier.append((path, w))

                gap = linop.residual(w @ linop.adjoint(w) @ w, w)
                if gap > worst_pi:
                    worst_pi = gap
                    if gap > bound and witness_pi is None:
                        witness_pi = _product_label(path)

                proj = w @ linop.adjoint(w)
                pkey = linop.operator_key(proj)
                if pkey not in range_keys:
                    range_keys.add(pkey)
                    ranges.append((_product_label(path), proj))
        frontier = next_frontier

    commute_gap, pair = linop.commuting_certificate([p for _, p in ranges], tol)

    report = ValidationReport(max_product_length=max_product_length, distinct_products=len(seen))
    report.add(CheckResult(name="products-partial-isometry", residual=worst_pi, tolerance=bound,
                           witness=witness_pi))
    report.add(CheckResult(
        name="range-projections-commute", residual=commute_gap, tolerance=bound,
        witness=f"({ranges[pair[0]][0]}, {ranges[pair[1]][0]})" if pair else None,
    ))
    report.notes.append(
        f"products of length <= {max_product_length} checked ({len(seen)} distinct); "
        "longer products are not covered"
    )
    log_structured("Family validated", level="debug", accepted=report.accepted,
                   distinct_products=len(seen), max_product_length=max_product_length)
    return report


def worst_result(name: str, items: Iterable[tuple[str, float]], bound: float, max_witnesses: int = 3) -> CheckResult:
    worst, failing = 0.0, []
    for label, value in items:
        worst = max(worst, value)
        if value > bound:
            failing.append(label)
    witness = None
    if failing:
        witness = "; ".join(failing[:max_witnesses]) + ("; ..." if len(failing) > max_witnesses else "")
    return CheckResult(name=name, residual=worst, tolerance=bound, witness=witness)


def _fits(rep: Representation, *words: Word) -> bool:
    return rep.max_length is None or all(len(w) <= rep.max_length for w in words)


@instrumented("check_axioms")
def check_axioms(rep: Representation, words: Sequence[Word], tol: Optional[ToleranceConfig] = None) -> CheckReport:
    tol, bound = _report_tol(tol)
    dim = rep.dim

    def product_residuals():
        for t in words:
            for s in words:
                ts, s_inv = t * s, s.inverse()
                if not _fits(rep, ts, s_inv):
                    continue
                lhs = rep.evaluate(t) @ rep.evaluate(s) @ rep.evaluate(s_inv)
                rhs = rep.evaluate(ts) @ rep.evaluate(s_inv)
                yield _pair(t, s), linop.residual(lhs, rhs)

    def adjoint_residuals():
        for t in words:
            yield t.display(), linop.residual(rep.evaluate(t.inverse()), linop.adjoint(rep.evaluate(t)))

    def commutation_residuals():
        for t in words:
            for s in words:
                ts = t * s
                if not _fits(rep, ts):
                    continue
                sigma = rep.evaluate(t)
                yield _pair(t, s), linop.residual(sigma @ rep.e(s), rep.e(ts) @ sigma)

    eps = rep.gens.identity()
    report = CheckReport()
    report.add(worst_result("axiom-product", product_residuals(), bound))
    report.add(worst_result("axiom-adjoint", adjoint_residuals(), bound))
    report.add(worst_result("axiom-unit", [("ε", linop.residual(rep.evaluate(eps), np.eye(dim)))], bound))
    report.add(worst_result("axiom-commutation", commutation_residuals(), bound))
    return report


def orthogonality_check(rep: Representation, tol: Optional[ToleranceConfig] = None) -> CheckResult:
    _, bound = _report_tol(tol)
    gens = [rep.gens.gen(label) for label in rep.gens.labels]

    def residuals():
        for x in gens:
            for y in gens:
                if x != y:
                    yield _pair(x, y), linop.spectral_norm(linop.adjoint(rep.evaluate(x)) @ rep.evaluate(y))

    return worst_result("orthogonal", residuals(), bound)


@instrumented("is_orthogonal")
def is_orthogonal(rep: Representation, tol: Optional[ToleranceConfig] = None) -> bool:
    return orthogonality_check(rep, tol).passed


def length_additive_pairs(rep: Representation, words: Sequence[Word]) -> list[tuple[Word, Word]]:
    return [(t, s) for t in words for s in words if lengths_add(t, s) and _fits(rep, t * s)]


def semisaturation_check(rep: Representation, pairs: Sequence[tuple[Word, Word]],
                         tol: Optional[ToleranceConfig] = None) -> CheckResult:
    _, bound = _report_tol(tol)

    def residuals():
        for t, s in pairs:
            if not lengths_add(t, s):
                continue
            yield _pair(t, s), linop.residual(rep.evaluate(t) @ rep.evaluate(s), rep.evaluate(t * s))

    return worst_result("semi-saturated", residuals(), bound)


@instrumented("is_semisaturated")
def is_semisaturated(rep: Representation, sample: Sequence[tuple[Word, Word]],
                     tol: Optional[ToleranceConfig] = None) -> bool:
    return semisaturation_check(rep, sample, tol).passed


def _precondition_notes(rep: Representation, words: Sequence[Word], tol: ToleranceConfig) -> list[str]:
    notes = []
    if not orthogonality_check(rep, tol).passed:
        notes.append("precondition failed: representation is not orthogonal")
    if not semisaturation_check(rep, length_additive_pairs(rep, words), tol).passed:
        notes.append("precondition failed: representation is not semi-saturated")
    return notes


@instrumented("check_posneg_vanishing")
def check_posneg_vanishing(rep: Representation, words: Sequence[Word],
                           tol: Optional[ToleranceConfig] = None) -> CheckReport:
    """σ(t) vanishes on every word that is not of the form μν⁻¹."""
    tol, bound = _report_tol(tol)
    report = CheckReport(notes=_precondition_notes(rep, words, tol))
    targets = [t for t in words if pos_neg_decompose(t) is None]
    report.add(worst_result(
        "posneg-vanishing",
        ((t.display(), linop.spectral_norm(rep.evaluate(t))) for t in targets),
        bound,
    ))
    report.notes.append(f"{len(targets)} of {len(words)} words are not of the form μν⁻¹")
    return report


@instrumented("check_positive_orthogonality")
def check_positive_orthogonality(rep: Representation, k: int,
                                 tol: Optional[ToleranceConfig] = None) -> CheckReport:
    """σ(α)*σ(β) = 0 for distinct positive α, β of the same length k."""
    if k < 1:
        raise InputError("k must be at least 1")
    tol, bound = _report_tol(tol)
    level = enumerate_positive(rep.gens, k)
    report = CheckReport(notes=_precondition_notes(rep, level, tol))

    def residuals():
        for a in level:
            for b in level:
                if a != b:
                    yield _pair(a, b), linop.spectral_norm(linop.adjoint(rep.evaluate(a)) @ rep.evaluate(b))

    report.add(worst_result(f"positive-orthogonality-{k}", residuals(), bound))
    return report

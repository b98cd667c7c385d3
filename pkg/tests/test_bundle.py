from unittest.mock import patch

import numpy as np
import pytest

from fellcheck import linop
from fellcheck.approx import ProjectionFamily, Section, convergence_study
from fellcheck.bundle import (
    FellBundle,
    ProjectionLattice,
    SpanBuilder,
    bilinear_products,
    check_bundle_axioms,
    check_bundle_orthogonal,
    check_bundle_semisaturated,
    check_fiber_factorization,
    conditional_expectation,
    fiber,
    fiber_convergence_study,
    is_tro,
    section_convolve,
    section_l1_norm,
    section_star,
    span_residuals,
    tro_associated,
    tro_strictly_associated,
)
from fellcheck.exceptions import InputError, VanishingWordError
from fellcheck.fixtures import tree_rep
from fellcheck.freegroup import lengths_add, pos_neg_decompose, words_up_to
from fellcheck.prep import GeneratorFamily, PartialRep
from tests.oracles import random_unitary

UNIT = np.array([[0.0, 1.0], [0.0, 0.0]])
HALF_ONES = np.full((2, 2), 0.5)


def random_section(gens, dim, rng, max_length=1):
    return Section(gens, dim, {w: rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
                               for w in words_up_to(gens, max_length)})


def test_fiber_ranks_on_trees(tree1, tree2, xy):
    assert fiber(tree1, xy.parse("x")).rank == 1
    assert fiber(tree2, xy.parse("x")).rank == 3
    assert fiber(tree2, xy.identity()).rank == 7
    empty = fiber(tree2, xy.parse("x^-1.y"))
    assert empty.rank == 0
    assert empty.stabilized


def test_fiber_basis_is_orthonormal_and_contains_sigma(tree2, xy):
    for text in ("x", "x.y^-1", "y.x"):
        t = xy.parse(text)
        F = fiber(tree2, t)
        assert np.allclose(F.gram(), np.eye(F.rank), atol=1e-12)
        assert F.contains(tree2.evaluate(t))


def test_fiber_certificate_detects_short_depth(tree2, xy):
    short = fiber(tree2, xy.parse("x"), r_depth=0)
    assert short.rank == 1
    assert not short.stabilized


def test_bundle_grows_until_stable(tree2, xy):
    bundle = FellBundle(tree2, r_depth=0)
    F = bundle.fiber(xy.parse("x"))
    assert F.stabilized
    assert F.rank == 3
    assert F.r_depth == 2
    assert bundle.fiber(xy.parse("x")) is F


def test_bundle_respects_growth_limit(tree2, xy):
    F = FellBundle(tree2, r_depth=0, max_growth=0).fiber(xy.parse("x"))
    assert not F.stabilized
    assert F.rank == 1


def test_unit_fiber_is_diagonal_algebra(tree3, xy):
    F = FellBundle(tree3).fiber(xy.identity(), r_depth=3)
    assert F.rank == tree3.dim
    for i in range(tree3.dim):
        D = np.zeros((tree3.dim, tree3.dim))
        D[i, i] = 1.0
        assert F.contains(D)
    assert not F.contains(tree3.evaluate(xy.parse("x")))


def test_span_builder_is_order_independent(rng):
    dim = 3
    base = [rng.standard_normal((dim, dim)) for _ in range(4)]
    candidates = base + [base[0] + 2 * base[1], base[2] - base[3], np.zeros((dim, dim))]
    forward, backward = SpanBuilder(dim), SpanBuilder(dim)
    for A in candidates:
        forward.add(A)
    for A in reversed(candidates):
        backward.add(A)
    assert forward.rank == backward.rank == 4
    assert span_residuals(forward.basis(), backward.basis(), dim).max() <= 1e-10


def test_span_residuals_of_outside_element():
    builder = SpanBuilder(2)
    builder.add(np.diag([1.0, 0.0]))
    res = span_residuals([np.diag([1.0, 0.0]), np.diag([0.0, 3.0])], builder.basis(), 2)
    assert res[0] == pytest.approx(0.0, abs=1e-14)
    assert res[1] == pytest.approx(3.0)
    assert span_residuals([], builder.basis(), 2).size == 0


def test_lattice_atoms_of_rotated_projections():
    W = random_unitary(4, np.random.default_rng(3))
    P1, P2 = np.diag([1.0, 1.0, 0.0, 0.0]), np.diag([1.0, 0.0, 1.0, 0.0])
    lattice = ProjectionLattice([W @ P @ W.conj().T for P in (P1, P2)], 4, 1)
    assert lattice.commutative
    assert len(lattice.groups) == 4
    products = lattice.atom_products(np.eye(4))
    for i, A in enumerate(products):
        for B in products[i + 1:]:
            assert abs(np.vdot(A, B)) <= 1e-10
    assert np.allclose(sum(products), np.eye(4), atol=1e-10)


def test_lattice_of_non_commuting_projections():
    lattice = ProjectionLattice([np.diag([1.0, 0.0]), HALF_ONES], 2, 1)
    assert not lattice.commutative
    assert ProjectionLattice([], 3, 0).groups[0].tolist() == [0, 1, 2]


def test_fiber_without_commuting_ranges(xy):
    rep = PartialRep(GeneratorFamily.from_images({"x": UNIT, "y": HALF_ONES}))
    F = fiber(rep, xy.parse("x"), r_depth=1)
    assert F.rank == 2
    assert F.stabilized
    assert np.allclose(F.gram(), np.eye(2), atol=1e-12)
    assert F.contains(UNIT)
    assert not F.contains(np.diag([1.0, 0.0]))


def test_bilinear_products_sampling(rng):
    left = [rng.standard_normal((2, 2)) for _ in range(5)]
    right = [rng.standard_normal((2, 2)) for _ in range(6)]
    assert len(bilinear_products(left, right, limit=30)) == 30
    sampled = bilinear_products(left, right, limit=29, samples=7)
    assert len(sampled) == 7
    assert bilinear_products([], right) == []
    again = bilinear_products(left, right, limit=29, samples=7)
    assert all(np.array_equal(a, b) for a, b in zip(sampled, again))


def test_bundle_axioms_on_tree(tree2, xy):
    report = check_bundle_axioms(tree2, words_up_to(xy, 2), max_product_length=2)
    assert report.passed
    assert [c.name for c in report.checks] == ["bundle-product", "bundle-adjoint", "bundle-contains-sigma"]
    assert not report.notes


def test_bundle_orthogonal_and_semisaturated_on_tree(tree2, xy):
    assert check_bundle_orthogonal(tree2).passed
    listed = words_up_to(xy, 1)
    pairs = [(t, s) for t in listed for s in listed if lengths_add(t, s)]
    assert check_bundle_semisaturated(tree2, pairs).passed


def test_bundle_orthogonal_fails_for_shared_ranges(xy):
    rep = PartialRep(GeneratorFamily.from_images({"x": np.eye(2), "y": np.eye(2)}))
    result = check_bundle_orthogonal(rep).checks[0]
    assert not result.passed
    assert result.witness.startswith("(x,y)")


def test_fibers_stabilize_on_deeper_tree(tree4, xy):
    bundle = FellBundle(tree4)
    for t in words_up_to(xy, 2):
        assert bundle.fiber(t).stabilized


def test_fibers_are_strictly_associated_tros(tree4, xy):
    bundle = FellBundle(tree4)
    for t in words_up_to(xy, 2):
        if pos_neg_decompose(t) is None:
            continue
        F = bundle.fiber(t)
        assert is_tro(F)
        assert tro_strictly_associated(tree4.evaluate(t), F)


def test_tro_association_on_large_unit_fiber(tree4, xy):
    F = fiber(tree4, xy.identity(), r_depth=4)
    assert F.rank == 31
    with patch("fellcheck.bundle.bilinear_products", wraps=bilinear_products) as products:
        assert tro_strictly_associated(np.eye(31), F)
    assert products.call_count == 2
    assert not tro_associated(np.diag([1.0] * 15 + [0.0] * 16), F)


def test_zero_partial_isometry_is_not_associated(tree2, xy):
    F = FellBundle(tree2).fiber(xy.parse("x"))
    assert not tro_associated(np.zeros((7, 7)), F)
    with pytest.raises(InputError):
        tro_associated(2 * np.eye(7), F)


def test_empty_fiber_is_associated_with_zero(tree2, xy):
    F = FellBundle(tree2).fiber(xy.parse("x^-1.y"))
    assert tro_strictly_associated(np.zeros((7, 7)), F)


@pytest.mark.parametrize("seed", range(20))
def test_convolution_is_associative(xy, seed):
    rng = np.random.default_rng(seed)
    f, g, h = (random_section(xy, 2, rng, max_length=int(rng.integers(1, 3))) for _ in range(3))
    left = section_convolve(section_convolve(f, g), h)
    right = section_convolve(f, section_convolve(g, h))
    assert set(left.values) == set(right.values)
    for t in left.support:
        assert np.allclose(left[t], right[t], atol=1e-10)


def test_l1_norm_is_submultiplicative(xy, rng):
    for _ in range(20):
        f, g = random_section(xy, 2, rng), random_section(xy, 2, rng)
        assert section_l1_norm(section_convolve(f, g)) <= section_l1_norm(f) * section_l1_norm(g) * (1 + 1e-12)


def test_star_is_an_involution(xy, rng):
    f = random_section(xy, 2, rng)
    back = section_star(section_star(f))
    assert all(np.array_equal(back[t], f[t]) for t in f.support)
    assert section_star(f)[xy.parse("x^-1")].shape == (2, 2)


def test_conditional_expectation_is_positive(xy):
    for seed in range(100):
        f = random_section(xy, 3, np.random.default_rng(seed))
        E = conditional_expectation(section_convolve(section_star(f), f))
        assert np.allclose(E, E.conj().T, atol=1e-10)
        assert np.linalg.eigvalsh((E + E.conj().T) / 2).min() >= -1e-10
        hs = sum(linop.hs_norm(v) ** 2 for v in f.values.values())
        assert np.trace(E).real == pytest.approx(hs, rel=1e-10)


def test_conditional_expectation_of_zero_section(xy):
    for zero in (Section(xy, 3), Section(xy, 3, {xy.parse("x"): np.zeros((3, 3))})):
        assert zero.support == []
        E = conditional_expectation(section_convolve(section_star(zero), zero))
        assert not np.any(E)


def test_section_mismatch(xy, rng):
    with pytest.raises(InputError):
        section_convolve(random_section(xy, 2, rng), random_section(xy, 3, rng))


def test_fiber_convergence_matches_sigma_on_tree(xy):
    rep = PartialRep(tree_rep(2, 5))
    pf = ProjectionFamily(rep, 5)
    t = xy.parse("x")
    table = fiber_convergence_study(pf, FellBundle(rep).fiber(t), range(1, 5))
    assert table.errors() == pytest.approx([1 / n for n in range(1, 5)], abs=1e-10)
    assert table.errors() == pytest.approx(convergence_study(pf, t, range(1, 5)).errors(), abs=1e-10)


def test_fiber_convergence_rejects_vanishing_word(tree2, xy):
    F = FellBundle(tree2).fiber(xy.parse("x^-1.y"))
    with pytest.raises(VanishingWordError):
        fiber_convergence_study(ProjectionFamily(tree2, 2), F, range(1, 2))


def test_fiber_factorization(tree3, xy):
    bundle = FellBundle(tree3)
    for text in ("x", "x.y^-1"):
        assert check_fiber_factorization(bundle, bundle.fiber(xy.parse(text))).passed


def test_fiber_report_fields(tree2, xy):
    report = FellBundle(tree2).fiber(xy.parse("x")).report()
    assert report.model_dump() == {"word": "x", "rank": 3, "stabilized": True, "residual_max": 0.0}

import pytest

from fellcheck.envelope import envelope_for, representation_from_envelope
from fellcheck.exceptions import InputError
from fellcheck.fixtures import TABLE_LENGTH, parity_rep, tree_rep
from fellcheck.prep import PartialRep
from fellcheck.services.verification import axiom_word_length, projection_depth, run_verification


def test_axiom_word_length():
    assert [axiom_word_length(d) for d in range(1, 7)] == [1, 1, 2, 2, 3, 3]


def test_projection_depth_is_capped_by_tables(tree2, parity):
    assert projection_depth(tree2, 5) == 5
    assert projection_depth(parity, 5) == TABLE_LENGTH // 2


def test_run_verification_records_validation(tree2):
    assert tree2.validation is None
    report = run_verification(tree2, 3)
    assert report.passed
    assert tree2.validation.max_product_length == 4
    assert tree2.validation.accepted
    assert report.get("products-partial-isometry").passed


def test_envelope_rep_is_validated():
    rep = representation_from_envelope(envelope_for(tree_rep(2, 2), depth=2))
    assert isinstance(rep, PartialRep)
    assert rep.validation.max_product_length == 1
    assert rep.validation.accepted


def test_deep_verify_on_table_stays_inside_the_table(parity):
    report = run_verification(parity, 9)
    assert any(f"limited to length {TABLE_LENGTH}" in note for note in report.notes)
    assert not report.get("semi-saturated").passed
    assert report.get("axiom-product").passed


def test_table_envelope_skips_validation():
    rep = representation_from_envelope(envelope_for(parity_rep()))
    assert rep.max_length == TABLE_LENGTH
    assert run_verification(rep, 3).notes[0] == "full-table input: generator family validation skipped"


def test_run_verification_rejects_zero_depth(tree2):
    with pytest.raises(InputError):
        run_verification(tree2, 0)

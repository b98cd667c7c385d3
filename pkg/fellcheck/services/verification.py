from typing import Optional

from fellcheck import __version__
from fellcheck.approx import ProjectionFamily, check_projection_relations, check_sum_identities
from fellcheck.bundle import FellBundle, check_bundle_axioms, check_bundle_orthogonal, check_bundle_semisaturated
from fellcheck.exceptions import InputError
from fellcheck.freegroup import words_up_to
from fellcheck.logging_config import log_structured
from fellcheck.models import CheckReport, Provenance, ToleranceConfig
from fellcheck.prep import (
    PartialRep,
    Representation,
    check_axioms,
    length_additive_pairs,
    orthogonality_check,
    semisaturation_check,
)

# longueur cumulée maximale des mots dont on multiplie les fibres
BUNDLE_PRODUCT_LENGTH = 2


def axiom_word_length(depth: int) -> int:
    """Words of length <= ceil(depth / 2), so that |t| + |s| <= depth."""
    return max(1, (depth + 1) // 2)


def projection_depth(rep: Representation, depth: int) -> int:
    # une table ne fixe e, f et P_k qu'aux niveaux dont elle liste les produits
    if rep.max_length is None:
        return depth
    return max(1, min(depth, rep.max_length // 2))


def run_verification(rep: Representation, depth: int, tol: Optional[ToleranceConfig] = None,
                     r_depth: int = 2, input_sha256: Optional[str] = None) -> CheckReport:
    if depth < 1:
        raise InputError("depth must be at least 1")
    tol = tol or ToleranceConfig()
    report = CheckReport(provenance=Provenance(input_sha256=input_sha256, tool_version=__version__))
    length = axiom_word_length(depth)
    if rep.max_length is not None and length > rep.max_length:
        length = rep.max_length
        report.notes.append(f"axiom words limited to length {length} by the table")
    words = words_up_to(rep.gens, length)

    if isinstance(rep, PartialRep):
        report.extend(rep.validate(2 * length, tol))
    else:
        report.notes.append("full-table input: generator family validation skipped")
    log_structured("Stage done", level="info", stage="validate_family")

    report.extend(check_axioms(rep, words, tol))
    report.add(orthogonality_check(rep, tol))
    report.add(semisaturation_check(rep, length_additive_pairs(rep, words), tol))
    log_structured("Stage done", level="info", stage="axioms")

    pf = ProjectionFamily(rep, projection_depth(rep, depth))
    if pf.depth < depth:
        report.notes.append(f"projection checks limited to depth {pf.depth} by the table")
    report.extend(check_projection_relations(pf, words, tol))
    report.extend(check_sum_identities(pf, tol))
    log_structured("Stage done", level="info", stage="projections", depth=pf.depth)

    bundle = FellBundle(rep, r_depth)
    bundle_words = [w for w in words_up_to(rep.gens, BUNDLE_PRODUCT_LENGTH)
                    if rep.max_length is None or len(w) <= rep.max_length]
    pairs = [(t, s) for t, s in length_additive_pairs(rep, bundle_words)
             if len(t) + len(s) <= BUNDLE_PRODUCT_LENGTH]
    report.extend(check_bundle_axioms(bundle, bundle_words, tol=tol, max_product_length=BUNDLE_PRODUCT_LENGTH))
    report.extend(check_bundle_orthogonal(bundle, tol))
    report.extend(check_bundle_semisaturated(bundle, pairs, tol=tol))
    log_structured("Stage done", level="info", stage="bundle", r_depth=r_depth)

    log_structured("Verification finished", level="info", **report.summary)
    return report

# Matrices en listes de lignes de paires [re, im] ; repr flottante la plus courte, dump -> load sans perte
import hashlib
import json
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError

from fellcheck.exceptions import InputError, ParseError
from fellcheck.freegroup import GeneratorSet
from fellcheck.logging_config import log_structured
from fellcheck.models import FixtureSpec, MatrixJSON, RepEnvelope, ToleranceConfig
from fellcheck.prep import GeneratorFamily, PartialRep, TableRep

Representation = Union[PartialRep, TableRep]

# longueur des produits validés au chargement; verify la relève
ENVELOPE_PRODUCT_LENGTH = 1


def encode_matrix(A) -> MatrixJSON:
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def decode_matrix(M: MatrixJSON) -> np.ndarray:
    arr = np.asarray(M, dtype=float)
    if not np.any(arr[..., 1]):
        return arr[..., 0].copy()
    return arr[..., 0] + 1j * arr[..., 1]


def parse_envelope(text: Union[str, bytes]) -> RepEnvelope:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON: {exc}") from exc
    try:
        return RepEnvelope.model_validate(data)
    except ValidationError as exc:
        raise ParseError(f"Invalid representation envelope: {exc}") from exc


def load_envelope(path: str) -> tuple[RepEnvelope, str]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ParseError(f"Cannot read {path!r}: {exc}") from exc
    return parse_envelope(raw), hashlib.sha256(raw).hexdigest()


def effective_tolerance(env: RepEnvelope, atol: Optional[float] = None,
                        rtol: Optional[float] = None) -> ToleranceConfig:
    """Command-line values override the envelope, which overrides the defaults."""
    base = env.tolerance or ToleranceConfig()
    try:
        return ToleranceConfig(atol=base.atol if atol is None else atol,
                               rtol=base.rtol if rtol is None else rtol)
    except ValidationError as exc:
        raise InputError(f"Invalid tolerance: {exc}") from exc


def family_from_envelope(env: RepEnvelope, tol: Optional[ToleranceConfig] = None) -> GeneratorFamily:
    if env.mode != "generators":
        raise InputError("Envelope is a full table; it has no generator family")
    images = {label: decode_matrix(env.matrices[label]) for label in env.generators}
    return GeneratorFamily.from_images(images, env.generators, tol or env.tolerance)


def representation_from_envelope(env: RepEnvelope, tol: Optional[ToleranceConfig] = None) -> Representation:
    if env.mode == "generators":
        rep = PartialRep.validated(family_from_envelope(env, tol), ENVELOPE_PRODUCT_LENGTH, tol or env.tolerance)
        if not rep.validation.accepted:
            log_structured("Generator family failed validation", level="warning",
                           failed=[c.name for c in rep.validation.checks if not c.passed])
        return rep
    gens = GeneratorSet(tuple(env.generators))
    table = {}
    for key, matrix in env.table.items():
        try:
            word = gens.parse(key)
        except InputError as exc:
            raise ParseError(f"Table key {key!r}: {exc}") from exc
        table[word] = decode_matrix(matrix)
    return TableRep(gens, table)


def envelope_for(source: Union[GeneratorFamily, TableRep], depth: Optional[int] = None,
                 spec: Optional[FixtureSpec] = None, tol: Optional[ToleranceConfig] = None) -> RepEnvelope:
    if isinstance(source, GeneratorFamily):
        return RepEnvelope(
            dim=source.dim,
            generators=list(source.gens.labels),
            matrices={label: encode_matrix(img) for label, img in zip(source.gens.labels, source.images)},
            tolerance=tol, depth=depth, fixture=spec,
        )
    return RepEnvelope(
        dim=source.dim,
        generators=list(source.gens.labels),
        mode="full-table",
        table={str(w): encode_matrix(source.evaluate(w)) for w in source.words()},
        tolerance=tol, depth=depth, fixture=spec,
    )


def dump_envelope(env: RepEnvelope) -> str:
    return json.dumps(env.model_dump(exclude_none=True), indent=2) + "\n"


def dump_json(payload) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"

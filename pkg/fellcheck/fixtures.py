# Base indexée par les mots positifs (racine ε), longueur d'abord ; x agit par préfixe
import json
import os
from typing import Optional, Sequence, Union

import numpy as np

from fellcheck.config import DIM_CAP
from fellcheck.exceptions import InputError, ParseError, ResourceError
from fellcheck.freegroup import GeneratorSet, words_up_to
from fellcheck.logging_config import log_structured
from fellcheck.models import FixtureSpec
from fellcheck.prep import GeneratorFamily, TableRep

SHORT_LABELS = ("x", "y", "z", "w")

# words listed in the parity and delta tables
TABLE_LENGTH = 4


def default_labels(m: int) -> tuple[str, ...]:
    if m < 1:
        raise InputError("m must be at least 1")
    if m <= len(SHORT_LABELS):
        return SHORT_LABELS[:m]
    return tuple(f"g{i}" for i in range(1, m + 1))


def _labels(m: int, labels: Optional[Sequence[str]]) -> tuple[str, ...]:
    if labels is None:
        return default_labels(m)
    labels = tuple(labels)
    if len(labels) != m:
        raise InputError(f"Expected {m} labels, got {len(labels)}")
    return labels


def _cap(dim: int, dim_cap: Optional[int]):
    cap = DIM_CAP if dim_cap is None else dim_cap
    if dim > cap:
        raise ResourceError(f"Fixture dimension {dim} exceeds the cap {cap} (set FELL_DIM_CAP to raise it)")


def _admissible_count(A: np.ndarray, L: int) -> int:
    # admissible words of each length, counted by head letter
    by_head = np.ones(A.shape[0], dtype=object)
    total = 1 + int(by_head.sum())
    for _ in range(L - 1):
        by_head = A.astype(object) @ by_head
        total += int(by_head.sum())
    return total


def _admissible_words(A: np.ndarray, L: int) -> list[tuple[int, ...]]:
    """A-admissible index sequences of length <= L, length then lexicographic."""
    m = A.shape[0]
    words: list[tuple[int, ...]] = [()]
    level: list[tuple[int, ...]] = [()]
    for _ in range(L):
        level = [(i,) + w for w in level for i in range(m) if not w or A[i, w[0]]]
        level.sort()
        words.extend(level)
    return words


def _shift_family(labels: tuple[str, ...], basis: list[tuple[int, ...]], A: np.ndarray, L: int) -> GeneratorFamily:
    index = {w: j for j, w in enumerate(basis)}
    dim = len(basis)
    images = {}
    for i, label in enumerate(labels):
        S = np.zeros((dim, dim))
        for w, j in index.items():
            if len(w) < L and (not w or A[i, w[0]]):
                S[index[(i,) + w], j] = 1.0
        images[label] = S
    return GeneratorFamily.from_images(images, labels)


def tree_rep(m: int, L: int, labels: Optional[Sequence[str]] = None,
             dim_cap: Optional[int] = None) -> GeneratorFamily:
    if m < 1 or L < 1:
        raise InputError("tree fixture needs m >= 1 and L >= 1")
    dim = L + 1 if m == 1 else (m ** (L + 1) - 1) // (m - 1)
    _cap(dim, dim_cap)
    A = np.ones((m, m), dtype=int)
    family = _shift_family(_labels(m, labels), _admissible_words(A, L), A, L)
    log_structured("Fixture built", level="debug", kind="tree", m=m, L=L, dim=dim)
    return family


def ck_rep(A, L: int, labels: Optional[Sequence[str]] = None,
           dim_cap: Optional[int] = None) -> GeneratorFamily:
    """Prepend shifts where x_i may precede head x_j only when A[i, j] = 1."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InputError(f"Adjacency matrix must be square, got shape {A.shape}")
    if not np.isin(A, (0, 1)).all():
        raise InputError("Adjacency matrix entries must be 0 or 1")
    A = A.astype(int)
    zero_rows = [i for i in range(A.shape[0]) if not A[i].any()]
    if zero_rows:
        raise InputError(f"Adjacency matrix has zero rows: {zero_rows}")
    if L < 1:
        raise InputError("ck fixture needs L >= 1")
    _cap(_admissible_count(A, L), dim_cap)
    m = A.shape[0]
    family = _shift_family(_labels(m, labels), _admissible_words(A, L), A, L)
    log_structured("Fixture built", level="debug", kind="ck", m=m, L=L, dim=family.dim)
    return family


def _scalar_table(gens: GeneratorSet, value, max_length: int) -> TableRep:
    return TableRep(gens, {w: np.array([[value(w)]]) for w in words_up_to(gens, max_length)})


def parity_rep(labels: Sequence[str] = ("x", "y"), max_length: int = TABLE_LENGTH) -> TableRep:
    """σ(t) = 1 when |t| is even, else 0, on the one-dimensional space."""
    return _scalar_table(GeneratorSet(tuple(labels)), lambda w: 1.0 if len(w) % 2 == 0 else 0.0, max_length)


def delta_rep(labels: Sequence[str] = ("x", "y"), max_length: int = TABLE_LENGTH) -> TableRep:
    return _scalar_table(GeneratorSet(tuple(labels)), lambda w: 1.0 if w.is_identity() else 0.0, max_length)


def random_partial_isometry(dim: int, rng: np.random.Generator) -> np.ndarray:
    """U[:, :r] Vh[:r] from the SVD of a complex Gaussian matrix, r uniform in 1..dim."""
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    U, _, Vh = np.linalg.svd(G)
    r = int(rng.integers(1, dim + 1))
    return U[:, :r] @ Vh[:r]


def random_family(dim: int, m: int, seed: int, labels: Optional[Sequence[str]] = None,
                  dim_cap: Optional[int] = None) -> GeneratorFamily:
    if dim < 1 or m < 1:
        raise InputError("random family needs dim >= 1 and m >= 1")
    _cap(dim, dim_cap)
    rng = np.random.default_rng(seed)
    names = _labels(m, labels)
    return GeneratorFamily.from_images({label: random_partial_isometry(dim, rng) for label in names}, names)


Fixture = Union[GeneratorFamily, TableRep]


def build_fixture(spec: FixtureSpec, dim_cap: Optional[int] = None) -> Fixture:
    if spec.kind == "tree":
        return tree_rep(spec.m, spec.L, dim_cap=dim_cap)
    if spec.kind == "ck":
        return ck_rep(spec.A, spec.L, dim_cap=dim_cap)
    if spec.kind == "parity":
        return parity_rep(default_labels(spec.m), max(spec.L, TABLE_LENGTH))
    if spec.kind == "delta":
        return delta_rep(default_labels(spec.m), max(spec.L, TABLE_LENGTH))
    return random_family(spec.dim, spec.m, spec.seed, dim_cap=dim_cap)


def fixture_depth(spec: FixtureSpec) -> Optional[int]:
    if spec.kind in ("tree", "ck"):
        return spec.L
    if spec.kind in ("parity", "delta"):
        return max(spec.L, TABLE_LENGTH)
    return None


def parse_adjacency(text: str) -> list[list[int]]:
    """'I2' (identity), 'J3' (all ones), '0,1;1,0', or a JSON file."""
    text = text.strip()
    if len(text) > 1 and text[0] in "IJ" and text[1:].isdigit():
        n = int(text[1:])
        if n < 1:
            raise InputError(f"Adjacency size must be positive: {text!r}")
        M = np.eye(n, dtype=int) if text[0] == "I" else np.ones((n, n), dtype=int)
        return M.tolist()
    if os.path.isfile(text):
        try:
            with open(text, encoding="utf-8") as fh:
                rows = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"Adjacency file {text!r} is not valid JSON: {exc}") from exc
    else:
        try:
            rows = [[int(v) for v in row.split(",")] for row in text.split(";")]
        except ValueError:
            raise InputError(f"Cannot parse adjacency matrix {text!r}") from None
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise InputError("Adjacency matrix must be a list of rows")
    return rows

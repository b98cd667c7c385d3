from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from fellcheck.exceptions import InputError

Letter = tuple[int, int]

INVERSE_SUFFIX = "^-1"


@dataclass(frozen=True)
class Generator:
    index: int
    label: str


@dataclass(frozen=True)
class GeneratorSet:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise InputError("Generator set must not be empty")
        if len(set(labels)) != len(labels):
            raise InputError(f"Generator labels must be unique: {labels}")
        for label in labels:
            if not isinstance(label, str) or not label.isidentifier():
                raise InputError(f"Invalid generator label: {label!r}")

    def __repr__(self):
        return f"GeneratorSet({', '.join(self.labels)})"

    @property
    def size(self) -> int:
        return len(self.labels)

    def generators(self) -> list[Generator]:
        return [Generator(i, label) for i, label in enumerate(self.labels)]

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"Unknown generator {label!r} (known: {', '.join(self.labels)})") from None

    def identity(self) -> "Word":
        return Word(self, ())

    def gen(self, label: str, sign: int = 1) -> "Word":
        return Word(self, ((self.index_of(label), sign),))

    def word(self, letters: Iterable[Letter]) -> "Word":
        return reduce(self, letters)

    def parse(self, text: str) -> "Word":
        """Parse the dotted syntax, e.g. ``"x.y^-1"``; the empty string is ε."""
        text = text.strip()
        if not text:
            return self.identity()
        letters = []
        for token in text.split("."):
            token = token.strip()
            sign = 1
            if token.endswith(INVERSE_SUFFIX):
                token, sign = token[: -len(INVERSE_SUFFIX)], -1
            elif token.endswith("^1"):
                token = token[:-2]
            if not token:
                raise InputError(f"Malformed word {text!r}")
            letters.append((self.index_of(token), sign))
        return reduce(self, letters)

    def format(self, word: "Word") -> str:
        return ".".join(
            self.labels[i] + ("" if sign > 0 else INVERSE_SUFFIX) for i, sign in word.letters
        )


@dataclass(frozen=True)
class Word:
    gens: GeneratorSet
    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        letters = tuple((int(i), int(s)) for i, s in self.letters)
        object.__setattr__(self, "letters", letters)
        _check_letters(self.gens, letters)
        for (i, s), (j, r) in zip(letters, letters[1:]):
            if i == j and s == -r:
                raise InputError(f"Word is not reduced: {letters}")

    def __str__(self):
        return self.gens.format(self)

    def __repr__(self):
        return f"Word({self.display()!r})"

    def __len__(self):
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return mul(self, other)

    def display(self) -> str:
        return str(self) or "ε"

    def length(self) -> int:
        return len(self.letters)

    def inverse(self) -> "Word":
        return inv(self)

    def is_identity(self) -> bool:
        return not self.letters

    def is_positive(self) -> bool:
        return is_positive(self)

    def sort_key(self) -> tuple:
        return (len(self.letters), tuple((i, 0 if s > 0 else 1) for i, s in self.letters))

    def over(self, gens: GeneratorSet) -> "Word":
        if gens == self.gens:
            return self
        return Word(gens, tuple((gens.index_of(self.gens.labels[i]), s) for i, s in self.letters))


def _check_letters(gens: GeneratorSet, letters: Sequence[Letter]):
    for i, s in letters:
        if not 0 <= i < gens.size:
            raise InputError(f"Generator index {i} out of range for {gens!r}")
        if s not in (1, -1):
            raise InputError(f"Letter sign must be +1 or -1, got {s}")


def _same_gens(t: Word, s: Word):
    if t.gens != s.gens:
        raise InputError(f"Generator-set mismatch: {t.gens!r} vs {s.gens!r}")


def reduce(gens: GeneratorSet, letters: Iterable[Letter]) -> Word:
    letters = [(int(i), int(s)) for i, s in letters]
    _check_letters(gens, letters)
    stack: list[Letter] = []
    for i, s in letters:
        if stack and stack[-1] == (i, -s):
            stack.pop()
        else:
            stack.append((i, s))
    return Word(gens, tuple(stack))


def mul(t: Word, s: Word) -> Word:
    _same_gens(t, s)
    return reduce(t.gens, t.letters + s.letters)


def inv(t: Word) -> Word:
    return Word(t.gens, tuple((i, -s) for i, s in reversed(t.letters)))


def length(t: Word) -> int:
    return len(t.letters)


def lengths_add(t: Word, s: Word) -> bool:
    return length(mul(t, s)) == length(t) + length(s)


def is_positive(t: Word) -> bool:
    return all(s > 0 for _, s in t.letters)


def enumerate_positive(gens: GeneratorSet, k: int) -> list[Word]:
    """All m**k positive words of length k, lexicographic in index sequence."""
    if k < 0:
        raise InputError(f"Length must be non-negative, got {k}")
    return [Word(gens, tuple((i, 1) for i in idx)) for idx in itertools.product(range(gens.size), repeat=k)]


def positive_words_up_to(gens: GeneratorSet, k: int) -> list[Word]:
    return [w for j in range(k + 1) for w in enumerate_positive(gens, j)]


def words_up_to(gens: GeneratorSet, k: int) -> list[Word]:
    """All reduced words of length <= k in canonical order."""
    if k < 0:
        raise InputError(f"Length must be non-negative, got {k}")
    alphabet = [(i, s) for i in range(gens.size) for s in (1, -1)]
    level = [()]
    words = [Word(gens, ())]
    for _ in range(k):
        nxt = []
        for letters in level:
            for i, s in alphabet:
                if letters and letters[-1] == (i, -s):
                    continue
                nxt.append(letters + ((i, s),))
        words.extend(Word(gens, letters) for letters in nxt)
        level = nxt
    return words


def pos_neg_decompose(t: Word) -> Optional[tuple[Word, Word]]:
    """Split t = μ·ν⁻¹ with μ, ν positive, or None when the signs are not (+)*(−)*."""
    letters = t.letters
    cut = next((j for j, (_, s) in enumerate(letters) if s < 0), len(letters))
    if any(s > 0 for _, s in letters[cut:]):
        return None
    mu = Word(t.gens, letters[:cut])
    nu = inv(Word(t.gens, letters[cut:]))
    return mu, nu

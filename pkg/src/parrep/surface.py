"""Standard presentation of the fundamental group of a genus-g surface with
n punctures: generators a1..ag, b1..bg, g1..gn, the single relator, free
reduction of words, and evaluation of words through matrix assignments."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix


class WordError(ValueError):
    pass


@dataclass(frozen=True)
class Presentation:
    genus: int
    punctures: int

    def __post_init__(self):
        if self.genus < 0 or self.punctures < 1:
            raise WordError("need genus >= 0 and at least one puncture")
        if 2 - 2 * self.genus - self.punctures >= 0:
            warnings.warn(
                f"Euler number {2 - 2 * self.genus - self.punctures} is not negative "
                f"for (g, n) = ({self.genus}, {self.punctures}); computations proceed anyway",
                stacklevel=2,
            )

    def generator_names(self) -> list:
        names = []
        for j in range(1, self.genus + 1):
            names += [f"a{j}", f"b{j}"]
        names += [f"g{i}" for i in range(1, self.punctures + 1)]
        return names

    def free_generator_names(self) -> list:
        """Generators of the free group underlying Gamma: the relator eliminates gn."""
        return [x for x in self.generator_names() if x != f"g{self.punctures}"]

    def rank_free(self) -> int:
        return 2 * self.genus + self.punctures - 1


class Word:
    """Word in the generators, stored as (name, exponent) letters with exponent ±1."""

    def __init__(self, letters=()):
        self.letters = tuple((str(n), int(e)) for n, e in letters)
        if any(e not in (1, -1) for _, e in self.letters):
            raise WordError("letter exponents must be +1 or -1")

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __len__(self):
        return len(self.letters)

    def __eq__(self, other):
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self):
        return hash(self.letters)

    def inverse(self) -> "Word":
        return Word(tuple((n, -e) for n, e in reversed(self.letters)))

    def __repr__(self):
        return f"Word({self.format()!r})"

    def format(self) -> str:
        return " ".join(n if e == 1 else f"{n}^-1" for n, e in self.letters) or "1"


def parse_word(text: str) -> Word:
    """Parse the CLI word syntax: whitespace-separated tokens like ``a1`` or ``g2^-1``."""
    letters = []
    for tok in text.split():
        if tok.endswith("^-1"):
            letters.append((tok[:-3], -1))
        elif "^" in tok:
            raise WordError(f"bad token {tok!r}: only ^-1 is supported")
        else:
            letters.append((tok, 1))
    return Word(letters)


def check_word(p: Presentation, w: Word):
    valid = set(p.generator_names())
    for n, _ in w.letters:
        if n not in valid:
            raise WordError(f"unknown generator {n!r} for (g, n) = ({p.genus}, {p.punctures})")


def relator(p: Presentation) -> Word:
    """[a1,b1]...[ag,bg] g1...gn, of length 4g + n."""
    letters = []
    for j in range(1, p.genus + 1):
        letters += [(f"a{j}", 1), (f"b{j}", 1), (f"a{j}", -1), (f"b{j}", -1)]
    letters += [(f"g{i}", 1) for i in range(1, p.punctures + 1)]
    return Word(letters)


def last_puncture_word(p: Presentation) -> Word:
    """gn expressed in the other generators: the inverse of the relator prefix."""
    prefix = Word(relator(p).letters[: 4 * p.genus + p.punctures - 1])
    return prefix.inverse()


def free_reduce(w: Word) -> Word:
    """Cancel adjacent inverse pairs until none remain."""
    out = []
    for letter in w.letters:
        if out and out[-1][0] == letter[0] and out[-1][1] == -letter[1]:
            out.pop()
        else:
            out.append(letter)
    return Word(out)


def substitute_last_puncture(p: Presentation, w: Word) -> Word:
    """Rewrite a word over the free generators by replacing gn with its defining word."""
    gn = f"g{p.punctures}"
    gn_word = last_puncture_word(p)
    letters = []
    for n, e in w.letters:
        if n == gn:
            letters += (gn_word if e == 1 else gn_word.inverse()).letters
        else:
            letters.append((n, e))
    return free_reduce(Word(letters))


def evaluate(images: dict, w: Word) -> np.ndarray:
    """Left-to-right product of generator images; inverses for exponent -1."""
    mats = {k: as_matrix(v) for k, v in images.items()}
    r = next(iter(mats.values())).shape[0] if mats else 1
    out = np.eye(r, dtype=complex)
    for n, e in w.letters:
        if n not in mats:
            raise WordError(f"no image assigned to generator {n!r}")
        m = mats[n]
        if e == -1:
            try:
                m = np.linalg.inv(m)
            except np.linalg.LinAlgError as exc:
                raise WordError(f"image of {n!r} is singular, cannot invert") from exc
        out = out @ m
    return out

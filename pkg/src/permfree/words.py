"""Reduced words in the free group on generators g_1, ..., g_s.

A word g_{r1} g_{r2} ... g_{rk} evaluated at permutations sigma_1..sigma_s is the
composite sigma_{r1} o sigma_{r2} o ... o sigma_{rk}, so that evaluation is a
homomorphism onto permutation matrices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError
from .perms import Perm

Letter = tuple[int, int]  # (generator index >= 1, exponent sign +1/-1)


def _free_reduce(letters: Iterable[Letter]) -> tuple[Letter, ...]:
    stack: list[Letter] = []
    for gen, sign in letters:
        if stack and stack[-1] == (gen, -sign):
            stack.pop()
        else:
            stack.append((gen, sign))
    return tuple(stack)


@dataclass(frozen=True, order=True)
class FreeWord:
    letters: tuple[Letter, ...] = ()

    def __post_init__(self):
        letters = []
        for gen, sign in self.letters:
            if int(gen) < 1 or sign not in (1, -1):
                raise ValidationError(f"bad letter ({gen}, {sign})")
            letters.append((int(gen), int(sign)))
        object.__setattr__(self, "letters", _free_reduce(letters))

    @classmethod
    def gen(cls, r: int, power: int = 1) -> FreeWord:
        sign = 1 if power >= 0 else -1
        return cls(((r, sign),) * abs(power))

    @property
    def is_identity(self) -> bool:
        return not self.letters

    @property
    def generators(self) -> frozenset[int]:
        return frozenset(g for g, _ in self.letters)

    def __len__(self):
        return len(self.letters)

    def __mul__(self, other: FreeWord) -> FreeWord:
        return concat(self, other)

    def __invert__(self) -> FreeWord:
        return inverse(self)

    def __str__(self):
        return format_word(self)

    def __repr__(self):
        return f"FreeWord({format_word(self)})"


E = FreeWord()


def reduce(raw_letters: Sequence[Letter], s: int | None = None) -> FreeWord:
    """Freely reduce a raw letter list; with ``s`` given, indices must lie in [1, s]."""
    if s is not None:
        for gen, _ in raw_letters:
            if not 1 <= gen <= s:
                raise ValidationError(f"generator index {gen} outside [1, {s}]")
    return FreeWord(tuple(raw_letters))


def concat(w1: FreeWord, w2: FreeWord) -> FreeWord:
    return FreeWord(w1.letters + w2.letters)


def inverse(w: FreeWord) -> FreeWord:
    return FreeWord(tuple((g, -e) for g, e in reversed(w.letters)))


def concat_all(words: Iterable[FreeWord]) -> FreeWord:
    letters: list[Letter] = []
    for w in words:
        letters.extend(w.letters)
    return FreeWord(tuple(letters))


def evaluate_word(w: FreeWord, sigmas: Sequence[Perm]) -> Perm:
    """Substitute sigma_r for g_r (and its inverse for g_r^-1)."""
    if not sigmas:
        raise ValidationError("need at least one permutation to fix the size N")
    n = sigmas[0].n
    if any(p.n != n for p in sigmas):
        raise ValidationError("permutations act on different sets")
    if w.letters and max(w.generators) > len(sigmas):
        raise ValidationError(f"word uses g{max(w.generators)} but only {len(sigmas)} permutations given")
    inverses = {}
    point = list(range(1, n + 1))
    # rightmost letter acts first
    for gen, sign in reversed(w.letters):
        img = sigmas[gen - 1].images
        if sign < 0:
            if gen not in inverses:
                inv = [0] * n
                for a, b in enumerate(img, start=1):
                    inv[b - 1] = a
                inverses[gen] = inv
            img = inverses[gen]
        point = [img[x - 1] for x in point]
    return Perm(tuple(point))


# --- text form ---------------------------------------------------------------

_TERM = re.compile(r"g(\d+)(?:\^(-?\d+))?")


def parse_word(text: str, s: int | None = None, *, base_offset: int = 0) -> FreeWord:
    """Parse ``e`` or ``g1.g2^-1.g1^2``; offsets in errors are relative to ``base_offset``."""
    if text == "e":
        return E
    if not text:
        raise ParseError("empty word", text, base_offset)
    letters: list[Letter] = []
    pos = 0
    while True:
        m = _TERM.match(text, pos)
        if not m:
            raise ParseError("expected term g<INDEX>[^<INT>]", text, base_offset + pos)
        gen = int(m.group(1))
        if gen < 1 or (s is not None and gen > s):
            raise ParseError(f"generator index {gen} outside [1, {s}]", text, base_offset + pos)
        power = int(m.group(2)) if m.group(2) is not None else 1
        sign = 1 if power > 0 else -1
        letters.extend([(gen, sign)] * abs(power))
        pos = m.end()
        if pos == len(text):
            break
        if text[pos] != ".":
            raise ParseError("expected '.' between terms", text, base_offset + pos)
        pos += 1
    return FreeWord(tuple(letters))


def format_word(w: FreeWord) -> str:
    if not w.letters:
        return "e"
    terms = []
    i = 0
    letters = w.letters
    while i < len(letters):
        j = i
        while j < len(letters) and letters[j] == letters[i]:
            j += 1
        gen, sign = letters[i]
        power = sign * (j - i)
        terms.append(f"g{gen}" if power == 1 else f"g{gen}^{power}")
        i = j
    return ".".join(terms)

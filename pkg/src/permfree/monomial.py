"""Monomials in the matrix / limit symbols and their canonical forms.

Square family: ``U[w]`` (permutation word), ``G<r>``/``G<r>*`` (Ginibre, limit
circular), ``W<r>`` (Wishart, limit free Poisson).

Rectangular family: ``T[w]`` (top M-block word), ``U[w]`` (bottom N-block
word), ``H<r>``/``H<r>*`` (top-right Gaussian block).

Traces are cyclic, so canonicalization rotates freely.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

from .errors import ParseError, UnsupportedError, ValidationError
from .words import FreeWord, concat_all, format_word, inverse, parse_word


@dataclass(frozen=True)
class UWord:
    word: FreeWord


@dataclass(frozen=True)
class TWord:
    word: FreeWord


@dataclass(frozen=True)
class Gauss:
    r: int
    star: bool = False


@dataclass(frozen=True)
class Wishart:
    r: int


@dataclass(frozen=True)
class HGauss:
    r: int
    star: bool = False


Factor = Union[UWord, TWord, Gauss, Wishart, HGauss]


def format_factor(f: Factor) -> str:
    if isinstance(f, UWord):
        return f"U[{format_word(f.word)}]"
    if isinstance(f, TWord):
        return f"T[{format_word(f.word)}]"
    if isinstance(f, Gauss):
        return f"G{f.r}{'*' if f.star else ''}"
    if isinstance(f, HGauss):
        return f"H{f.r}{'*' if f.star else ''}"
    return f"W{f.r}"


@dataclass(frozen=True)
class Monomial:
    family: str  # "square" | "rectangular"
    factors: tuple[Factor, ...]

    def __post_init__(self):
        if self.family not in ("square", "rectangular"):
            raise ValidationError(f"unknown family {self.family!r}")
        allowed = (UWord, Gauss, Wishart) if self.family == "square" else (TWord, UWord, HGauss)
        for f in self.factors:
            if not isinstance(f, allowed):
                raise ValidationError(f"{format_factor(f)} is not allowed in a {self.family} monomial")

    @classmethod
    def of(cls, factors: Sequence[Factor]) -> Monomial:
        """Infer the family from the factors; U-only monomials count as square."""
        factors = tuple(factors)
        square = any(isinstance(f, (Gauss, Wishart)) for f in factors)
        rect = any(isinstance(f, (TWord, HGauss)) for f in factors)
        if square and rect:
            raise ValidationError("monomial mixes square (G/W) and rectangular (T/H) factors")
        return cls("rectangular" if rect else "square", factors)

    def __str__(self):
        return " ".join(format_factor(f) for f in self.factors) or "U[e]"


# --- canonical forms -----------------------------------------------------------


@dataclass(frozen=True)
class AlternatingForm:
    """``X_1 U_{w_1} X_2 U_{w_2} ... X_n U_{w_n}`` up to rotation.

    ``letters`` holds the non-permutation factors X_a (Gauss, Wishart or HGauss).
    In the rectangular family the odd positions are ``H*`` and odd words are
    T-words, even words U-words.
    """

    family: str
    letters: tuple[Factor, ...]
    words: tuple[FreeWord, ...]

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def kind(self) -> str:
        first = self.letters[0]
        if isinstance(first, HGauss):
            return "rectangular"
        return "gauss" if isinstance(first, Gauss) else "wishart"

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(x.r for x in self.letters)

    @property
    def stars(self) -> tuple[bool, ...]:
        return tuple(getattr(x, "star", False) for x in self.letters)

    @property
    def generators(self) -> frozenset[int]:
        out: set[int] = set()
        for w in self.words:
            out |= w.generators
        return frozenset(out)

    def to_monomial(self) -> Monomial:
        factors: list[Factor] = []
        for a, (x, w) in enumerate(zip(self.letters, self.words)):
            factors.append(x)
            if self.family == "rectangular":
                factors.append(TWord(w) if a % 2 == 0 else UWord(w))
            else:
                factors.append(UWord(w))
        return Monomial(self.family, tuple(factors))

    def __str__(self):
        return str(self.to_monomial())


@dataclass(frozen=True)
class PureUWord:
    """A monomial with no Gaussian/Wishart factors.

    ``block`` is "square" for an N x N permutation word, "top"/"bottom" for a
    rectangular-family T-word / U-word living on one diagonal block.
    """

    word: FreeWord
    block: str = "square"

    def __str__(self):
        letter = "T" if self.block == "top" else "U"
        return f"{letter}[{format_word(self.word)}]"


@dataclass(frozen=True)
class Zero:
    """A monomial whose trace vanishes identically (inconsistent block shapes)."""

    reason: str = ""

    def __str__(self):
        return "0"


Canonical = Union[AlternatingForm, PureUWord, Zero]


def _merge_cyclic(factors, word_type):
    """Rotate so a non-word factor comes first, merge word runs; return (letters, words)."""
    k = next(i for i, f in enumerate(factors) if not isinstance(f, word_type))
    rotated = factors[k:] + factors[:k]
    letters, words = [], []
    for f in rotated:
        if isinstance(f, word_type):
            words[-1].append(f.word)
        else:
            letters.append(f)
            words.append([])
    return tuple(letters), tuple(concat_all(ws) for ws in words)


def canonicalize(m: Monomial) -> Canonical:
    factors = tuple(m.factors)
    if m.family == "square":
        if not any(isinstance(f, (Gauss, Wishart)) for f in factors):
            return PureUWord(concat_all(f.word for f in factors))
        letters, words = _merge_cyclic(factors, UWord)
        return AlternatingForm("square", letters, words)
    return _canonicalize_rectangular(factors)


# Block bookkeeping for the rectangular family: (row block, column block).
_TOP, _BOTTOM = "top", "bottom"


def _blocks(f: Factor) -> tuple[str, str]:
    if isinstance(f, TWord):
        return _TOP, _TOP
    if isinstance(f, UWord):
        return _BOTTOM, _BOTTOM
    return (_BOTTOM, _TOP) if f.star else (_TOP, _BOTTOM)


def _canonicalize_rectangular(factors: tuple[Factor, ...]) -> Canonical:
    if not factors:
        return Zero("empty rectangular monomial")
    for left, right in zip(factors, factors[1:] + factors[:1]):
        if _blocks(left)[1] != _blocks(right)[0]:
            return Zero(f"{format_factor(left)} cannot be followed by {format_factor(right)}")
    hs = [i for i, f in enumerate(factors) if isinstance(f, HGauss)]
    if not hs:
        block = _blocks(factors[0])[0]
        return PureUWord(concat_all(f.word for f in factors), block)
    # consistency forces H* and H to alternate; start the rotation at an H*
    k = next(i for i in hs if factors[i].star)
    rotated = factors[k:] + factors[:k]
    letters: list[Factor] = []
    words: list[list[FreeWord]] = []
    for f in rotated:
        if isinstance(f, HGauss):
            letters.append(f)
            words.append([])
        else:
            words[-1].append(f.word)
    return AlternatingForm("rectangular", tuple(letters), tuple(concat_all(ws) for ws in words))


def adjoint(m: Monomial) -> Monomial:
    """Reverse the factors and take each adjoint (U_w* = U_{w^-1}, W* = W)."""
    out: list[Factor] = []
    for f in reversed(m.factors):
        if isinstance(f, UWord):
            out.append(UWord(inverse(f.word)))
        elif isinstance(f, TWord):
            out.append(TWord(inverse(f.word)))
        elif isinstance(f, Gauss):
            out.append(Gauss(f.r, not f.star))
        elif isinstance(f, HGauss):
            out.append(HGauss(f.r, not f.star))
        else:
            out.append(f)
    return Monomial(m.family, tuple(out))


def as_canonical(m) -> Canonical:
    """Accept a Monomial, a canonical form, or grammar text."""
    if isinstance(m, (AlternatingForm, PureUWord, Zero)):
        return m
    if isinstance(m, str):
        m = parse_monomial(m)
    return canonicalize(m)


# --- text grammar ------------------------------------------------------------
#   monomial := factor (SP factor)*
#   factor   := G<IDX>[*] | W<IDX> | H<IDX>[*] | U[<word>] | T[<word>]

_FACTOR = re.compile(r"([GWH])(\d+)(\*?)|([UT])\[([^\]]*)\]")


def parse_factors(text: str, s: int | None = 2) -> Monomial:
    """Parse without rejecting Gauss/Wishart mixtures (those have a matrix model)."""
    raw = text.encode()
    if len(raw) != len(text):
        raise ParseError("non-ASCII input", text, next(i for i, ch in enumerate(text) if ord(ch) > 127))
    factors: list[Factor] = []
    pos = 0
    while pos < len(text):
        if text[pos] == " ":
            pos += 1
            continue
        m = _FACTOR.match(text, pos)
        if not m:
            raise ParseError("expected factor G<i>[*], W<i>, H<i>[*], U[word] or T[word]", text, pos)
        end = m.end()
        if end < len(text) and text[end] != " ":
            raise ParseError("factors must be separated by spaces", text, end)
        if m.group(1):
            r = int(m.group(2))
            if r < 1 or (s is not None and r > s):
                raise ParseError(f"index {r} outside [1, {s}]", text, pos + 1)
            if m.group(1) == "W":
                if m.group(3):
                    raise ParseError("W is self-adjoint; drop the '*'", text, pos + 1 + len(m.group(2)))
                factors.append(Wishart(r))
            elif m.group(1) == "G":
                factors.append(Gauss(r, bool(m.group(3))))
            else:
                factors.append(HGauss(r, bool(m.group(3))))
        else:
            word = parse_word(m.group(5), s, base_offset=pos + 2)
            factors.append(UWord(word) if m.group(4) == "U" else TWord(word))
        pos = end
    if not factors:
        raise ParseError("empty monomial", text, 0)
    return Monomial.of(factors)


def parse_monomial(text: str, s: int | None = 2) -> Monomial:
    """Parse grammar text into a Monomial; Gauss and Wishart may not be mixed."""
    m = parse_factors(text, s)
    if any(isinstance(f, Gauss) for f in m.factors) and any(isinstance(f, Wishart) for f in m.factors):
        raise UnsupportedError("mixed Gauss/Wishart monomials are unsupported")
    return m

"""Permutations of [n] = {1, ..., n} and the non-crossing machinery built on them.

Elements are 1-based throughout. ``Perm.images[a - 1]`` is the image of ``a``.
Composition follows ``(p * q)(a) = p(q(a))``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import BudgetError, DomainError, ValidationError

#: Largest n accepted by the exhaustive enumerators (10! is about 3.6 million).
ENUMERATION_CAP = 10


@dataclass(frozen=True)
class Perm:
    images: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(x) for x in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ValidationError(f"not a permutation of [{len(images)}]: {images}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, n: int) -> Perm:
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def from_cycles(cls, n: int, cycles: Sequence[Sequence[int]]) -> Perm:
        """Build from cycle notation; omitted points are fixed."""
        images = list(range(1, n + 1))
        seen = set()
        for cycle in cycles:
            for i, a in enumerate(cycle):
                if not 1 <= a <= n or a in seen:
                    raise ValidationError(f"bad cycle {tuple(cycle)} for n={n}")
                seen.add(a)
                images[a - 1] = cycle[(i + 1) % len(cycle)]
        return cls(tuple(images))

    @classmethod
    def from_string(cls, n: int, text: str) -> Perm:
        """Parse ``(1,2)(3,4)``-style cycle notation."""
        text = text.replace(" ", "")
        if text in ("", "()", "id"):
            return cls.identity(n)
        if not (text.startswith("(") and text.endswith(")")):
            raise ValidationError(f"bad cycle notation: {text!r}")
        cycles = []
        for chunk in text[1:-1].split(")("):
            try:
                cycles.append([int(x) for x in chunk.split(",")])
            except ValueError:
                raise ValidationError(f"bad cycle notation: {text!r}") from None
        return cls.from_cycles(n, cycles)

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, a: int) -> int:
        return self.images[a - 1]

    def __mul__(self, other: Perm) -> Perm:
        return compose(self, other)

    def __len__(self):
        return len(self.images)

    def __str__(self):
        return format_cycles(self)

    def __repr__(self):
        return f"Perm({format_cycles(self)}, n={self.n})"


def compose(p: Perm, q: Perm) -> Perm:
    """Return p o q, i.e. a -> p(q(a))."""
    if p.n != q.n:
        raise ValidationError(f"size mismatch: {p.n} vs {q.n}")
    return Perm(tuple(p.images[b - 1] for b in q.images))


def inverse(p: Perm) -> Perm:
    inv = [0] * p.n
    for a, b in enumerate(p.images, start=1):
        inv[b - 1] = a
    return Perm(tuple(inv))


def gamma_n(n: int) -> Perm:
    """The full cycle (1, 2, ..., n)."""
    if n < 1:
        raise ValidationError("n must be positive")
    return Perm(tuple(range(2, n + 1)) + (1,))


def gamma_mn(m: int, n: int) -> Perm:
    """The two-cycle permutation (1..m)(m+1..m+n)."""
    if m < 1 or n < 1:
        raise ValidationError("m and n must be positive")
    first = tuple(range(2, m + 1)) + (1,)
    second = tuple(range(m + 2, m + n + 1)) + (m + 1,)
    return Perm(first + second)


def fix_count(p: Perm) -> int:
    return sum(1 for a, b in enumerate(p.images, start=1) if a == b)


def cycle_decomposition(p: Perm) -> tuple[tuple[int, ...], ...]:
    """Cycles rotated to start at their minimum, listed by increasing minimum.

    Fixed points are included as 1-cycles.
    """
    seen = [False] * (p.n + 1)
    cycles = []
    for start in range(1, p.n + 1):
        if seen[start]:
            continue
        cycle = []
        a = start
        while not seen[a]:
            seen[a] = True
            cycle.append(a)
            a = p.images[a - 1]
        cycles.append(tuple(cycle))
    return tuple(cycles)


def cycle_count(p: Perm) -> int:
    return len(cycle_decomposition(p))


def format_cycles(p: Perm) -> str:
    return "".join("(" + ",".join(map(str, c)) + ")" for c in cycle_decomposition(p))


def is_pairing(p: Perm) -> bool:
    return p.n > 0 and all(len(c) == 2 for c in cycle_decomposition(p))


def is_noncrossing(p: Perm) -> bool:
    """Equality case of #(p) + #(p^-1 gamma_n) <= n + 1."""
    return cycle_count(p) + cycle_count(compose(inverse(p), gamma_n(p.n))) == p.n + 1


def kreweras(p: Perm) -> Perm:
    """Kreweras complement p^-1 gamma_n of a non-crossing permutation."""
    if not is_noncrossing(p):
        raise DomainError(f"{format_cycles(p)} is not non-crossing")
    return compose(inverse(p), gamma_n(p.n))


@dataclass(frozen=True)
class ParityClass:
    kind: str  # "alternating", "preserving" or "neither"
    odd: Perm | None = None
    even: Perm | None = None
    odd_cycles: tuple[tuple[int, ...], ...] = ()
    even_cycles: tuple[tuple[int, ...], ...] = ()

    def restrictions(self) -> tuple[tuple[tuple[int, ...], ...], tuple[tuple[int, ...], ...]]:
        if self.kind != "preserving":
            raise DomainError(f"restrictions undefined for a {self.kind} permutation")
        return self.odd_cycles, self.even_cycles


def parity_classify(p: Perm) -> ParityClass:
    """Classify by how p treats parity.

    For parity-preserving p, ``odd`` and ``even`` are the restrictions relabelled
    onto [ceil(n/2)] and [floor(n/2)] (odd a -> (a+1)/2, even a -> a/2), while
    ``odd_cycles``/``even_cycles`` keep the original labels.
    """
    pairs = list(enumerate(p.images, start=1))
    if pairs and all((a - b) % 2 == 1 for a, b in pairs):
        return ParityClass("alternating")
    if not all((a - b) % 2 == 0 for a, b in pairs):
        return ParityClass("neither")
    odd = Perm(tuple((p(a) + 1) // 2 for a in range(1, p.n + 1, 2)))
    even = Perm(tuple(p(a) // 2 for a in range(2, p.n + 1, 2)))
    cycles = cycle_decomposition(p)
    return ParityClass(
        "preserving",
        odd,
        even,
        tuple(c for c in cycles if c[0] % 2 == 1),
        tuple(c for c in cycles if c[0] % 2 == 0),
    )


def is_mn_connected(p: Perm, m: int, n: int) -> bool:
    """True if some orbit edge joins {1..m} with {m+1..m+n}."""
    if p.n != m + n:
        raise ValidationError(f"permutation of [{p.n}] is not in S_{m}+{n}")
    return any((a <= m) != (p(a) <= m) for a in range(1, p.n + 1))


def restrict(p: Perm, lo: int, hi: int) -> Perm:
    """Restriction to the invariant interval [lo, hi], relabelled onto [hi - lo + 1]."""
    images = []
    for a in range(lo, hi + 1):
        b = p(a)
        if not lo <= b <= hi:
            raise DomainError(f"[{lo},{hi}] is not invariant under {format_cycles(p)}")
        images.append(b - lo + 1)
    return Perm(tuple(images))


# --- enumerators -----------------------------------------------------------
# Every stream is lexicographic in the image tuple.


def _check_budget(n: int):
    if n > ENUMERATION_CAP:
        raise BudgetError(f"exhaustive enumeration capped at n={ENUMERATION_CAP}, got n={n}")


def enumerate_permutations(n: int) -> Iterator[Perm]:
    _check_budget(n)
    for images in itertools.permutations(range(1, n + 1)):
        yield Perm(images)


def _pairings(points: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
    if not points:
        yield []
        return
    first, rest = points[0], points[1:]
    for i, partner in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + tail


def enumerate_pairings(n: int) -> Iterator[Perm]:
    _check_budget(n)
    if n % 2:
        return
    perms = [Perm.from_cycles(n, pairs) for pairs in _pairings(tuple(range(1, n + 1)))]
    yield from sorted(perms, key=lambda p: p.images)


def _nc_partitions(points: tuple[int, ...]) -> Iterator[tuple[tuple[int, ...], ...]]:
    if not points:
        yield ()
        return
    yield from _grow_block((points[0],), points[1:])


def _grow_block(block, rest):
    # close the block here; whatever follows is independent
    for tail in _nc_partitions(rest):
        yield (block,) + tail
    # or extend it by rest[j]; the points skipped over must close among themselves
    for j in range(len(rest)):
        for inner in _nc_partitions(rest[:j]):
            for tail in _grow_block(block + (rest[j],), rest[j + 1:]):
                yield inner + tail


def enumerate_noncrossing(n: int) -> Iterator[Perm]:
    """NC_n, generated from non-crossing partitions (blocks become increasing cycles)."""
    _check_budget(n)
    perms = [Perm.from_cycles(n, blocks) for blocks in _nc_partitions(tuple(range(1, n + 1)))]
    yield from sorted(perms, key=lambda p: p.images)


def enumerate_nc_pairings(n: int) -> Iterator[Perm]:
    if n % 2:
        return
    for p in enumerate_noncrossing(n):
        if is_pairing(p):
            yield p


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1

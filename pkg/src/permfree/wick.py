"""Brute-force reference values for tiny sizes.

Independent of :mod:`permfree.exact`: permutation words are built as integer
products of permutation matrices, every index path is enumerated explicitly
and Gaussian expectations come from Wick's theorem on the resulting monomial
in matrix entries. Exponential cost; meant for N, M <= 3 and short monomials.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetError, ValidationError
from .monomial import Gauss, HGauss, Monomial, TWord, UWord, Wishart, parse_factors
from .words import FreeWord

#: Largest number of permutation tuples the oracle will visit.
ORACLE_BUDGET = 50_000


def permutation_matrix(images: Sequence[int]) -> np.ndarray:
    """Entry (i, j) is 1 iff sigma(j) = i (0-based images)."""
    n = len(images)
    mat = np.zeros((n, n), dtype=np.int64)
    for j, i in enumerate(images):
        mat[i, j] = 1
    return mat


def word_matrix(w: FreeWord, mats: dict[int, np.ndarray], n: int) -> np.ndarray:
    out = np.eye(n, dtype=np.int64)
    for gen, sign in w.letters:
        out = out @ (mats[gen] if sign > 0 else mats[gen].T)
    return out


def _wick_value(plain: Counter, conj: Counter) -> int:
    """E prod z_l * prod conj(z_l') for i.i.d. standard complex Gaussians (E|z|^2 = 1)."""
    if plain != conj:
        return 0
    return math.prod(math.factorial(k) for k in plain.values())


def _as_monomial(m) -> Monomial:
    if isinstance(m, str):
        return parse_factors(m, s=None)
    if not isinstance(m, Monomial):
        raise ValidationError("the oracle takes Monomial objects or grammar text")
    return m


class _Model:
    """Dimensions, block embeddings and entry scales for one family."""

    def __init__(self, family: str, N: int, M: int | None):
        self.family = family
        self.N = N
        self.M = M if M is not None else N
        if family == "rectangular":
            self.dim = self.M + N
            self.trace_norm = Fraction(1, self.dim)
        else:
            self.dim = N
            self.trace_norm = Fraction(1, N)

    def perm_sizes(self, monomials) -> dict[tuple[str, int], int]:
        sizes = {}
        for m in monomials:
            for f in m.factors:
                if isinstance(f, (UWord, TWord)):
                    role = "top" if isinstance(f, TWord) else ("bottom" if self.family == "rectangular" else "square")
                    for g in f.word.generators:
                        sizes[(role, g)] = self.M if role == "top" else self.N
        return sizes

    def steps(self, f, mats_by_role):
        """Yield (next_index, coefficient, plain_label or None, conj_label or None) per current index."""
        N, M, dim = self.N, self.M, self.dim
        if isinstance(f, (UWord, TWord)):
            if self.family == "rectangular":
                role, lo, size = ("top", 0, M) if isinstance(f, TWord) else ("bottom", M, N)
            else:
                role, lo, size = "square", 0, N
            block = word_matrix(f.word, mats_by_role.get(role, {}), size)
            full = np.zeros((dim, dim), dtype=np.int64)
            full[lo:lo + size, lo:lo + size] = block
            return lambda i: [(j, Fraction(1), (), ()) for j in range(dim) if full[i, j]]
        if isinstance(f, Gauss):
            if f.star:
                return lambda i: [(j, Fraction(1), (), (("G", f.r, j, i),)) for j in range(N)]
            return lambda i: [(j, Fraction(1), (("G", f.r, i, j),), ()) for j in range(N)]
        if isinstance(f, HGauss):
            # H occupies rows 0..M-1, columns M..M+N-1 of the (M+N)-square
            if f.star:
                return lambda i: [(j, Fraction(1), (), (("H", f.r, j, i),)) for j in range(M)] if i >= M else []
            return lambda i: [(j, Fraction(1), (("H", f.r, i, j),), ()) for j in range(M, M + N)] if i < M else []
        if isinstance(f, Wishart):
            # W_ij = (1/N) sum_k conj(G_ki) G_kj, G of size M x N with unit-variance entries
            return lambda i: [
                (j, Fraction(1, N), (("W", f.r, k, j),), (("W", f.r, k, i),)) for j in range(N) for k in range(M)
            ]
        raise ValidationError(f"unsupported factor {f!r}")

    def pair_scale(self, label) -> Fraction:
        kind = label[0]
        if kind == "G":
            return Fraction(1, self.N)
        if kind == "H":
            return Fraction(1, self.dim)
        return Fraction(1)


def _trace_paths(model: _Model, m: Monomial, mats_by_role) -> dict:
    """Map (plain labels, conj labels) -> summed coefficient of the entry monomial in Tr m."""
    steps = [model.steps(f, mats_by_role) for f in m.factors]
    out: dict = {}
    for start in range(model.dim):
        states = {(start, (), ()): Fraction(1)}
        for step in steps:
            nxt: dict = {}
            for (i, plain, conj), coef in states.items():
                for j, c, p, q in step(i):
                    key = (j, plain + p, conj + q)
                    nxt[key] = nxt.get(key, 0) + coef * c
            states = nxt
        for (i, plain, conj), coef in states.items():
            if i == start:
                key = (tuple(sorted(plain)), tuple(sorted(conj)))
                out[key] = out.get(key, 0) + coef
    return out


def _gauss_expectation(model: _Model, traces: Sequence[dict]) -> Fraction:
    total = Fraction(0)
    for combo in itertools.product(*(t.items() for t in traces)):
        plain: Counter = Counter()
        conj: Counter = Counter()
        coef = Fraction(1)
        for (p, q), c in combo:
            plain.update(p)
            conj.update(q)
            coef *= c
        value = _wick_value(plain, conj)
        if value:
            scale = math.prod((model.pair_scale(l) for l in plain.elements()), start=Fraction(1))
            total += coef * value * scale
    return total


def oracle_expectation(monomials, N: int, M: int | None = None) -> Fraction:
    """E prod_k tr(m_k) by exhaustive enumeration of permutations and index paths.

    Pass one monomial for a moment, two for a product expectation.
    """
    if not isinstance(monomials, (list, tuple)):
        monomials = [monomials]
    monos = [_as_monomial(m) for m in monomials]
    families = {m.family for m in monos}
    if len(families) != 1:
        raise ValidationError("all monomials must belong to one family")
    model = _Model(families.pop(), N, M)
    sizes = model.perm_sizes(monos)
    keys = sorted(sizes)
    count = math.prod(math.factorial(sizes[k]) for k in keys)
    if count > ORACLE_BUDGET:
        raise BudgetError(f"oracle would visit {count} permutation tuples (limit {ORACLE_BUDGET})")
    total = Fraction(0)
    for choice in itertools.product(*(itertools.permutations(range(sizes[k])) for k in keys)):
        mats_by_role: dict[str, dict[int, np.ndarray]] = {}
        for (role, gen), images in zip(keys, choice):
            mats_by_role.setdefault(role, {})[gen] = permutation_matrix(images)
        traces = [_trace_paths(model, m, mats_by_role) for m in monos]
        total += _gauss_expectation(model, traces)
    return total / count * model.trace_norm ** len(monos)


def oracle_covariance(a, b, N: int, M: int | None = None) -> Fraction:
    """E(tr a tr b) - E tr a E tr b."""
    return oracle_expectation([a, b], N, M) - oracle_expectation(a, N, M) * oracle_expectation(b, N, M)

"""N -> infinity values of traces: Haar unitaries, circular and free Poisson
elements, and the rectangular P/Q-compressed model.

All outputs are exact: integers, polynomials in the ratio ``c`` with integer
coefficients, or sums of ``c^a / (1 + c)^b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence, Union

from .errors import BudgetError, UnsupportedError, ValidationError
from .monomial import AlternatingForm, Gauss, HGauss, PureUWord, Wishart, Zero, as_canonical
from .perms import (
    ENUMERATION_CAP,
    Perm,
    cycle_count,
    cycle_decomposition,
    enumerate_nc_pairings,
    enumerate_noncrossing,
    kreweras,
    parity_classify,
)
from .words import FreeWord, concat_all


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, float):
        return Fraction(str(c))
    return Fraction(c)


@dataclass(frozen=True)
class CPolynomial:
    """Integer polynomial in ``c``; ``coeffs`` maps exponent -> nonzero coefficient."""

    coeffs: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {int(k): int(v) for k, v in dict(self.coeffs).items() if v}
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    @classmethod
    def monomial(cls, exponent: int, coeff: int = 1) -> CPolynomial:
        return cls({exponent: coeff})

    @classmethod
    def constant(cls, value: int) -> CPolynomial:
        return cls({0: value})

    def __add__(self, other):
        if isinstance(other, int):
            other = CPolynomial.constant(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return CPolynomial(out)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, int):
            return CPolynomial({k: v * other for k, v in self.coeffs.items()})
        out: dict[int, int] = {}
        for i, a in self.coeffs.items():
            for j, b in other.coeffs.items():
                out[i + j] = out.get(i + j, 0) + a * b
        return CPolynomial(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int):
            other = CPolynomial.constant(other)
        if not isinstance(other, CPolynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(self.coeffs.items()))

    def evaluate(self, c) -> Fraction:
        c = _as_fraction(c)
        return sum((v * c**k for k, v in self.coeffs.items()), Fraction(0))

    def __str__(self):
        if not self.coeffs:
            return "0"
        terms = []
        for k, v in sorted(self.coeffs.items(), reverse=True):
            mono = "" if k == 0 else ("c" if k == 1 else f"c^{k}")
            if not mono:
                terms.append(str(v))
            elif v == 1:
                terms.append(mono)
            else:
                terms.append(f"{v}*{mono}")
        return " + ".join(terms)


@dataclass(frozen=True)
class CRational:
    """Sum of ``coeff * c^a / (1 + c)^b`` held as ``terms[(a, b)] = coeff``."""

    terms: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[tuple[int, int], int] = {}
        for key, v in dict(self.terms).items():
            if v:
                clean[key] = clean.get(key, 0) + int(v)
        object.__setattr__(self, "terms", dict(sorted((k, v) for k, v in clean.items() if v)))

    def __add__(self, other):
        if isinstance(other, int):
            other = CRational({(0, 0): other})
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return CRational(out)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, int):
            return CRational({k: v * other for k, v in self.terms.items()})
        out: dict[tuple[int, int], int] = {}
        for (a1, b1), v1 in self.terms.items():
            for (a2, b2), v2 in other.terms.items():
                key = (a1 + a2, b1 + b2)
                out[key] = out.get(key, 0) + v1 * v2
        return CRational(out)

    __rmul__ = __mul__

    def normalized(self) -> tuple[CPolynomial, int]:
        """(numerator, d) with value = numerator / (1 + c)^d over a common denominator."""
        if not self.terms:
            return CPolynomial(), 0
        d = max(b for _, b in self.terms)
        num = CPolynomial()
        for (a, b), v in self.terms.items():
            num = num + CPolynomial.monomial(a, v) * _binomial_power(d - b)
        return num, d

    def evaluate(self, c) -> Fraction:
        c = _as_fraction(c)
        return sum((v * c**a / (1 + c) ** b for (a, b), v in self.terms.items()), Fraction(0))

    def __eq__(self, other):
        if isinstance(other, int):
            other = CRational({(0, 0): other})
        if not isinstance(other, CRational):
            return NotImplemented
        return self.normalized() == other.normalized()

    def __hash__(self):
        return hash(self.normalized()[0]) ^ self.normalized()[1]

    def __str__(self):
        num, d = self.normalized()
        if not num.coeffs:
            return "0"
        return f"({num})/(1+c)^{d}" if d else str(num)


def _binomial_power(d: int) -> CPolynomial:
    return CPolynomial({k: math.comb(d, k) for k in range(d + 1)})


LimitValue = Union[int, CPolynomial, CRational]


def limit_at(value: LimitValue, c=1) -> Fraction:
    """Numeric value of a limit at ratio ``c`` (ignored for c-free values)."""
    if isinstance(value, int):
        return Fraction(value)
    return value.evaluate(c)


# --- generic non-crossing machinery -------------------------------------------


def _cap(n: int):
    if n > ENUMERATION_CAP:
        raise BudgetError(f"non-crossing enumeration capped at n={ENUMERATION_CAP}, got n={n}")


def phi_tau(tau: Perm, moments: Callable[[tuple[int, ...]], object]):
    """Product over the cycles C of tau of ``moments(C)``.

    ``moments`` receives each cycle as a tuple of positions (starting at its
    minimum) and returns the moment of the corresponding ordered product.
    """
    result = 1
    for cycle in cycle_decomposition(tau):
        result = result * moments(cycle)
    return result


def free_product_moment(n: int, cumulant: Callable[[tuple[int, ...]], object],
                        b_moment: Callable[[tuple[int, ...]], object]):
    """phi(A_1 B_1 ... A_n B_n) for {A} free from {B}.

    Sums k_tau(A) * phi_{K(tau)}(B) over non-crossing tau; ``cumulant`` returns
    the cumulant of the A's at one cycle of tau, ``b_moment`` the moment of the
    B's at one cycle of K(tau).
    """
    _cap(n)
    total = 0
    for tau in enumerate_noncrossing(n):
        k = phi_tau(tau, cumulant)
        if k == 0:
            continue
        phi_b = phi_tau(kreweras(tau), b_moment)
        if phi_b == 0:
            continue
        total = total + k * phi_b
    return total


def cumulants_from_moments(moments: Sequence) -> list:
    """Free cumulants k_1..k_n of one variable from its moments m_1..m_n."""
    n = len(moments)
    _cap(n)
    cumulants: list = []
    for order in range(1, n + 1):
        # m_n = k_n + (terms with only lower-order cumulants); the full cycle gives k_n
        rest = 0
        for tau in enumerate_noncrossing(order):
            if cycle_count(tau) > 1:
                rest = rest + phi_tau(tau, lambda cyc: cumulants[len(cyc) - 1])
        cumulants.append(moments[order - 1] - rest)
    return cumulants


def moments_from_cumulants(cumulants: Sequence) -> list:
    """Moments m_1..m_n of one variable from its free cumulants k_1..k_n."""
    n = len(cumulants)
    _cap(n)
    return [
        sum((phi_tau(tau, lambda cyc: cumulants[len(cyc) - 1]) for tau in enumerate_noncrossing(order)), 0)
        for order in range(1, n + 1)
    ]


# --- the three families ----------------------------------------------------------


def haar_word_moment(w: FreeWord) -> int:
    """phi(U_w): 1 for the empty word, 0 otherwise."""
    return 1 if w.is_identity else 0


def _word_moment(words: Sequence[FreeWord]):
    def moment(cycle: tuple[int, ...]) -> int:
        return haar_word_moment(concat_all(words[a - 1] for a in cycle))

    return moment


def _circular_cumulant(letters: Sequence[Gauss]):
    def cumulant(cycle: tuple[int, ...]) -> int:
        if len(cycle) != 2:
            return 0
        x, y = letters[cycle[0] - 1], letters[cycle[1] - 1]
        return 1 if x.r == y.r and x.star != y.star else 0

    return cumulant


def _poisson_cumulant(letters: Sequence[Wishart]):
    def cumulant(cycle: tuple[int, ...]) -> CPolynomial:
        if len({letters[a - 1].r for a in cycle}) > 1:
            return CPolynomial()
        return CPolynomial.monomial(1)

    return cumulant


def _require_alternating(m, kind: str) -> AlternatingForm:
    form = as_canonical(m)
    if not isinstance(form, AlternatingForm) or form.kind != kind:
        raise ValidationError(f"expected a {kind} alternating monomial, got {form}")
    return form


def circular_mixed_moment(m) -> int:
    """Number of admissible non-crossing pairings for G^{e1} U_{w1} ... G^{en} U_{wn}."""
    form = _require_alternating(m, "gauss")
    if form.n % 2 or sum(form.stars) * 2 != form.n:
        return 0
    return free_product_moment(form.n, _circular_cumulant(form.letters), _word_moment(form.words))


def free_poisson_mixed_moment(m) -> CPolynomial:
    """Sum of c^{#tau} over admissible non-crossing tau for W U_{w1} ... W U_{wn}."""
    form = _require_alternating(m, "wishart")
    value = free_product_moment(form.n, _poisson_cumulant(form.letters), _word_moment(form.words))
    return value if isinstance(value, CPolynomial) else CPolynomial.constant(value)


@dataclass(frozen=True)
class RectangularLimit:
    """Both evaluation routes of a rectangular limit; they must agree."""

    kreweras_route: CRational  # sum of c^{#K_odd} / (1+c)^{#K}
    projection_route: CRational  # sum of (c/(1+c))^{#K_odd} (1/(1+c))^{#K_even}

    def evaluate(self, c) -> Fraction:
        return self.kreweras_route.evaluate(c)


def _admissible_rect_pairings(form: AlternatingForm):
    for tau in enumerate_nc_pairings(form.n):
        if any(form.letters[a - 1].r != form.letters[tau(a) - 1].r for a in range(1, form.n + 1)):
            continue
        if any(form.stars[a - 1] == form.stars[tau(a) - 1] for a in range(1, form.n + 1)):
            continue
        k = kreweras(tau)
        if all(concat_all(form.words[a - 1] for a in cyc).is_identity for cyc in cycle_decomposition(k)):
            yield tau, k


def _projection_moment(words: Sequence[FreeWord]):
    # phi(T_w) = phi(P) [w = e] on odd positions, phi(U_w) = phi(Q) [w = e] on even ones
    p = CRational({(1, 1): 1})
    q = CRational({(0, 1): 1})

    def moment(cycle: tuple[int, ...]):
        if not concat_all(words[a - 1] for a in cycle).is_identity:
            return 0
        return p if cycle[0] % 2 == 1 else q

    return moment


def rectangular_limit_terms(m) -> RectangularLimit:
    form = as_canonical(m)
    if isinstance(form, Zero):
        return RectangularLimit(CRational(), CRational())
    if not isinstance(form, AlternatingForm) or form.family != "rectangular":
        raise ValidationError(f"expected a rectangular monomial, got {form}")
    _cap(form.n)
    route1: dict[tuple[int, int], int] = {}
    for _, k in _admissible_rect_pairings(form):
        odd, _even = parity_classify(k).restrictions()
        key = (len(odd), cycle_count(k))
        route1[key] = route1.get(key, 0) + 1
    route2 = free_product_moment(form.n, _circular_cumulant(form.letters), _projection_moment(form.words))
    if isinstance(route2, int):
        route2 = CRational({(0, 0): route2})
    return RectangularLimit(CRational(route1), route2)


def rectangular_limit_moment(m, c=None):
    """Exact rational value at ``c``, or the symbolic CRational when ``c`` is None."""
    terms = rectangular_limit_terms(m)
    return terms.kreweras_route if c is None else terms.evaluate(c)


def pure_word_limit(form: PureUWord) -> LimitValue:
    if not form.word.is_identity:
        return 0
    if form.block == "top":
        return CRational({(1, 1): 1})
    if form.block == "bottom":
        return CRational({(0, 1): 1})
    return 1


def freeness_prediction(m) -> LimitValue:
    """Dispatch a monomial to the limit formula of its family."""
    form = as_canonical(m)
    if isinstance(form, Zero):
        return 0
    if isinstance(form, PureUWord):
        return pure_word_limit(form)
    kinds = {type(x) for x in form.letters}
    if kinds == {Gauss}:
        return circular_mixed_moment(form)
    if kinds == {Wishart}:
        return free_poisson_mixed_moment(form)
    if kinds == {HGauss}:
        return rectangular_limit_moment(form)
    raise UnsupportedError("mixed Gauss/Wishart monomials have no joint limit model here")


def free_poisson_moment(n: int) -> CPolynomial:
    """phi(W^n) = sum over NC_n of c^{#tau}."""
    _cap(n)
    total = CPolynomial()
    for tau in enumerate_noncrossing(n):
        total = total + CPolynomial.monomial(cycle_count(tau))
    return total

"""Exact finite-N expectations of normalized traces.

Every formula here has the same shape: a sum over pairings (Gaussian) or
permutations (Wishart) tau of a power of N (or M) times the average, over
independent uniform permutations, of the product of ``Fix w_C`` across the
cycles C of tau^-1 gamma. The averages are computed by one shared kernel,
either by exhaustive enumeration (exact rationals) or by i.i.d. sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetError, UnsupportedError, ValidationError
from .monomial import AlternatingForm, PureUWord, Zero, adjoint, as_canonical
from .perms import (
    Perm,
    compose,
    cycle_count,
    cycle_decomposition,
    enumerate_pairings,
    enumerate_permutations,
    format_cycles,
    gamma_mn,
    gamma_n,
    inverse,
    is_mn_connected,
    restrict,
)
from .rng import PERM_BLOCK, invert_rows, parallel_map, random_permutations, stream
from .words import FreeWord, concat_all

#: Largest (N!)^{s'} enumerated in exact mode.
EXACT_BUDGET = 10**7
_CHUNK = 1 << 15

MODES = ("exact", "sampled", "auto")


# --- permutation-average kernel ----------------------------------------------


@dataclass(frozen=True)
class PermAverageSpec:
    words: tuple[FreeWord, ...]
    N: int
    mode: str = "exact"
    samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("N must be positive")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.mode != "exact" and self.samples < 2:
            raise ValidationError("sampled mode needs at least 2 samples")
        object.__setattr__(self, "words", tuple(self.words))


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    samples: int


def _generators(groups: Iterable[Sequence[FreeWord]]) -> tuple[int, ...]:
    gens: set[int] = set()
    for words in groups:
        for w in words:
            gens |= w.generators
    return tuple(sorted(gens))


def enumeration_size(N: int, n_generators: int) -> int:
    return math.factorial(N) ** n_generators


def fits_budget(N: int, n_generators: int) -> bool:
    return enumeration_size(N, n_generators) <= EXACT_BUDGET


@lru_cache(maxsize=16)
def _all_perms(N: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(N))), dtype=np.int64).reshape(-1, N)
    return perms, invert_rows(perms)


def _fix_counts(word: FreeWord, tables: dict[int, tuple[np.ndarray, np.ndarray]], batch: int, N: int) -> np.ndarray:
    """Fix of the evaluated word for each of ``batch`` permutation tuples."""
    if word.is_identity:
        return np.full(batch, N, dtype=np.int64)
    ident = np.arange(N)
    x = np.broadcast_to(ident, (batch, N))
    for gen, sign in reversed(word.letters):
        fwd, inv = tables[gen]
        x = np.take_along_axis(fwd if sign > 0 else inv, x, axis=1)
    return (x == ident).sum(axis=1)


def _products(groups: Sequence[Sequence[FreeWord]], tables, batch: int, N: int, dtype) -> list[np.ndarray]:
    cache: dict[FreeWord, np.ndarray] = {}
    out = []
    for words in groups:
        prod = np.ones(batch, dtype=dtype)
        for w in words:
            if w.is_identity:
                prod = prod * N
                continue
            if w not in cache:
                cache[w] = _fix_counts(w, tables, batch, N).astype(dtype)
            prod = prod * cache[w]
        out.append(prod)
    return out


def exact_fix_averages(groups: Sequence[Sequence[FreeWord]], N: int) -> list[Fraction]:
    """For each multiset of words, the exact mean of prod Fix w(sigma) over (S_N)^{s'}.

    Only generators occurring somewhere in ``groups`` are enumerated.
    """
    groups = [tuple(g) for g in groups]
    gens = _generators(groups)
    total_size = enumeration_size(N, len(gens))
    if total_size > EXACT_BUDGET:
        raise BudgetError(
            f"exact enumeration of (S_{N})^{len(gens)} needs {total_size} tuples, limit is {EXACT_BUDGET}; use sampled mode"
        )
    if not gens:
        return [Fraction(N ** len(g)) for g in groups]
    perms, invs = _all_perms(N)
    F = perms.shape[0]
    sums = [0] * len(groups)
    for start in range(0, total_size, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total_size), dtype=np.int64)
        tables = {}
        for j, gen in enumerate(gens):
            digit = (idx // F**j) % F
            tables[gen] = (perms[digit], invs[digit])
        for i, prod in enumerate(_products(groups, tables, idx.size, N, np.int64)):
            sums[i] += int(prod.sum())
    return [Fraction(s, total_size) for s in sums]


def sampled_fix_products(groups: Sequence[Sequence[FreeWord]], N: int, samples: int, seed: int,
                         role: str = "perm") -> np.ndarray:
    """Per-sample products, shape (len(groups), samples).

    Sample ``i`` lives in block ``i // PERM_BLOCK``; each block has its own
    stream keyed by (seed, role, block), so the output is worker-count independent.
    """
    groups = [tuple(g) for g in groups]
    gens = _generators(groups)
    n_blocks = -(-samples // PERM_BLOCK)

    def block(b: int) -> np.ndarray:
        size = min(PERM_BLOCK, samples - b * PERM_BLOCK)
        rng = stream(seed, role, b, N)
        tables = {}
        for gen in gens:
            fwd = random_permutations(rng, size, N)
            tables[gen] = (fwd, invert_rows(fwd))
        return np.stack(_products(groups, tables, size, N, np.float64)) if groups else np.zeros((0, size))

    blocks = parallel_map(block, range(n_blocks))
    return np.concatenate(blocks, axis=1) if blocks else np.zeros((len(groups), 0))


def _estimate(values: np.ndarray) -> Estimate:
    n = values.size
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(mean, stderr, n)


def permutation_fix_average(spec: PermAverageSpec):
    """Mean over independent uniform permutations of prod Fix w(sigma_1..sigma_s).

    Returns a Fraction in exact mode and an :class:`Estimate` in sampled mode.
    The empty multiset averages to 1.
    """
    mode = _resolve_mode(spec.mode, spec.N, len(_generators([spec.words])))
    if mode == "exact":
        return exact_fix_averages([spec.words], spec.N)[0]
    return _estimate(sampled_fix_products([spec.words], spec.N, spec.samples, spec.seed)[0])


def _resolve_mode(mode: str, N: int, n_generators: int) -> str:
    if mode == "auto":
        return "exact" if fits_budget(N, n_generators) else "sampled"
    return mode


# --- term bookkeeping ----------------------------------------------------------


def word_cycle_products(words: Sequence[FreeWord], tau: Perm, gamma: Perm) -> tuple[FreeWord, ...]:
    """w_C = w_{a1} ... w_{ap} for each cycle C = (a1..ap) of tau^-1 gamma, in cycle order."""
    if len(words) != tau.n or tau.n != gamma.n:
        raise ValidationError("words, tau and gamma must have the same size")
    pi = compose(inverse(tau), gamma)
    return tuple(concat_all(words[a - 1] for a in cyc) for cyc in cycle_decomposition(pi))


@dataclass(frozen=True)
class TermSpec:
    """One tau-term: coefficient times the product of its permutation averages.

    ``groups`` pairs each permutation-size role ("square", "top", "bottom") with
    the multiset of cycle words averaged over that size.
    """

    tau: Perm
    coefficient: Fraction
    power_of_N: int
    power_of_M: int
    groups: tuple[tuple[str, tuple[FreeWord, ...]], ...]


@dataclass(frozen=True)
class Term:
    tau: Perm
    power_of_N: int
    power_of_M: int
    perm_average: Fraction | float
    contribution: Fraction | float

    def csv_row(self) -> dict:
        avg = self.perm_average
        if isinstance(avg, Fraction):
            num, den = avg.numerator, avg.denominator
        else:
            num, den = repr(avg), ""
        contrib = self.contribution
        return {
            "tau_cycles": format_cycles(self.tau),
            "power_of_N": self.power_of_N,
            "power_of_M": self.power_of_M,
            "perm_average_num": num,
            "perm_average_den": den,
            "contribution": str(contrib) if isinstance(contrib, Fraction) else repr(contrib),
        }


@dataclass(frozen=True)
class ExactMoment:
    """Finite-size expectation with its per-tau breakdown.

    ``value`` is a Fraction in exact mode; in sampled mode it is a float and
    ``stderr`` is set.
    """

    value: Fraction | float
    terms: tuple[Term, ...] = ()
    stderr: float | None = None
    samples: int = 0

    @property
    def exact(self) -> bool:
        return self.stderr is None

    def __float__(self):
        return float(self.value)


TERM_CSV_FIELDS = ("tau_cycles", "power_of_N", "power_of_M", "perm_average_num", "perm_average_den", "contribution")


def write_terms_csv(moment: ExactMoment, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TERM_CSV_FIELDS)
        writer.writeheader()
        for term in moment.terms:
            writer.writerow(term.csv_row())


def _sizes(N: int, M: int | None) -> dict[str, int]:
    return {"square": N, "top": M if M is not None else N, "bottom": N}


def _evaluate_terms(specs: Sequence[TermSpec], N: int, M: int | None, mode: str, samples: int, seed: int) -> ExactMoment:
    sizes = _sizes(N, M)
    by_role: dict[str, list[tuple[FreeWord, ...]]] = {}
    for spec in specs:
        for role, words in spec.groups:
            by_role.setdefault(role, [])
            if words not in by_role[role]:
                by_role[role].append(words)
    modes = {role: _resolve_mode(mode, sizes[role], len(_generators(groups))) for role, groups in by_role.items()}
    if all(m == "exact" for m in modes.values()):
        averages = {
            role: dict(zip(groups, exact_fix_averages(groups, sizes[role]))) for role, groups in by_role.items()
        }
        terms = []
        for spec in specs:
            avg = Fraction(1)
            for role, words in spec.groups:
                avg *= averages[role][words]
            terms.append(Term(spec.tau, spec.power_of_N, spec.power_of_M, avg, spec.coefficient * avg))
        return ExactMoment(sum((t.contribution for t in terms), Fraction(0)), tuple(terms))
    # sampled: common permutation draws for every term, so the combined estimator has an honest stderr
    role_stream = {"square": "perm", "top": "perm-top", "bottom": "perm-bottom"}
    draws = {
        role: dict(zip(groups, sampled_fix_products(groups, sizes[role], samples, seed, role_stream[role])))
        for role, groups in by_role.items()
    }
    total = np.zeros(samples)
    terms = []
    for spec in specs:
        per_sample = np.ones(samples)
        for role, words in spec.groups:
            per_sample = per_sample * draws[role][words]
        coef = float(spec.coefficient)
        total += coef * per_sample
        avg = float(np.mean(per_sample))
        terms.append(Term(spec.tau, spec.power_of_N, spec.power_of_M, avg, coef * avg))
    est = _estimate(total)
    return ExactMoment(est.mean, tuple(terms), est.stderr, samples)


# --- the formulas ----------------------------------------------------------------


def _alternating(m, kind: str) -> AlternatingForm | Zero:
    form = as_canonical(m)
    if isinstance(form, Zero):
        return form
    if not isinstance(form, AlternatingForm) or form.kind != kind:
        raise ValidationError(f"expected a {kind} alternating monomial, got {form}")
    return form


def _gauss_admissible(letters, tau: Perm) -> bool:
    return all(
        letters[a - 1].r == letters[tau(a) - 1].r and letters[a - 1].star != letters[tau(a) - 1].star
        for a in range(1, tau.n + 1)
    )


def _index_admissible(letters, tau: Perm) -> bool:
    return all(letters[a - 1].r == letters[tau(a) - 1].r for a in range(1, tau.n + 1))


def _balanced(letters) -> bool:
    stars = sum(1 for x in letters if x.star)
    return len(letters) % 2 == 0 and 2 * stars == len(letters)


def _gauss_specs(letters, words, gamma: Perm, N: int, extra_traces: int) -> list[TermSpec]:
    n = len(letters)
    specs = []
    if not _balanced(letters):
        return specs
    for tau in enumerate_pairings(n):
        if not _gauss_admissible(letters, tau):
            continue
        power = cycle_count(tau) - (n + 1 + extra_traces)
        specs.append(TermSpec(tau, Fraction(N) ** power, power, 0, (("square", word_cycle_products(words, tau, gamma)),)))
    return specs


def _wishart_specs(letters, words, gamma: Perm, N: int, M: int, extra_traces: int) -> list[TermSpec]:
    n = len(letters)
    specs = []
    for tau in enumerate_permutations(n):
        if not _index_admissible(letters, tau):
            continue
        k = cycle_count(tau)
        power_n = -(n + 1 + extra_traces)
        specs.append(
            TermSpec(tau, Fraction(M**k) * Fraction(N) ** power_n, power_n, k, (("square", word_cycle_products(words, tau, gamma)),))
        )
    return specs


def _rect_specs(letters, words, gamma: Perm, M: int, N: int, extra_traces: int) -> list[TermSpec]:
    n = len(letters)
    specs = []
    D = M + N
    for tau in enumerate_pairings(n):
        # H* sits at odd positions and H at even ones, so admissible pairings are parity alternating
        if not _gauss_admissible(letters, tau):
            continue
        pi = compose(inverse(tau), gamma)
        odd, even = [], []
        for cyc in cycle_decomposition(pi):
            w = concat_all(words[a - 1] for a in cyc)
            (odd if cyc[0] % 2 == 1 else even).append(w)
        power = cycle_count(tau) - (n + 1 + extra_traces)
        specs.append(TermSpec(tau, Fraction(D) ** power, power, 0, (("top", tuple(odd)), ("bottom", tuple(even)))))
    return specs


def exact_moment_gaussian(m, N: int, mode: str = "exact", samples: int = 100_000, seed: int = 0) -> ExactMoment:
    """E tr(G^{e1} U_{w1} ... G^{en} U_{wn}) at size N."""
    form = _alternating(m, "gauss")
    if isinstance(form, Zero):
        return ExactMoment(Fraction(0))
    specs = _gauss_specs(form.letters, form.words, gamma_n(form.n), N, 0)
    return _evaluate_terms(specs, N, None, mode, samples, seed)


def exact_moment_wishart(m, M: int, N: int, mode: str = "exact", samples: int = 100_000, seed: int = 0) -> ExactMoment:
    """E tr(W U_{w1} ... W U_{wn}) with W = G*G/N and G of size M x N."""
    form = _alternating(m, "wishart")
    if isinstance(form, Zero):
        return ExactMoment(Fraction(0))
    specs = _wishart_specs(form.letters, form.words, gamma_n(form.n), N, M, 0)
    return _evaluate_terms(specs, N, M, mode, samples, seed)


def exact_rectangular_moment(m, M: int, N: int, mode: str = "exact", samples: int = 100_000, seed: int = 0) -> ExactMoment:
    """E tr^{(M+N)} of a rectangular-family monomial; zero unless it has the H* T H U ... shape."""
    form = as_canonical(m)
    if isinstance(form, Zero):
        return ExactMoment(Fraction(0))
    if isinstance(form, PureUWord):
        return pure_u_moment(form.word, N, mode=mode, samples=samples, seed=seed, M=M, block=form.block)
    if form.family != "rectangular":
        raise ValidationError(f"expected a rectangular monomial, got {form}")
    specs = _rect_specs(form.letters, form.words, gamma_n(form.n), M, N, 0)
    return _evaluate_terms(specs, N, M, mode, samples, seed)


def pure_u_moment(w: FreeWord, N: int, mode: str = "exact", samples: int = 100_000, seed: int = 0,
                  M: int | None = None, block: str = "square") -> ExactMoment:
    """E tr U_w = E Fix w(sigma) / N (or / (M+N) for a block word of the rectangular model)."""
    role = "square" if block == "square" else block
    size = {"square": N, "top": M, "bottom": N}[role]
    if size is None:
        raise ValidationError("M is required for a top-block word")
    D = N if block == "square" else (M or 0) + N
    spec = TermSpec(Perm.identity(1), Fraction(1, D), -1, 0, ((role, (w,)),))
    return _evaluate_terms([spec], N, M, mode, samples, seed)


def pure_u_variance(w: FreeWord, N: int, mode: str = "exact", samples: int = 100_000, seed: int = 0,
                    M: int | None = None, block: str = "square") -> ExactMoment:
    """Var(tr U_w) = (E Fix^2 - (E Fix)^2) / N^2 (Fix w^-1 = Fix w)."""
    role = "square" if block == "square" else block
    size = {"square": N, "top": M, "bottom": N}[role]
    if size is None:
        raise ValidationError("M is required for a top-block word")
    D = N if block == "square" else (M or 0) + N
    gens = len(w.generators)
    if _resolve_mode(mode, size, gens) == "exact":
        second, first = exact_fix_averages([(w, w), (w,)], size)
        return ExactMoment((second - first**2) / D**2)
    role_stream = {"square": "perm", "top": "perm-top", "bottom": "perm-bottom"}[role]
    fix = sampled_fix_products([(w,)], size, samples, seed, role_stream)[0] / D
    # unbiased sample variance; its stderr via the delta method on centred squares
    centred = (fix - fix.mean()) ** 2
    var = float(np.var(fix, ddof=1))
    return ExactMoment(var, (), float(np.std(centred, ddof=1) / math.sqrt(samples)), samples)


def exact_moment(m, N: int, M: int | None = None, mode: str = "exact", samples: int = 100_000, seed: int = 0) -> ExactMoment:
    """Dispatch to the finite-size formula matching the monomial's family."""
    form = as_canonical(m)
    if isinstance(form, Zero):
        return ExactMoment(Fraction(0))
    if isinstance(form, PureUWord):
        return pure_u_moment(form.word, N, mode, samples, seed, M=M, block=form.block)
    if form.kind == "gauss":
        return exact_moment_gaussian(form, N, mode, samples, seed)
    if M is None:
        raise ValidationError(f"M is required for {form.kind} monomials")
    if form.kind == "wishart":
        return exact_moment_wishart(form, M, N, mode, samples, seed)
    return exact_rectangular_moment(form, M, N, mode, samples, seed)


# --- second-order quantities ----------------------------------------------------------


def _product_specs(a: AlternatingForm, b: AlternatingForm, N: int, M: int | None) -> list[TermSpec]:
    letters = a.letters + b.letters
    words = a.words + b.words
    gamma = gamma_mn(a.n, b.n)
    if a.kind == "gauss":
        return _gauss_specs(letters, words, gamma, N, 1)
    if a.kind == "wishart":
        return _wishart_specs(letters, words, gamma, N, M, 1)
    return _rect_specs(letters, words, gamma, M, N, 1)


def _product_forms(a, b):
    fa, fb = as_canonical(a), as_canonical(b)
    if isinstance(fa, Zero) or isinstance(fb, Zero):
        return None
    if isinstance(fa, PureUWord) or isinstance(fb, PureUWord):
        raise UnsupportedError("product expectations need G/W/H factors on both sides; use pure_u_variance for pure words")
    if fa.kind != fb.kind:
        raise UnsupportedError(f"cannot pair a {fa.kind} monomial with a {fb.kind} one")
    return fa, fb


def exact_product_expectation(a, b, N: int, M: int | None = None, mode: str = "exact", samples: int = 100_000,
                              seed: int = 0) -> ExactMoment:
    """E(tr a * tr b), summing over tau in S_{m+n} (pairings for Gaussian/rectangular) against gamma_{m,n}."""
    forms = _product_forms(a, b)
    if forms is None:
        return ExactMoment(Fraction(0))
    fa, fb = forms
    if fa.kind != "gauss" and M is None:
        raise ValidationError(f"M is required for {fa.kind} monomials")
    return _evaluate_terms(_product_specs(fa, fb, N, M), N, M, mode, samples, seed)


@dataclass(frozen=True)
class Covariance:
    """E(tr a tr b) - E tr a E tr b, split as in the O(1/N^2) argument.

    ``connected`` sums the (m,n)-connected tau terms; ``split`` maps each
    product tau = tau1 + tau2 to f_N - g_N times its power of N (and M).
    """

    value: Fraction
    connected: Fraction
    split: dict = field(default_factory=dict)


def covariance(a, b, N: int, M: int | None = None) -> Covariance:
    """Exact covariance of tr a and tr b with its connected/split decomposition."""
    forms = _product_forms(a, b)
    if forms is None:
        return Covariance(Fraction(0), Fraction(0))
    fa, fb = forms
    joint = exact_product_expectation(fa, fb, N, M)
    ea, eb = exact_moment(fa, N, M), exact_moment(fb, N, M)
    value = joint.value - ea.value * eb.value
    m = fa.n
    connected = sum((t.contribution for t in joint.terms if is_mn_connected(t.tau, m, fb.n)), Fraction(0))
    single_a = {t.tau: t for t in ea.terms}
    single_b = {t.tau: t for t in eb.terms}
    split = {}
    for t in joint.terms:
        if is_mn_connected(t.tau, m, fb.n):
            continue
        t1, t2 = restrict(t.tau, 1, m), restrict(t.tau, m + 1, m + fb.n)
        g = single_a[t1].perm_average * single_b[t2].perm_average
        scale = t.contribution / t.perm_average if t.perm_average else _term_scale(t, N, M, fa.kind)
        split[(t1, t2)] = scale * (t.perm_average - g)
    # tau1/tau2 pairs missing from the joint sum contribute -E_a E_b terms only if
    # admissible separately, which forces admissibility jointly; nothing is lost.
    return Covariance(value, connected, split)


def _term_scale(t: Term, N: int, M: int | None, kind: str) -> Fraction:
    if kind == "rectangular":
        return Fraction(M + N) ** t.power_of_N
    return Fraction(M or 1) ** t.power_of_M * Fraction(N) ** t.power_of_N


def exact_variance(m, N: int, M: int | None = None, mode: str = "exact", samples: int = 100_000, seed: int = 0):
    """Var(tr m) = E|tr m|^2 - |E tr m|^2, exactly (or from permutation samples)."""
    form = as_canonical(m)
    if isinstance(form, Zero):
        return ExactMoment(Fraction(0))
    if isinstance(form, PureUWord):
        return pure_u_variance(form.word, N, mode, samples, seed, M=M, block=form.block)
    star = as_canonical(adjoint(form.to_monomial()))
    joint = exact_product_expectation(form, star, N, M, mode, samples, seed)
    mean = exact_moment(form, N, M, mode, samples, seed + 1 if mode != "exact" else seed)
    value = joint.value - mean.value * mean.value
    if joint.exact and mean.exact:
        return ExactMoment(value, joint.terms)
    stderr = math.hypot(joint.stderr or 0.0, 2 * abs(float(mean.value)) * (mean.stderr or 0.0))
    return ExactMoment(float(value), joint.terms, stderr, samples)

"""Experiment orchestration: convergence, variance decay, demos and probes.

Every study returns a list of :class:`ReportRow`, sorted by (monomial, N,
estimator). A failing row becomes an ``error`` row; the sweep continues.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetError, PermfreeError, ValidationError
from .exact import ExactMoment, exact_fix_averages, exact_moment, exact_variance, fits_budget, sampled_fix_products
from .limits import freeness_prediction, limit_at
from .monomial import AlternatingForm, PureUWord, canonicalize, parse_monomial
from .perms import catalan
from .report import ReportRow, sort_rows
from .rng import parallel_map, stream
from .sim import (
    build_ensemble,
    evaluate_monomial_trace,
    mc_traces,
    required_tags,
    sample_gaussian_matrix,
    summarize,
)
from .words import FreeWord, format_word, parse_word


@dataclass
class ExperimentConfig:
    monomials: list[str] = field(default_factory=list)
    sizes: list[int] = field(default_factory=lambda: [2, 4, 6])
    ms: list[int] | None = None
    c: Fraction = Fraction(1)
    samples: int = 1000
    perm_samples: int = 100_000
    seed: int = 0
    mode: str = "auto"
    include_mc: bool = False
    s: int = 2
    fmt: str = "csv"
    out: str | None = None

    def __post_init__(self):
        self.c = Fraction(self.c)
        if self.c <= 0:
            raise ValidationError("c must be positive")
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise ValidationError("sizes must be positive")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValidationError("sizes must be strictly increasing")
        if self.ms is not None:
            if len(self.ms) != len(self.sizes) or any(m < 1 for m in self.ms):
                raise ValidationError("--m needs one positive M per N")
        if self.samples < 1 or self.perm_samples < 2:
            raise ValidationError("samples must be at least 1 and perm-samples at least 2")
        if self.mode not in ("exact", "sampled", "auto"):
            raise ValidationError("mode must be exact, sampled or auto")
        if self.s < 1:
            raise ValidationError("s must be positive")
        for text in self.monomials:
            parse_monomial(text, self.s)

    def m_for(self, N: int) -> int:
        if self.ms is not None:
            return self.ms[self.sizes.index(N)]
        return max(1, round(self.c * N))


def _uses_m(form) -> bool:
    if isinstance(form, PureUWord):
        return form.block != "square"
    if isinstance(form, AlternatingForm):
        return form.kind != "gauss"
    return False


def _timed(fn: Callable[[], ReportRow]) -> ReportRow:
    start = time.perf_counter()
    row = fn()
    return _with_runtime(row, (time.perf_counter() - start) * 1000.0)


def _with_runtime(row: ReportRow, ms: float) -> ReportRow:
    return replace(row, runtime_ms=ms)


def _guard(label: str, N: int | None, M: int | None, fn: Callable[[], ReportRow]) -> ReportRow:
    try:
        return _timed(fn)
    except (PermfreeError, ValueError) as exc:
        return ReportRow(label, N, M, "error", error=f"{type(exc).__name__}: {exc}")


def _abs_err(value: complex, limit: Fraction | None) -> float | None:
    if limit is None:
        return None
    return abs(complex(value) - float(limit))


def _moment_row(label, N, M, moment: ExactMoment, limit) -> ReportRow:
    if moment.exact:
        value = Fraction(moment.value)
        return ReportRow(label, N, M, "exact", float(value), 0.0, None, _abs_err(float(value), limit), exact=value)
    return ReportRow(label, N, M, "exact-sampled", float(moment.value), 0.0, moment.stderr, _abs_err(moment.value, limit))


def limit_rows(config: ExperimentConfig) -> list[ReportRow]:
    rows = []
    for text in config.monomials:
        def one(text=text):
            value = limit_at(freeness_prediction(parse_monomial(text, config.s)), config.c)
            return ReportRow(text, None, None, "limit", float(value), 0.0, None, None, exact=value)

        rows.append(_guard(text, None, None, one))
    return sort_rows(rows)


def _limit_or_none(text: str, config: ExperimentConfig) -> Fraction | None:
    try:
        return limit_at(freeness_prediction(parse_monomial(text, config.s)), config.c)
    except PermfreeError:
        return None


def exact_rows(config: ExperimentConfig, with_limit_error: bool = True) -> list[ReportRow]:
    rows = []
    for text in config.monomials:
        form = canonicalize(parse_monomial(text, config.s))
        limit = _limit_or_none(text, config) if with_limit_error else None
        for N in config.sizes:
            M = config.m_for(N) if _uses_m(form) else None
            rows.append(
                _guard(
                    text, N, M,
                    lambda N=N, M=M, form=form, text=text: _moment_row(
                        text, N, M, exact_moment(form, N, M, config.mode, config.perm_samples, config.seed), limit
                    ),
                )
            )
    return sort_rows(rows)


def mc_rows(config: ExperimentConfig, with_limit_error: bool = True) -> list[ReportRow]:
    rows = []
    for text in config.monomials:
        form = canonicalize(parse_monomial(text, config.s))
        limit = _limit_or_none(text, config) if with_limit_error else None
        for N in config.sizes:
            M = config.m_for(N) if _uses_m(form) else None

            def one(N=N, M=M, form=form, text=text):
                est = summarize(mc_traces(form, N, M if M is not None else N, config.samples, config.seed, config.s), config.seed)
                return ReportRow(text, N, M, "mc", est.mean.real, est.mean.imag, est.stderr, _abs_err(est.mean, limit))

            rows.append(_guard(text, N, M, one))
    return sort_rows(rows)


def run_convergence_study(config: ExperimentConfig) -> list[ReportRow]:
    """Limit value, finite-N expectation and (optionally) full Monte Carlo per monomial and N."""
    rows = limit_rows(config) + exact_rows(config)
    if config.include_mc:
        rows += mc_rows(config)
    return sort_rows(rows)


def _variance_pair(text, N, M, estimator, var: float, stderr, exact: Fraction | None) -> list[ReportRow]:
    scale = N * N
    return [
        ReportRow(f"Var[{text}]", N, M, estimator, var, 0.0, stderr, None, exact=exact),
        ReportRow(
            f"N^2*Var[{text}]", N, M, estimator, var * scale, 0.0, None if stderr is None else stderr * scale, None,
            exact=None if exact is None else exact * scale,
        ),
    ]


def mc_variance(form, N: int, M: int | None, samples: int, seed: int, s: int) -> tuple[float, float]:
    """Sample variance of the normalized trace and a standard error for it."""
    if samples < 2:
        raise ValidationError("variance needs at least 2 samples")
    values = mc_traces(form, N, M if M is not None else N, samples, seed, s)
    centred = np.abs(values - np.sum(values) / samples) ** 2
    var = float(np.sum(centred) / (samples - 1))
    stderr = float(np.std(centred, ddof=1) / math.sqrt(samples))
    return var, stderr


def run_variance_study(config: ExperimentConfig) -> list[ReportRow]:
    """Var(tr m) and N^2 Var(tr m): exact where enumeration allows, matrix Monte Carlo otherwise."""
    rows: list[ReportRow] = []
    for text in config.monomials:
        form = canonicalize(parse_monomial(text, config.s))
        for N in config.sizes:
            M = config.m_for(N) if _uses_m(form) else None
            start = time.perf_counter()
            try:
                pair = _variance_rows_for(text, form, N, M, config)
            except (PermfreeError, ValueError) as exc:
                pair = [ReportRow(f"Var[{text}]", N, M, "error", error=f"{type(exc).__name__}: {exc}")]
            elapsed = (time.perf_counter() - start) * 1000.0
            rows += [_with_runtime(r, elapsed) for r in pair]
    return sort_rows(rows)


def _variance_rows_for(text, form, N, M, config: ExperimentConfig) -> list[ReportRow]:
    if config.mode in ("exact", "auto"):
        try:
            var = exact_variance(form, N, M, "exact")
            return _variance_pair(text, N, M, "exact", float(var.value), None, Fraction(var.value))
        except BudgetError:
            if config.mode == "exact":
                raise
    var, stderr = mc_variance(form, N, M, config.samples, config.seed, config.s)
    return _variance_pair(text, N, M, "mc", var, stderr, None)


# --- demos ---------------------------------------------------------------------------

DEMOS = ("permuted-gue", "permuted-wishart", "diagonal-obstruction")

#: Alternating and non-alternating *-words in Y = U W and Y* = W U^-1.
WISHART_WORDS = ("Y Y*", "Y* Y", "Y Y", "Y Y* Y Y*", "Y Y Y* Y*", "Y Y* Y* Y", "Y Y Y Y*")


def y_word_monomial(word: str) -> str:
    """Translate a word in Y = U_{g1} W1 and Y* = W1 U_{g1^-1} into the monomial grammar."""
    parts = []
    for tok in word.split():
        if tok == "Y":
            parts += ["U[g1]", "W1"]
        elif tok == "Y*":
            parts += ["W1", "U[g1^-1]"]
        else:
            raise ValidationError(f"unknown Y-word token {tok!r}")
    return " ".join(parts)


def _multi_mc(monomials, N: int, M: int, samples: int, seed: int) -> list:
    """Evaluate several monomials on the same ensemble draws."""
    forms = [canonicalize(parse_monomial(m, 2)) for m in monomials]
    tags = frozenset().union(*(required_tags(f) for f in forms))

    def one(i: int):
        sample = build_ensemble(N, M, tags, 1, stream(seed, "demo", i))
        return [evaluate_monomial_trace(f, sample) for f in forms]

    values = np.array(parallel_map(one, range(samples)), dtype=complex).reshape(samples, len(forms))
    return [summarize(values[:, j], seed) for j in range(len(forms))]


def _gue_powers(N: int, samples: int, seed: int, kmax: int):
    def one(i: int):
        rng = stream(seed, "demo", i)
        perm = rng.permutation(N)
        g = sample_gaussian_matrix(N, N, rng) / math.sqrt(N)
        # row gather by a uniform permutation: X = U (G + G*)/sqrt 2 with U uniform
        x = ((g + g.conj().T) / math.sqrt(2))[perm, :]
        a = x @ x.conj().T
        power = np.eye(N, dtype=complex)
        out = []
        for _ in range(kmax):
            power = power @ a
            out.append(np.trace(power) / N)
        return out

    values = np.array(parallel_map(one, range(samples)), dtype=complex).reshape(samples, kmax)
    return [summarize(values[:, k], seed) for k in range(kmax)]


def run_demo(name: str, N: int = 512, samples: int = 400, seed: int = 0, c: Fraction = Fraction(1),
             kmax: int = 3) -> list[ReportRow]:
    if name not in DEMOS:
        raise ValidationError(f"unknown demo {name!r}; choose from {DEMOS}")
    start = time.perf_counter()
    rows: list[ReportRow] = []
    if name == "permuted-gue":
        for k, est in enumerate(_gue_powers(N, samples, seed, kmax), start=1):
            target = catalan(k)
            rows.append(ReportRow(f"tr((XX*)^{k})", N, None, "mc", est.mean.real, est.mean.imag, est.stderr,
                                  abs(est.mean - target)))
    elif name == "permuted-wishart":
        M = max(1, round(Fraction(c) * N))
        monomials = [y_word_monomial(w) for w in WISHART_WORDS]
        for word, mono, est in zip(WISHART_WORDS, monomials, _multi_mc(monomials, N, M, samples, seed)):
            target = limit_at(freeness_prediction(mono), c)
            rows.append(ReportRow(f"tr({word})", N, M, "mc", est.mean.real, est.mean.imag, est.stderr,
                                  abs(est.mean - float(target)), exact=target))
    else:
        rows.append(_diagonal_obstruction(N, samples, seed))
    elapsed = (time.perf_counter() - start) * 1000.0
    return sort_rows(_with_runtime(r, elapsed) for r in rows)


def diagonal_obstruction_gap(N: int, rng: np.random.Generator) -> float:
    """max |U*DUD - DU*DU| for one sampled permutation U and D = diag(1..N)."""
    perm = rng.permutation(N)
    u = np.zeros((N, N))
    u[perm, np.arange(N)] = 1.0
    d = np.diag(np.arange(1, N + 1, dtype=float))
    return float(np.max(np.abs(u.T @ d @ u @ d - d @ u.T @ d @ u)))


def _diagonal_obstruction(N: int, draws: int, seed: int) -> ReportRow:
    gaps = parallel_map(lambda i: diagonal_obstruction_gap(N, stream(seed, "demo", i)), range(draws))
    worst = max(gaps) if gaps else 0.0
    return ReportRow("max|U*DUD-DU*DU|", N, None, "mc", worst, 0.0, 0.0, worst)


# --- boundedness probe ------------------------------------------------------------------


def _probe_groups(words: Sequence[FreeWord]):
    groups = []
    for w in words:
        name = format_word(w)
        groups.append((f"Fix[{name}]", (w,)))
        groups.append((f"Fix^2[{name}]", (w, w)))
    for a, b in zip(words, words[1:]):
        groups.append((f"Fix[{format_word(a)}]*Fix[{format_word(b)}]", (a, b)))
    return groups


def run_boundedness_probe(words: Sequence[str | FreeWord], sizes: Sequence[int], samples: int = 100_000,
                          seed: int = 0, mode: str = "auto", s: int = 2) -> list[ReportRow]:
    """Averages of Fix products over uniform permutation tuples, per N."""
    parsed = [w if isinstance(w, FreeWord) else parse_word(w, s) for w in words]
    groups = _probe_groups(parsed)
    rows = []
    for N in sizes:
        start = time.perf_counter()
        gens = set().union(*(w.generators for w in parsed)) if parsed else set()
        use_exact = mode == "exact" or (mode == "auto" and fits_budget(N, len(gens)))
        try:
            if use_exact:
                values = exact_fix_averages([g for _, g in groups], N)
                batch = [ReportRow(label, N, None, "exact", float(v), 0.0, exact=v) for (label, _), v in zip(groups, values)]
            else:
                draws = sampled_fix_products([g for _, g in groups], N, samples, seed)
                batch = [
                    ReportRow(label, N, None, "exact-sampled", float(np.mean(d)), 0.0, float(np.std(d, ddof=1) / math.sqrt(samples)))
                    for (label, _), d in zip(groups, draws)
                ]
        except (PermfreeError, ValueError) as exc:
            batch = [ReportRow("probe", N, None, "error", error=f"{type(exc).__name__}: {exc}")]
        elapsed = (time.perf_counter() - start) * 1000.0
        rows += [_with_runtime(r, elapsed) for r in batch]
    return sort_rows(rows)

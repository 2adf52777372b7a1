"""Acceptance criteria 1-9.

Each test prints exactly one line ``[PASS] criterion k: ...`` or
``[FAIL] criterion k: ...``; the lines are repeated in the pytest terminal
summary. Run ``pytest tests/test_acceptance.py -v`` (add ``-s`` to see them
inline) or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

from permfree.exact import exact_moment, exact_variance
from permfree.golden import RECTANGULAR, SUITE, family_of
from permfree.limits import (
    circular_mixed_moment,
    free_poisson_mixed_moment,
    free_poisson_moment,
    freeness_prediction,
    limit_at,
    moments_from_cumulants,
    CPolynomial,
    rectangular_limit_terms,
)
from permfree.monomial import canonicalize, parse_monomial
from permfree.perms import (
    catalan,
    compose,
    cycle_count,
    double_factorial,
    enumerate_nc_pairings,
    enumerate_noncrossing,
    enumerate_pairings,
    enumerate_permutations,
    gamma_mn,
    gamma_n,
    inverse,
    is_mn_connected,
)
from permfree.studies import mc_variance, run_demo
from permfree.wick import oracle_expectation

RESULTS: dict[int, str] = {}


def record(k: int, ok: bool, detail: str, elapsed: float, budget: float | None = None) -> None:
    within = budget is None or elapsed <= budget
    status = "PASS" if ok and within else "FAIL"
    timing = f"{elapsed:.1f}s" + (f" (limit {budget:.0f}s)" if budget is not None else "")
    line = f"[{status}] criterion {k}: {detail}; {timing}"
    RESULTS[k] = line
    print(line)
    assert ok, line
    assert within, line


def M_for(text: str, N: int):
    return N if family_of(text) in ("wishart", "rectangular") else None


def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    checked = mismatches = 0
    for text in SUITE:
        for N in (2, 3):
            for M in ((2, 3) if M_for(text, N) else (None,)):
                checked += 1
                if oracle_expectation(text, N, M) != exact_moment(text, N, M).value:
                    mismatches += 1
    ok = len(SUITE) >= 12 and mismatches == 0
    record(1, ok, f"{checked} oracle comparisons over {len(SUITE)} monomials, {mismatches} mismatches",
           time.perf_counter() - start, 120)


def test_criterion_2_closed_forms():
    start = time.perf_counter()
    failures = []

    def check(label, got, want):
        if got != want:
            failures.append(f"{label}: {got} != {want}")

    for N in range(2, 7):
        check(f"GG* N={N}", exact_moment("G1 U[e] G1* U[e]", N).value, 1)
        check(f"(GG*)^2 N={N}", exact_moment("G1 U[e] G1* U[e] G1 U[e] G1* U[e]", N).value, 2)
        check(f"G g1 G* g1^-1 N={N}", exact_moment("G1 U[g1] G1* U[g1^-1]", N).value, Fraction(2, N * N))
        for M in range(1, 7):
            check(f"W N={N} M={M}", exact_moment("W1", N, M).value, Fraction(M, N))
            check(f"WW N={N} M={M}", exact_moment("W1 U[e] W1 U[e]", N, M).value, Fraction(M, N) + Fraction(M * M, N * N))
            check(f"W g1 W g1^-1 N={N} M={M}", exact_moment("W1 U[g1] W1 U[g1^-1]", N, M).value,
                  Fraction(M * M, N * N) + Fraction(2 * M, N**3))
            check(f"H*TH U N={N} M={M}", exact_moment("H1* T[e] H1 U[e]", N, M).value, Fraction(M * N, (M + N) ** 2))
        check(f"U g1 N={N}", exact_moment("U[g1]", N).value, Fraction(1, N))
        check(f"U g1^2 N={N}", exact_moment("U[g1^2]", N).value, Fraction(2, N))
    record(2, not failures, f"{len(failures)} closed-form mismatches at N = 2..6" + (f" ({failures[:3]})" if failures else ""),
           time.perf_counter() - start, 60)


def test_criterion_3_variance_decay():
    start = time.perf_counter()
    exact_ok = all(exact_variance("G1 U[e] G1* U[e]", N).value * N * N == 1 for N in range(2, 7))
    worst = 1.0
    offenders = []
    for i, text in enumerate(SUITE):
        form = canonicalize(parse_monomial(text))
        scaled = []
        for N in (16, 32, 64):
            var, _ = mc_variance(form, N, M_for(text, N), 1000, seed=1000 + i, s=2)
            scaled.append(var * N * N)
        ratio = max(scaled[0] / min(scaled), max(scaled) / scaled[0])
        worst = max(worst, ratio)
        if ratio > 4:
            offenders.append(text)
    ok = exact_ok and not offenders
    record(3, ok, f"exact N^2 Var(GG*) = 1 for N=2..6: {exact_ok}; worst MC N^2 Var ratio vs N=16 over the suite {worst:.2f} (bound 4)"
           + (f"; offenders {offenders}" if offenders else ""), time.perf_counter() - start, 300)


def test_criterion_4_limit_formulas():
    start = time.perf_counter()
    catalan_ok = all(circular_mixed_moment(" ".join(["G1 U[e] G1* U[e]"] * k)) == catalan(k) for k in range(1, 6))
    c = CPolynomial.monomial(1)
    poisson_ok = True
    for n in range(1, 7):
        direct = free_poisson_moment(n)
        poisson_ok &= direct == moments_from_cumulants([c] * n)[-1]
        poisson_ok &= direct == free_poisson_mixed_moment(" ".join(["W1"] * n))
    rect_ok = True
    for text in RECTANGULAR + ("H1* T[e] H1 U[e] H1* T[e] H1 U[e]", "H1* T[g1] H1 U[e] H1* T[g1^-1] H1 U[e]"):
        terms = rectangular_limit_terms(text)
        rect_ok &= terms.kreweras_route == terms.projection_route
    ok = catalan_ok and poisson_ok and rect_ok
    record(4, ok, f"Catalan k<=5: {catalan_ok}; free Poisson NC sum = cumulant path n<=6: {poisson_ok}; "
           f"rectangular routes agree: {rect_ok}", time.perf_counter() - start, 30)


def test_criterion_5_convergence():
    start = time.perf_counter()
    lines = []
    ok = True
    for text in SUITE:
        limit = float(limit_at(freeness_prediction(text), 1))
        res = {}
        for N in (8, 64):
            moment = exact_moment(text, N, M_for(text, N), mode="auto", samples=100_000, seed=17)
            res[N] = (abs(float(moment.value) - limit), moment.stderr or 0.0)
        (e8, s8), (e64, s64) = res[8], res[64]
        good = e64 <= 0.1 and e64 <= e8 + 3 * math.hypot(s8, s64)
        ok &= good
        if not good:
            lines.append(f"{text}: err64={e64:.3g} err8={e8:.3g}")
    record(5, ok, f"|E tr - limit| at N=64 <= 0.1 and <= N=8 error + 3 se for all {len(SUITE)} monomials"
           + (f"; failures {lines}" if lines else ""), time.perf_counter() - start, 600)


def test_criterion_6_permuted_gue():
    start = time.perf_counter()
    rows = run_demo("permuted-gue", N=512, samples=400, seed=6)
    worst = []
    ok = True
    for k, row in enumerate(rows, start=1):
        target = catalan(k)
        tol = max(0.05 * target, 4 * row.stderr)
        ok &= row.abs_error_vs_limit <= tol
        worst.append(f"k={k}: {row.value_re:.4f} vs {target}")
    record(6, ok and len(rows) == 3, "; ".join(worst), time.perf_counter() - start, 600)


def test_criterion_7_permuted_wishart():
    start = time.perf_counter()
    rows = run_demo("permuted-wishart", N=256, samples=400, seed=7, c=Fraction(1))
    ok = True
    bad = []
    for row in rows:
        if row.abs_error_vs_limit > 4 * row.stderr + 0.05:
            ok = False
            bad.append(row.monomial)
    record(7, ok, f"{len(rows)} *-moments of Y = UW within 4 se + 0.05 of predictions" + (f"; failures {bad}" if bad else ""),
           time.perf_counter() - start, 600)


def test_criterion_8_combinatorics():
    start = time.perf_counter()
    nc_ok = [sum(1 for _ in enumerate_noncrossing(n)) for n in range(1, 6)] == [1, 2, 5, 14, 42]
    ncp_ok = all(sum(1 for _ in enumerate_nc_pairings(2 * k)) == catalan(k) for k in range(1, 5))
    pair_ok = all(sum(1 for _ in enumerate_pairings(2 * k)) == double_factorial(2 * k - 1) for k in range(1, 5))
    ineq_ok = True
    for n in range(1, 8):
        g = gamma_n(n)
        for tau in enumerate_permutations(n):
            ineq_ok &= cycle_count(tau) + cycle_count(compose(inverse(tau), g)) <= n + 1
    conn_ok = True
    for total in range(2, 8):
        for m in range(1, total):
            g = gamma_mn(m, total - m)
            for tau in enumerate_permutations(total):
                if is_mn_connected(tau, m, total - m):
                    conn_ok &= cycle_count(tau) + cycle_count(compose(inverse(tau), g)) <= total
    ok = nc_ok and ncp_ok and pair_ok and ineq_ok and conn_ok
    record(8, ok, f"|NC_n| {nc_ok}, |NC_2k^(2)| {ncp_ok}, |S_2k^(2)| {pair_ok}, genus bound {ineq_ok}, "
           f"connected bound {conn_ok}", time.perf_counter() - start, 60)


def _cli(args, threads: int, out: Path) -> str:
    env = dict(os.environ, PERMFREE_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "permfree", *args, "--out", str(out)], env=env, check=True,
                   capture_output=True)
    lines = out.read_text().splitlines()
    # drop the runtime_ms column, the one field outside the determinism contract
    return "\n".join(line.rsplit(",", 1)[0] for line in lines)


DETERMINISM_RUNS = (
    ["converge", "--monomial", "G1 U[g1.g2] G1* U[e]", "--monomial", "W1 U[g1] W1 U[g1^-1]", "--n", "4,9",
     "--perm-samples", "20000", "--with-mc", "--samples", "40", "--seed", "99"],
    ["variance", "--monomial", "H1* T[g1] H1 U[g1]", "--monomial", "U[g1^2]", "--n", "3,12", "--samples", "60", "--seed", "5"],
    ["mc", "--monomial", "W1 U[g1] W2 U[g2]", "--n", "8,16", "--c", "1.5", "--samples", "50"],
    ["demo", "permuted-wishart", "--n", "24", "--samples", "30", "--seed", "3"],
    ["probe", "--word", "g1.g2.g1^-1.g2^-1", "--n", "8,16", "--perm-samples", "9000"],
)


def test_criterion_9_determinism(tmp_path):
    start = time.perf_counter()
    identical = 0
    for i, args in enumerate(DETERMINISM_RUNS):
        a = _cli(args, 1, tmp_path / f"a{i}.csv")
        b = _cli(args, 4, tmp_path / f"b{i}.csv")
        identical += a == b and len(a.splitlines()) > 1
    ok = identical == len(DETERMINISM_RUNS)
    record(9, ok, f"{identical}/{len(DETERMINISM_RUNS)} CLI studies byte-identical (minus runtime_ms) "
           "with PERMFREE_THREADS=1 vs 4", time.perf_counter() - start)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))

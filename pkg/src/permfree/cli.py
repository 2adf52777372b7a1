"""Command-line entry point: ``permfree <subcommand> [flags]``.

Exit codes: 0 success, 2 parse/validation error, 3 budget error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .errors import BudgetError, PermfreeError, ValidationError
from .exact import exact_moment, write_terms_csv
from .monomial import canonicalize, parse_monomial
from .perms import enumerate_nc_pairings, enumerate_noncrossing, enumerate_pairings, enumerate_permutations, format_cycles
from .report import emit_report
from .studies import (
    DEMOS,
    ExperimentConfig,
    exact_rows,
    limit_rows,
    mc_rows,
    run_boundedness_probe,
    run_convergence_study,
    run_demo,
    run_variance_study,
)

ENUMERATORS = {
    "perms": enumerate_permutations,
    "pairings": enumerate_pairings,
    "nc": enumerate_noncrossing,
    "nc-pairings": enumerate_nc_pairings,
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _shared(p: argparse.ArgumentParser, default_n: str = "2,4,6") -> None:
    p.add_argument("--s", type=int, default=2, help="number of generator families (default 2)")
    p.add_argument("--monomial", action="append", default=[], help="monomial in the factor grammar; repeatable")
    p.add_argument("--n", type=_int_list, default=_int_list(default_n), help=f"comma list of N (default {default_n})")
    size = p.add_mutually_exclusive_group()
    size.add_argument("--m", type=_int_list, help="comma list of M, one per N")
    size.add_argument("--c", type=_fraction, default=Fraction(1), help="ratio c; M = round(c N) (default 1)")
    p.add_argument("--samples", type=int, default=1000, help="matrix Monte Carlo samples")
    p.add_argument("--perm-samples", type=int, default=100_000, help="permutation tuples in sampled mode")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--mode", choices=("exact", "sampled", "auto"), default="auto",
                   help="permutation averages: exhaustive, sampled, or exhaustive when within budget")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="report path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permfree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    _shared(sub.add_parser("limit", help="limit values of monomials"))
    p = sub.add_parser("exact", help="finite-N expectations")
    _shared(p)
    p.add_argument("--terms", default=None, help="write the per-tau breakdown of a single monomial and N to this CSV")
    _shared(sub.add_parser("mc", help="full matrix Monte Carlo estimates"), "16,32")
    p = sub.add_parser("converge", help="limit vs finite-N convergence study")
    _shared(p)
    p.add_argument("--with-mc", action="store_true", help="add matrix Monte Carlo rows")
    _shared(sub.add_parser("variance", help="variance decay study"))

    p = sub.add_parser("enumerate", help="list permutation classes")
    p.add_argument("kind", choices=sorted(ENUMERATORS))
    p.add_argument("size", type=int)
    p.add_argument("--count", action="store_true", help="print only the count")

    p = sub.add_parser("demo", help="named Monte Carlo demonstrations")
    p.add_argument("name", choices=DEMOS)
    _shared(p, "512")

    p = sub.add_parser("probe", help="Fix-product averages over N")
    p.add_argument("--word", action="append", default=[], help="free-group word, e.g. g1.g2.g1^-1; repeatable")
    _shared(p, "8,16,32,64")
    return parser


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        monomials=list(args.monomial),
        sizes=list(args.n),
        ms=args.m,
        c=args.c,
        samples=args.samples,
        perm_samples=args.perm_samples,
        seed=args.seed,
        mode=args.mode,
        include_mc=getattr(args, "with_mc", False),
        s=args.s,
        fmt=args.fmt,
        out=args.out,
    )


def _run(args) -> int:
    if args.command == "enumerate":
        perms = list(ENUMERATORS[args.kind](args.size))
        if args.count:
            print(len(perms))
        else:
            for p in perms:
                print(format_cycles(p))
        return 0

    config = _config(args)
    if args.command == "demo":
        if len(config.sizes) != 1:
            raise ValidationError("demo takes a single --n")
        rows = run_demo(args.name, config.sizes[0], config.samples, config.seed, config.c)
    elif args.command == "probe":
        if not args.word:
            raise ValidationError("probe needs at least one --word")
        rows = run_boundedness_probe(args.word, config.sizes, config.perm_samples, config.seed, config.mode, config.s)
    else:
        if not config.monomials:
            raise ValidationError(f"{args.command} needs at least one --monomial")
        if args.command == "limit":
            rows = limit_rows(config)
        elif args.command == "exact":
            rows = exact_rows(config)
            if args.terms:
                _write_terms(config, args.terms)
        elif args.command == "mc":
            rows = mc_rows(config)
        elif args.command == "converge":
            rows = run_convergence_study(config)
        else:
            rows = run_variance_study(config)
    status = 0
    for row in rows:
        if row.error:
            print(f"permfree: {row.monomial} N={row.N}: {row.error}", file=sys.stderr)
            if not status:
                status = 3 if row.error.startswith("BudgetError") else 2
    emit_report(rows, config.fmt, config.out)
    # failed rows are reported, not fatal; the exit status still flags the first failure
    return status


def _write_terms(config: ExperimentConfig, path: str) -> None:
    if len(config.monomials) != 1 or len(config.sizes) != 1:
        raise ValidationError("--terms needs exactly one --monomial and one --n")
    N = config.sizes[0]
    form = canonicalize(parse_monomial(config.monomials[0], config.s))
    moment = exact_moment(form, N, config.m_for(N), config.mode, config.perm_samples, config.seed)
    write_terms_csv(moment, path)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except BudgetError as exc:
        print(f"permfree: budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (PermfreeError, ValueError) as exc:
        print(f"permfree: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"permfree: I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

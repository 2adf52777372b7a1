"""Asymptotic freeness of randomly permuted Gaussian and Wishart matrices.

Limit moments, exact finite-N expectations, a brute-force Wick reference,
Monte Carlo simulation and an experiment harness.
"""

from .errors import BudgetError, DomainError, ParseError, PermfreeError, UnsupportedError, ValidationError
from .exact import (
    ExactMoment,
    PermAverageSpec,
    covariance,
    exact_moment,
    exact_moment_gaussian,
    exact_moment_wishart,
    exact_product_expectation,
    exact_rectangular_moment,
    exact_variance,
    permutation_fix_average,
    pure_u_moment,
    pure_u_variance,
    word_cycle_products,
)
from .limits import freeness_prediction, limit_at
from .monomial import Monomial, canonicalize, parse_monomial
from .perms import Perm
from .sim import mc_estimate
from .wick import oracle_expectation
from .words import FreeWord, parse_word

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "DomainError",
    "ExactMoment",
    "FreeWord",
    "Monomial",
    "ParseError",
    "Perm",
    "PermAverageSpec",
    "PermfreeError",
    "UnsupportedError",
    "ValidationError",
    "canonicalize",
    "covariance",
    "exact_moment",
    "exact_moment_gaussian",
    "exact_moment_wishart",
    "exact_product_expectation",
    "exact_rectangular_moment",
    "exact_variance",
    "freeness_prediction",
    "limit_at",
    "mc_estimate",
    "oracle_expectation",
    "parse_monomial",
    "parse_word",
    "permutation_fix_average",
    "pure_u_moment",
    "pure_u_variance",
    "word_cycle_products",
]

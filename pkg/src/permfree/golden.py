"""The golden suite: the fixed set of monomials every cross-check runs over.

The choice is ours, not canonical. It covers each family with at most three
G/W letters (four H letters in the rectangular case), at most two
generators and words of length at most two. It includes zero-mean cases, a
non-commuting word and a split-term (tau with two cycles) case.
"""

from __future__ import annotations

GAUSSIAN = (
    "G1 U[e] G1* U[e]",
    "G1 U[g1] G1* U[g1^-1]",
    "G1 U[g1] G2* U[e]",
    "G1 U[g1.g2] G1* U[e]",
    "G1 U[g1] G1* U[g1]",
)

WISHART = (
    "W1",
    "W1 U[e] W1 U[e]",
    "W1 U[g1] W1 U[g1^-1]",
    "W1 U[g1] W2 U[g2]",
    "W1 U[g1] W1 U[e] W1 U[g1^-1]",
)

RECTANGULAR = (
    "H1* T[e] H1 U[e]",
    "H1* T[g1] H1 U[g1]",
    "H1* T[e] H1 U[g1]",
)

PURE_U = (
    "U[g1]",
    "U[g1^2]",
    "U[g1.g2]",
)

SUITE = GAUSSIAN + WISHART + RECTANGULAR + PURE_U


def family_of(text: str) -> str:
    for name, group in (("gaussian", GAUSSIAN), ("wishart", WISHART), ("rectangular", RECTANGULAR)):
        if text in group:
            return name
    return "pure-u"

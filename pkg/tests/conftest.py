from __future__ import annotations

import pytest

from permfree.golden import SUITE, family_of


def m_for(text: str, N: int, M: int | None = None):
    """Square monomials ignore M; Wishart and rectangular ones default to M = N."""
    if family_of(text) in ("wishart", "rectangular"):
        return N if M is None else M
    return None


@pytest.fixture(params=SUITE)
def suite_monomial(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])

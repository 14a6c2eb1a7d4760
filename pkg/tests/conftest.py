from fractions import Fraction as Fr

import pytest


def f_exact(q, k):
    q, k = Fr(q), Fr(k)
    return 1 + k / 2 - k * q + k * q * q / 2


def g_exact(q, k):
    q, k = Fr(q), Fr(k)
    return k * q * q / 2


def w_exact(p, k):
    p = Fr(p)
    return p * f_exact(p, k) + (1 - p) * g_exact(p, k)


@pytest.fixture
def exact():
    """Exact rational versions of the payment curves (independent oracle)."""
    return type("Exact", (), {"f": staticmethod(f_exact), "g": staticmethod(g_exact),
                              "w": staticmethod(w_exact)})


def pytest_terminal_summary(terminalreporter):
    lines = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

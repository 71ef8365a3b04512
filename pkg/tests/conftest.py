import itertools

import numpy as np
import pytest


def enumerate_realizations(p):
    """All 2^n treatment indicators with their probabilities (plain-Python oracle)."""
    p = [float(v) for v in p]
    out = []
    for bits in itertools.product((0, 1), repeat=len(p)):
        prob = 1.0
        for b, pi in zip(bits, p):
            prob *= pi if b else 1.0 - pi
        out.append((bits, prob))
    return out


def ipw_loop(y1, y0, p, bits):
    """Horvitz-Thompson contrast written as an explicit loop."""
    n = len(bits)
    total = 0.0
    for i, b in enumerate(bits):
        if b:
            total += y1[i] / p[i]
        else:
            w = 1.0 / p[i]
            total -= y0[i] * w / (w - 1.0)
    return total / n


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

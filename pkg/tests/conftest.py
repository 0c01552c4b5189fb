import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sl(rng, d):
    """Random matrix of determinant one."""
    g = rng.normal(size=(d, d))
    if np.linalg.det(g) < 0:
        g[0] *= -1
    return g / np.linalg.det(g) ** (1.0 / d)


def well_conditioned(rng, d, spread=1.0):
    """``Q1 diag(e^s) Q2`` with ``s`` uniform in (-spread, spread)."""
    q1, _ = np.linalg.qr(rng.normal(size=(d, d)))
    q2, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return q1 @ np.diag(np.exp(rng.uniform(-spread, spread, d))) @ q2


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])

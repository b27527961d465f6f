import numpy as np
import pytest


def edge_scene(n=96):
    """Vertical step, diagonal step and a filled disk on a flat background."""
    y, x = np.mgrid[0:n, 0:n] + 0.5
    u = np.full((n, n), 0.2)
    u[:, : n // 4] = 0.8
    u[(x + y) > 1.3 * n] = 0.6
    u[(x - 0.55 * n) ** 2 + (y - 0.4 * n) ** 2 < (0.18 * n) ** 2] = 1.0
    return u


def step_image(h, w, col=None):
    u = np.zeros((h, w))
    u[:, (w // 2 if col is None else col) :] = 1.0
    return u


def affine(h, w, a=0.1, b=0.03, c=0.02):
    y, x = np.mgrid[0:h, 0:w]
    return a + b * x + c * y


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20180731)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

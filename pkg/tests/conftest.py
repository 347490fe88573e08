import numpy as np
import pytest

from nngp_ldp import Grid, OperatorRep, make_grid


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank))
    return A @ A.T / rank


def random_grid(rng, n):
    return Grid(np.sort(rng.uniform(0, 1, n)) + np.arange(n), rng.uniform(0.1, 1.0, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def point_grid():
    """One node at x = 1 with unit weight: operators are plain scalars."""
    return make_grid((0.5, 1.5), 1)


def scalar_op(grid, k):
    return OperatorRep(grid, np.array([[float(k)]]))


# one PASS/FAIL line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

import numpy as np
import pytest

# worked example matrix with one empty column
EQ1 = np.array(
    [
        [1, 0, 4, 0, 0],
        [0, 10, 0, 0, 0],
        [2, 3, 0, 0, 5],
        [0, 0, 0, 0, 0],
        [0, 0, 0, 0, 6],
    ],
    dtype=float,
)

ACCEPTANCE_LINES = []


@pytest.fixture
def eq1():
    return EQ1.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_matrix(rng, n, m, density, alphabet=None):
    """Random matrix with the given fraction of nonzeros; ``alphabet`` limits
    the number of distinct nonzero values (None = continuous)."""
    if alphabet is None:
        vals = rng.normal(size=(n, m))
        vals[vals == 0] = 1.0
    else:
        pool = rng.choice([-1, 1], size=alphabet) * rng.uniform(0.1, 3, size=alphabet)
        vals = pool[rng.integers(0, alphabet, size=(n, m))]
    keep = rng.random((n, m)) < density
    return np.where(keep, vals, 0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

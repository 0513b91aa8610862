import numpy as np
import pytest
from hypothesis import strategies as st

from qadjust import from_counts


@st.composite
def tables(draw, max_rows=4, max_cols=4, max_cell=8):
    """Contingency tables with no empty row or column."""
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    grid = draw(st.lists(st.lists(st.integers(0, max_cell), min_size=c, max_size=c),
                         min_size=r, max_size=r))
    grid = np.array(grid)
    # guarantee every row and column has a positive count
    for i in range(r):
        grid[i, i % c] += 1
    for j in range(c):
        grid[j % r, j] += 1
    return from_counts(grid)


def random_table(rng, n_max=200, max_rows=6, max_cols=6):
    """Random table from two random labelings with at most n_max objects."""
    n = int(rng.integers(2, n_max + 1))
    r = int(rng.integers(1, min(max_rows, n) + 1))
    c = int(rng.integers(1, min(max_cols, n) + 1))
    u = rng.integers(0, r, size=n)
    v = rng.integers(0, c, size=n)
    from qadjust import build_contingency

    return build_contingency(u, v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run full-size experiment checks (several minutes each)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="full-size run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record and print one pass/fail line, then assert it."""

    def check(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

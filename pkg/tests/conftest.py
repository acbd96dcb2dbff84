import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from grushinlab.eigen import SolverConfig, solve_first_eigenpair  # noqa: E402
from grushinlab.grid import GrushinDomain  # noqa: E402


@pytest.fixture(scope="session")
def unit64():
    return GrushinDomain.box(grid=64)


@pytest.fixture(scope="session")
def eigenpairs():
    """Lazily solved eigenpairs keyed by (p, gamma, grid)."""
    cache = {}

    def get(p, gamma=0.0, grid=64):
        key = (p, gamma, grid)
        if key not in cache:
            extents = None if gamma == 0 else [(-1.0, 1.0), (0.0, 1.0)]
            dom = GrushinDomain.box(gamma=gamma, extents=extents, grid=grid)
            cache[key] = solve_first_eigenpair(dom, SolverConfig(p))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])

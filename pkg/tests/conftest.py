from __future__ import annotations

import numpy as np
import pytest

from charncp.nulldist import build_table


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_table():
    """Coarse null table; good enough for plumbing tests, not for levels."""
    return build_table(grid_size=32, replications=2000, seed=7)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``record(number, what, measured, band, ok)``."""

    def record(number: int, what: str, measured: str, band: str, ok: bool) -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {what}: {measured} (required {band})"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)

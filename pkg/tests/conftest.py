import pytest

from qmg.numerics import Grid1D

# Wide enough for eta = 2 and |r| = 0.9 coherent states to decay at the edges.
WIDE_GRID = Grid1D(-48.0, 48.0, 16384)

_criteria: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        print(line)
        _criteria.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)

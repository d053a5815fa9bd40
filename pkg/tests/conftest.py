import numpy as np
import pytest

from committee_select.instances import nonsubmodular4


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def ns4():
    """Two weighted rankings over a, b, c, d with a non-submodular theta."""
    return nonsubmodular4()


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _report(number: int, ok: bool, detail: str, elapsed: float, limit: float) -> None:
        in_time = elapsed < limit
        verdict = "PASS" if ok and in_time else "FAIL"
        line = f"criterion {number:>2}: {verdict}  {detail}  [{elapsed:.1f}s of {limit:.0f}s]"
        ACCEPTANCE_LINES[number] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert in_time, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])

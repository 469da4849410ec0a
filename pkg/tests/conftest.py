import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record a one-line verdict for a numbered acceptance criterion.

    Usage: acceptance(4, "yaglom W1 below threshold", ok, detail). The
    recorded lines are printed in the terminal summary so each criterion
    shows up as a single pass/fail line regardless of test structure.
    """

    def record(num: int, label: str, ok: bool, detail: str = "") -> bool:
        ok = bool(ok)
        _ACCEPTANCE[num] = (label, ok, detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        label, ok, detail = _ACCEPTANCE[num]
        verdict = "PASS" if ok else "FAIL"
        line = f"[{verdict}] criterion {num:2d}: {label}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)

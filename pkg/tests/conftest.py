from collections import defaultdict

import pytest

CRITERIA: dict[str, list[tuple[bool, str]]] = defaultdict(list)


@pytest.fixture
def record():
    """Register the verdict for an acceptance criterion and echo one line."""

    def _record(criterion: str, passed: bool, detail: str) -> bool:
        CRITERIA[criterion].append((bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=int):
        parts = CRITERIA[key]
        ok = all(p for p, _ in parts)
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: " + "; ".join(d for _, d in parts))

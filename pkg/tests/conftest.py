import pytest

# criterion number -> (passed, detail); filled by the acceptance suite
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(n: int, ok: bool, detail: str) -> None:
        CRITERIA[n] = (bool(ok), detail)
        assert ok, f"criterion {n}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        tr.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    passed = sum(ok for ok, _ in CRITERIA.values())
    tr.write_line(f"{passed}/{len(CRITERIA)} criteria passed")

import pytest

# (criterion id, passed, detail) lines collected by the acceptance tests
ACCEPTANCE: list[tuple[str, bool, str]] = []


def report(name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return bool(ok)


@pytest.fixture
def acceptance():
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

import pytest

from sterile_cp.parallel import set_default_jobs

# acceptance criteria report here; the lines are repeated in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def _serial_by_default():
    set_default_jobs(1)
    yield


@pytest.fixture
def report():
    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

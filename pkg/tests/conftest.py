import pytest

ACCEPTANCE = {}


def record(number, passed, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


@pytest.fixture
def acceptance():
    return record


@pytest.fixture
def single_thread(monkeypatch):
    monkeypatch.setenv("LSEMP_THREADS", "1")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])

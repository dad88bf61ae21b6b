import pytest

_LINES = {}


@pytest.fixture
def record():
    def _record(n, ok, detail):
        _LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_LINES[n])
    return _record


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")
    config.addinivalue_line("markers", "slow: long-running simulation tests")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])

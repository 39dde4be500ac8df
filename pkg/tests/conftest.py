import time

import pytest

_START = time.perf_counter()


@pytest.fixture(scope="session")
def suite_clock():
    return _START


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in RESULTS.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    terminalreporter.write_line(f"wall time {time.perf_counter() - _START:.1f}s (limit 300s)")

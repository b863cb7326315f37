import time

import pytest

from swarm_reshape.config import SimMode, load_reference
from swarm_reshape.engine import run


def _timed(mode):
    t0 = time.perf_counter()
    result = run(load_reference(mode))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def dfrpsr_run():
    return _timed(SimMode.DFRPSR)


@pytest.fixture(scope="session")
def baseline_run():
    return _timed(SimMode.BASELINE)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")

import warnings

import pytest

from carnot.multivec import NearDegenerateWarning

# one line per acceptance criterion, filled by tests/test_acceptance.py
CRITERIA = {}


def record(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(CRITERIA[number])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])


@pytest.fixture(autouse=True)
def _quiet_near_degenerate():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearDegenerateWarning)
        yield


@pytest.fixture(scope="session")
def engel():
    from carnot import catalog
    return catalog.get("engel4")


@pytest.fixture(scope="session")
def engel_norm(engel):
    from carnot.group import calibrate_norm
    return calibrate_norm(engel.law)

import numpy as np
import pytest

from locomimic.gait import BUILTIN_GAITS
from locomimic.vhipm import PendulumState

# acceptance outcomes recorded by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0].rstrip("."))):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(BUILTIN_GAITS))
def gait(request):
    return BUILTIN_GAITS[request.param]


@pytest.fixture
def rest_state():
    return PendulumState(np.array([0.0, 0.0, 0.32]), np.zeros(3))

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wavekin.field import init_params

settings.register_profile("wavekin", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("wavekin")

# acceptance outcomes, printed one per line at the end of the session
ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def small_params():
    """A narrow float64 network; cheap enough for finite-difference checks."""
    return init_params(7, widths=(2, 6, 5, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

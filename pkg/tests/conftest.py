import numpy as np
import pytest

from respira.acceptance import Context
from respira.synth import SynthScenario

# filled by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_ctx():
    """One default-scenario analysis shared by every test that needs it."""
    return Context()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_scenario():
    """Short two-stage scenario: one 10x10 cell per region, 80 s total."""
    return SynthScenario(stages=[[0.0, 40.0, 12.0], [40.0, 80.0, 15.0]], width=20, height=10,
                         face_rect=[0, 0, 10, 10], chest_rect=[10, 0, 10, 10], seed=3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])

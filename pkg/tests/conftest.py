import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dislo.kernels import AngularProfile

# derandomized so repeated runs explore the same examples
settings.register_profile(
    "repro", derandomize=True, deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repro")


@pytest.fixture(scope="session")
def iso1():
    return AngularProfile.isotropic(1)


@pytest.fixture(scope="session")
def iso2():
    return AngularProfile.isotropic(2)


@pytest.fixture(scope="session")
def uniaxial():
    return AngularProfile.closed_form("uniaxial")


def _aniso_matrix(t):
    e = np.array([np.cos(t), np.sin(t)])
    return (np.eye(2) + 0.5 * np.outer(e, e)) * (1.0 + 0.3 * np.cos(2.0 * t))


@pytest.fixture(scope="session")
def aniso_table():
    """Anisotropic 2x2 table profile sampled every 10 degrees."""
    deg = np.arange(0, 180, 10)
    return AngularProfile.from_table(deg, [_aniso_matrix(np.radians(d)) for d in deg], degrees=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary
ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    def record(criterion, ok, detail=""):
        prev = ACCEPTANCE.get(criterion, (True, []))
        ACCEPTANCE[criterion] = (prev[0] and bool(ok), prev[1] + ([detail] if detail else []))
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, details = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {'; '.join(details)}")

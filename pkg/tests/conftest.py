import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lbfl.model import LbflInstance

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def planar_instance(seed: int, n_f: int, n_d: int, M: int, cost_scale: float = 1.0) -> LbflInstance:
    rng = np.random.default_rng(seed)
    return LbflInstance.from_points(
        rng.uniform(0, cost_scale, n_f), rng.random((n_f, 2)), rng.random((n_d, 2)), M
    )


@pytest.fixture
def small_instance():
    return planar_instance(7, 4, 9, 2)


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def record():
    """Collects one PASS/FAIL line per acceptance criterion."""

    def _record(number: int, name: str, passed: bool, detail: str = "") -> None:
        line = f"criterion {number:>2} {name}: {'PASS' if passed else 'FAIL'}" + (f"  ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE.append(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)

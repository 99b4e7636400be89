import numpy as np
import pytest

from itoedit.scene import build_mixture
from itoedit.schedule import build_schedule

# Filled by tests/test_acceptance.py: criterion number -> list of (label, passed, detail).
ACCEPTANCE_RESULTS: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture(scope="session")
def sched():
    return build_schedule(25, "cosine")


@pytest.fixture(scope="session")
def mix():
    return build_mixture()


@pytest.fixture(scope="session")
def point_mix():
    """Single class at a single anchor with zero spread: a point mass."""
    return build_mixture(n_classes=1, positions=[(4, 4)], sigma=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        parts = ACCEPTANCE_RESULTS[n]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{label}: {'ok' if p else 'FAIL'} {d}".strip() for label, p, d in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")

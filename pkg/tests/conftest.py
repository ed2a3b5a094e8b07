import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line per criterion; the summary prints them all."""
    results = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        results[number] = line
        print(line)
        assert ok, line

    yield record
    # a test that raised before recording still gets its FAIL line
    number = int(request.node.name.split("_")[2])
    results.setdefault(number, f"criterion {number}: FAIL (raised before completing)")


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])

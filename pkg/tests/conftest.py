import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from manifold_quantiles.geometry import ManifoldSpec, uniform_sample

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SPECS = [ManifoldSpec((1,)), ManifoldSpec((2,)), ManifoldSpec((3,)), ManifoldSpec((1, 1)), ManifoldSpec((1, 2))]

specs = st.sampled_from(SPECS)
seeds = st.integers(0, 2**32 - 1)


def points(spec, n, seed):
    return uniform_sample(spec, n, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
    line = f"[{status}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0].rstrip("b"))):
            terminalreporter.write_line(line)

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture(scope="session")
def linear_sweep():
    """Default-size sweep (n=20, m1=20, m2=1..30, 500 trials) of linear-pc."""
    from linphase.harness.config import ExperimentConfig
    from linphase.harness.experiments import run_gauss_sweep

    import time
    start = time.perf_counter()
    result = run_gauss_sweep(ExperimentConfig("gauss-sweep", methods=["linear-pc"]))
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def nonconvex_sweep():
    """Same instances as ``linear_sweep`` for the two nonconvex baselines."""
    from linphase.harness.config import ExperimentConfig
    from linphase.harness.experiments import run_gauss_sweep

    config = ExperimentConfig("gauss-sweep", methods=["nonconvex-augmented", "nonconvex-incoherent"])
    return run_gauss_sweep(config)


@pytest.fixture(scope="session")
def antenna_benchmark():
    """Default antenna benchmark: ten realisations at 60 dB SNR."""
    from linphase.harness.config import ExperimentConfig
    from linphase.harness.experiments import run_antenna_benchmark

    import time
    start = time.perf_counter()
    result = run_antenna_benchmark(ExperimentConfig("antenna"))
    return result, time.perf_counter() - start


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome; printed in the run summary."""

    def report(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        _CRITERIA[number] = line
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])

import numpy as np
import pytest

from misoeiv.datasim import (NoiseSpec, corrupt, generate_inputs, benchmark_miso_system,
                             benchmark_siso_system, simulate_miso)

MISO_VARIANCES = (2.6868, 0.9, 0.4)
SISO_VARIANCES = (0.24, 0.1)


def miso_dataset(seed, N=5000, noisy=True, burn_in=200):
    sys = benchmark_miso_system()
    u = generate_inputs(2, N + burn_in, [seed, 0], "gaussian-white", (3.0, 2.0))
    clean = simulate_miso(sys, u, burn_in)
    if not noisy:
        return clean
    return corrupt(clean, NoiseSpec.variances(MISO_VARIANCES), [seed, 1])[0]


def siso_dataset(seed, N=5000, noisy=True, burn_in=200):
    sys = benchmark_siso_system()
    u = generate_inputs(1, N + burn_in, [seed, 0], "gaussian-white", (1.0,))
    clean = simulate_miso(sys, u, burn_in)
    if not noisy:
        return clean
    return corrupt(clean, NoiseSpec.variances(SISO_VARIANCES), [seed, 1])[0]


@pytest.fixture(scope="session")
def clean_miso():
    return miso_dataset(3, N=2000, noisy=False)


@pytest.fixture(scope="session")
def noisy_miso():
    return miso_dataset(1)


@pytest.fixture(scope="session")
def noisy_siso():
    return siso_dataset(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from specter import pipeline
from specter.cdma import EmbedParams

STD_LEN = 10_000_000
STD_SIGMA = 0.02
STD_HOST_SEED = 7
EMBED_SEED = 42

_acceptance_lines = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return EmbedParams(seed=EMBED_SEED)


@pytest.fixture(scope="session")
def payload():
    return pipeline.keystream_payload(1024, EMBED_SEED)


@pytest.fixture(scope="session")
def small_host():
    """200k-weight f32-exact Gaussian host; enough capacity for 1 KiB."""
    return pipeline.synthetic_values(200_000, STD_SIGMA, STD_HOST_SEED).astype(np.float32).astype(
        np.float64
    )


@pytest.fixture(scope="session")
def small_stego(small_host, payload, params):
    values, _ = pipeline.embed_values(small_host, payload, params)
    return values.astype(np.float32).astype(np.float64)

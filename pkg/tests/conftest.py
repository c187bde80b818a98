import numpy as np
import pytest

from tailored_rl import dataset, policy


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def toy_problems():
    return dataset.synth_dataset(40, (1, 3), seed=3)


@pytest.fixture
def small_params(rng):
    """Random policy over a 5-token vocabulary; cheap enough for coordinate FD."""
    return policy.random_params(rng, scale=0.7, window=2, vocab_size=5)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

import numpy as np
import pytest

from morserec import Grid, ParamBox, build_representation, get_map, morse_decomposition

# Full phase domain used throughout the neuron-map runs.
B_DOMAIN = ((-0.1, 9.0), (-5.0, 3.0))
CHIALVO_FIXED = {"a": 0.89, "b": 0.6, "c": 0.28, "k": 0.0}

# Verdict lines collected by the acceptance tests; echoed after the run so
# they stay visible under pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def chialvo_rep64():
    grid = Grid(B_DOMAIN, (64, 64))
    return build_representation(get_map("chialvo"), ParamBox(CHIALVO_FIXED), grid)


@pytest.fixture(scope="session")
def chialvo_dec64(chialvo_rep64):
    return morse_decomposition(chialvo_rep64)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260815)

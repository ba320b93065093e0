import functools

import numpy as np
import pytest

from qfibounds.bound import integrate_bound
from qfibounds.model import builtin_model
from qfibounds.scaling import ab_curve, compute_constants

NOISY_MODELS = ("PD", "RD", "PDDS", "PDDD")


@functools.lru_cache(maxsize=None)
def constants(model_id):
    return compute_constants(builtin_model(model_id))


@functools.lru_cache(maxsize=None)
def curve(model_id, n_points=100):
    return ab_curve(builtin_model(model_id), n_points, constants(model_id))


@functools.lru_cache(maxsize=None)
def trace(model_id):
    return integrate_bound(curve(model_id))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

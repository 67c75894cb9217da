from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from clientruin import Exponential, ModelParams, Uniform

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")

CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


def top_row():
    return ModelParams(lam=1.0, f0=1.0, nu=3.0, r=3.0, claim=Exponential(1.5), sojourn=Exponential(1.0))


def bottom_row():
    return ModelParams(lam=3.0, f0=0.0, nu=3.0, r=3.0, claim=Exponential(1.5), sojourn=Uniform(0.0, 1.0))


def attribution_model():
    return ModelParams(lam=1.0, f0=1.0, nu=1.0, r=2.0, claim=Exponential(1.0), sojourn=Exponential(1.0))


@pytest.fixture
def top():
    return top_row()


@pytest.fixture
def bottom():
    return bottom_row()


@pytest.fixture
def attr():
    return attribution_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import math
import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from lrwalk.operators import CoinParams, PhaseProfile, WalkModel  # noqa: E402
from lrwalk.state import LatticeState  # noqa: E402

settings.register_profile("lrwalk", max_examples=40, deadline=None)
settings.load_profile("lrwalk")


@pytest.fixture
def hadamard():
    return CoinParams.hadamard()


@pytest.fixture
def free_model(hadamard):
    return WalkModel(hadamard)


@pytest.fixture
def log_model(hadamard):
    return WalkModel(hadamard, PhaseProfile.log())


@pytest.fixture
def power_model(hadamard):
    return WalkModel(hadamard, PhaseProfile.power(0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def random_state(rng, width=20, offset=None):
    amps = rng.standard_normal((width, 2)) + 1j * rng.standard_normal((width, 2))
    amps /= math.sqrt(float(np.sum(np.abs(amps) ** 2)))
    off = int(rng.integers(-30, 30)) if offset is None else offset
    return LatticeState(off, amps)


def all_models():
    """Representative models: free and perturbed, several coins and profiles."""
    coins = [CoinParams.hadamard(), CoinParams.from_a(0.9, delta=0.0),
             CoinParams(0.6, 0.8, 0.3, -1.1, 2.0), CoinParams(1.0, 0.0, 0.4, 0.0, 0.7)]
    profiles = [None, PhaseProfile.log(), PhaseProfile.power(0.5), PhaseProfile.cumsum(0.75)]
    return [WalkModel(c, p) for c in coins for p in profiles]

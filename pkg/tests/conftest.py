import numpy as np
import pytest

from hypberg import bounds
from hypberg.weights import WeightParams

_PARAMS_CACHE: dict = {}
_PROFILE_CACHE: dict = {}


def get_params(n: int, alpha: float) -> WeightParams:
    key = (n, alpha)
    if key not in _PARAMS_CACHE:
        _PARAMS_CACHE[key] = WeightParams.create(n, alpha)
    return _PARAMS_CACHE[key]


def get_profile(n: int, alpha: float) -> bounds.ThetaProfile:
    key = (n, alpha)
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = bounds.ThetaProfile(get_params(n, alpha))
    return _PROFILE_CACHE[key]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)

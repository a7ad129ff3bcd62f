import numpy as np
import pytest

from dpsched import validate_params
from dpsched.verify import random_policy, random_one_row_pair


@pytest.fixture
def params_vi():
    """Reference instance used throughout: K=7, A=2, M=3, alpha=0.4."""
    return validate_params(alpha=0.4, A=2, M=3, Q=5, power=[0, 1, 4, 9])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_params(rng, max_enum=100_000, max_tries=100):
    """Random valid parameter set with a bounded deterministic enumeration."""
    from dpsched.policies import count_deterministic

    for _ in range(max_tries):
        A = int(rng.integers(1, 4))
        M = A + int(rng.integers(0, 3))
        Q = int(rng.integers(1, 7))
        alpha = float(rng.uniform(0.15, 0.9))
        # strictly increasing per-bit increments give a strictly convex table
        inc = np.sort(rng.uniform(0.5, 3.0, M)) + np.arange(M) * 1e-2 + 0.1
        power = [0.0] + list(np.cumsum(inc))
        params = validate_params(alpha, A, M, Q, power)
        if count_deterministic(params) <= max_enum:
            return params
    raise RuntimeError("could not draw parameters within the enumeration budget")

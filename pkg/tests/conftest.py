import numpy as np
import pytest

from rddlab.profiles import ProfileSpec, make_profile


@pytest.fixture(scope="session")
def canonical_profile() -> np.ndarray:
    """n=32 exponential-decay spectrum, trace 32, used across experiments."""
    return make_profile(ProfileSpec.from_dict(
        {"kind": "exponential-decay", "n": 32, "decay": 0.15}
    ))

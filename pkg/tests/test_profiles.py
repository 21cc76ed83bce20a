import numpy as np
import pytest

from rddlab.errors import ConfigError
from rddlab.profiles import ProfileSpec, make_profile


def test_uniform():
    np.testing.assert_array_equal(
        make_profile(ProfileSpec.from_dict({"kind": "uniform", "n": 4})), np.ones(4)
    )


def test_exponential_decay_limit_to_uniform():
    lam = make_profile(ProfileSpec.from_dict(
        {"kind": "exponential-decay", "n": 2, "decay": 1e-12}))
    np.testing.assert_allclose(lam, [1.0, 1.0], rtol=1e-9)


def test_exponential_decay_trace_normalized():
    lam = make_profile(ProfileSpec.from_dict(
        {"kind": "exponential-decay", "n": 32, "decay": 0.15}))
    assert lam.sum() == pytest.approx(32.0, abs=1e-9)
    assert np.all(np.diff(lam) < 0)


def test_explicit_profiles():
    lam = make_profile(ProfileSpec.from_dict(
        {"kind": "explicit", "values": [4.0, 2.0, 2.0], "normalize": True}))
    assert lam.sum() == pytest.approx(3.0)
    lam_raw = make_profile(ProfileSpec.from_dict(
        {"kind": "explicit", "values": [4.0, 2.0], "normalize": False}))
    np.testing.assert_array_equal(lam_raw, [4.0, 2.0])
    with pytest.raises(ConfigError):
        make_profile(ProfileSpec.from_dict({"kind": "explicit", "values": [1.0, 2.0]}))


def test_validation_errors():
    with pytest.raises(ConfigError):
        ProfileSpec.from_dict({"n": 3})
    with pytest.raises(ConfigError):
        make_profile(ProfileSpec.from_dict({"kind": "exponential-decay", "n": 0, "decay": 1.0}))
    with pytest.raises(ConfigError):
        make_profile(ProfileSpec.from_dict({"kind": "exponential-decay", "n": 3, "decay": 0.0}))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from rsorecon.attitude import (TumbleProfile, UnitQuaternion, attitude_to_dcm, dcm_to_attitude,
                               propagate_attitude, quat_multiply)
from rsorecon.errors import ConfigError, DomainError

Z_TUMBLE = TumbleProfile(axis=(0, 0, 1), rate=3.0)

axes = st.tuples(*(st.floats(-1, 1, allow_nan=False),) * 3).filter(lambda a: np.linalg.norm(a) > 1e-3)
rates = st.floats(0.0, 30.0, allow_nan=False)
times = st.floats(-500.0, 500.0, allow_nan=False)


def same_rotation(p, q, tol):
    p, q = np.asarray(p), np.asarray(q)
    return min(np.abs(p - q).max(), np.abs(p + q).max()) <= tol


def test_identity_at_t0():
    assert propagate_attitude(Z_TUMBLE, 0.0) == UnitQuaternion()


def test_half_turn_after_60s():
    q = propagate_attitude(Z_TUMBLE, 60.0).as_array()
    assert np.abs(q - [0, 0, 0, 1]).max() < 1e-12


def test_full_turn_after_120s():
    assert same_rotation(propagate_attitude(Z_TUMBLE, 120.0).as_array(), [1, 0, 0, 0], 1e-12)


def test_zero_axis_is_config_error():
    with pytest.raises(ConfigError) as exc:
        TumbleProfile(axis=(0, 0, 0))
    assert exc.value.key == "tumble_axis"


def test_negative_rate_is_config_error():
    with pytest.raises(ConfigError):
        TumbleProfile(rate=-1.0)


def test_nonfinite_time_rejected():
    with pytest.raises(DomainError):
        propagate_attitude(Z_TUMBLE, math.inf)


@settings(max_examples=50)
@given(axes, rates, st.integers(0, 10))
def test_periodicity(axis, rate, k):
    p = TumbleProfile(axis=axis, rate=max(rate, 0.1))
    q = propagate_attitude(p, k * 360.0 / p.rate).as_array()
    assert same_rotation(q, [1, 0, 0, 0], 1e-9)


@settings(max_examples=50)
@given(axes, rates, times, times)
def test_composition_single_axis(axis, rate, t1, t2):
    p = TumbleProfile(axis=axis, rate=rate)
    q12 = propagate_attitude(p, t1 + t2).as_array()
    q = quat_multiply(propagate_attitude(p, t1).as_array(), propagate_attitude(p, t2).as_array())
    assert same_rotation(q12, q, 1e-9)


def test_multi_axis_norm_over_ten_periods():
    p = TumbleProfile(axis=(0, 0, 1), rate=3.0, secondary=(((1, 0, 0), 2.0),))
    for t in np.linspace(0, 10 * p.period, 7):
        assert abs(propagate_attitude(p, t).norm - 1.0) < 1e-9


def test_multi_axis_matches_constant_rate_rotation():
    # constant body rate: the exact answer is a single rotation about the summed axis
    p = TumbleProfile(axis=(0, 0, 1), rate=3.0, secondary=(((1, 1, 0), 4.0),))
    w = p.body_rate
    for t in (0.37, 12.5, 95.0):
        exact = UnitQuaternion.from_axis_angle(w, np.linalg.norm(w) * t).as_array()
        assert same_rotation(propagate_attitude(p, t).as_array(), exact, 1e-9)


def test_static_profile():
    p = TumbleProfile(rate=0.0)
    assert propagate_attitude(p, 1234.5) == UnitQuaternion()
    assert p.period == math.inf


def test_dcm_identity():
    assert np.array_equal(attitude_to_dcm(UnitQuaternion()), np.eye(3))


def test_dcm_quarter_turn_about_z():
    R = attitude_to_dcm(UnitQuaternion.from_axis_angle((0, 0, 1), math.pi / 2))
    assert np.abs(R @ [1, 0, 0] - [0, 1, 0]).max() < 1e-12


def test_dcm_rejects_non_unit():
    with pytest.raises(DomainError):
        attitude_to_dcm(UnitQuaternion(1.0, 0.01, 0, 0))


@given(st.tuples(*(st.floats(-1, 1, allow_nan=False),) * 4).filter(lambda q: np.linalg.norm(q) > 1e-3))
def test_dcm_round_trip_and_scipy_agreement(q):
    q = UnitQuaternion.from_array(np.asarray(q) / np.linalg.norm(q))
    R = attitude_to_dcm(q)
    assert np.abs(R.T @ R - np.eye(3)).max() < 1e-12
    assert abs(np.linalg.det(R) - 1) < 1e-12
    # scipy uses scalar-last quaternions
    ref = Rotation.from_quat([q.x, q.y, q.z, q.w]).as_matrix()
    assert np.abs(R - ref).max() < 1e-12
    assert same_rotation(dcm_to_attitude(R).as_array(), q.as_array(), 1e-12)


def test_hamilton_product_rule():
    i, j, k = ([0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1])
    assert np.array_equal(quat_multiply(i, j), k)
    assert np.array_equal(quat_multiply(j, i), -np.array(k))

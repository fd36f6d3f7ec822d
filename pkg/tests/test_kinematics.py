import numpy as np
import pytest
from hypothesis import given, strategies as st

from elastic_isac.config import C0
from elastic_isac.kinematics import (
    DegenerateGeometryError,
    TargetState,
    advance_target,
    delay_doppler,
    process_noise,
    relative_angle,
    relative_angles,
    steering,
    steering_matrix,
    transition_matrix,
)

coord = st.floats(-500, 500, allow_nan=False)
speed = st.floats(-80, 80, allow_nan=False)


def test_noiseless_constant_velocity():
    s = advance_target(TargetState(np.zeros(2), np.array([10.0, 0.0])), 0.0, 0.1, None)
    np.testing.assert_allclose(s.x, [1.0, 0.0])
    np.testing.assert_allclose(s.v, [10.0, 0.0])
    assert s.frame == 1


def test_zero_process_noise():
    assert np.all(process_noise(0.0, 0.1) == 0.0)


def test_process_noise_blocks():
    E = process_noise(2.0, 0.5)
    assert E[0, 0] == pytest.approx(2.0 * 0.5**3 / 3)
    assert E[0, 2] == pytest.approx(2.0 * 0.5**2 / 2)
    assert E[2, 2] == pytest.approx(2.0 * 0.5)
    assert E[0, 1] == 0.0


def test_cached_matrices_are_read_only():
    with pytest.raises(ValueError):
        transition_matrix(0.1)[0, 0] = 5.0


def test_motion_noise_covariance(rng):
    E = process_noise(100.0, 0.01)
    s0 = TargetState(np.zeros(2), np.zeros(2))
    draws = np.array([advance_target(s0, 100.0, 0.01, rng).vector() for _ in range(20000)])
    se = np.sqrt(np.outer(np.diag(E), np.diag(E)) / len(draws))
    assert np.all(np.abs(np.cov(draws.T) - E) <= 5 * se)


def test_monostatic_delay():
    dd = delay_doppler(TargetState(np.zeros(2), np.zeros(2)), (300.0, 0.0), (300.0, 0.0), 5.89e9)
    assert dd.tau == pytest.approx(600.0 / C0, rel=1e-15)
    assert dd.f == 0.0
    np.testing.assert_array_equal(dd.d_f_dx, 0.0)


def test_colocated_target_rejected():
    with pytest.raises(DegenerateGeometryError):
        delay_doppler(TargetState(np.zeros(2), np.ones(2)), (0.0, 0.0), (1.0, 0.0), 5.89e9)


def _fd_jacobian(state, ap1, ap2, f_c, h):
    J = np.zeros((2, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h[j]
        up = delay_doppler(TargetState.from_vector(state + e), ap1, ap2, f_c)
        dn = delay_doppler(TargetState.from_vector(state - e), ap1, ap2, f_c)
        J[:, j] = [(up.tau - dn.tau) / (2 * h[j]), (up.f - dn.f) / (2 * h[j])]
    return J


@given(coord, coord, speed, speed, coord, coord, coord, coord)
def test_gradients_match_finite_differences(x, y, vx, vy, a1, b1, a2, b2):
    state = np.array([x, y, vx, vy])
    ap1, ap2 = np.array([a1, b1]), np.array([a2, b2])
    if min(np.hypot(*(ap1 - state[:2])), np.hypot(*(ap2 - state[:2]))) < 20.0:
        return
    dd = delay_doppler(TargetState.from_vector(state), ap1, ap2, 5.89e9)
    fd = _fd_jacobian(state, ap1, ap2, 5.89e9, h=np.array([1e-3, 1e-3, 1e-3, 1e-3]))
    an = dd.jacobian()
    scale = np.abs(an).max(axis=1, keepdims=True)
    assert np.all(np.abs(fd - an) <= 1e-4 * scale)


def test_steering_examples():
    np.testing.assert_allclose(steering(0.0, 4), 0.5 * np.ones(4))
    np.testing.assert_allclose(steering(np.pi / 2, 2), np.array([1, -1]) / np.sqrt(2), atol=1e-15)


@given(st.floats(-np.pi, np.pi), st.integers(1, 16))
def test_steering_unit_norm_and_vectorised(theta, n):
    v = steering(theta, n)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(steering_matrix(np.array([theta]), n)[0], v, atol=1e-15)


def test_relative_angle_examples():
    assert relative_angle((0, 0), (1, 0)) == 0.0
    assert relative_angle((0, 0), (0, 1)) == pytest.approx(np.pi / 2)
    with pytest.raises(DegenerateGeometryError):
        relative_angle((1, 1), (1, 1))


@given(coord, coord, coord, coord)
def test_relative_angles_agree_with_scalar(a, b, c, d):
    if (a, b) == (c, d):
        return
    got = float(relative_angles(np.array([a, b]), np.array([c, d])))
    assert got == pytest.approx(relative_angle((a, b), (c, d)), abs=1e-12)
    assert -np.pi / 2 <= got <= np.pi / 2

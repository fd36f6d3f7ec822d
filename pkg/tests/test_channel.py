import numpy as np
import pytest
from hypothesis import given, strategies as st

from elastic_isac.channel import (
    ChannelBook,
    EstimationLogicError,
    cn,
    estimate_channel,
    estimation_error_variance,
    evolve_channel,
    init_channel,
    init_channels,
    large_scale_fading,
    path_loss_db,
    pilot_count,
)
from elastic_isac.kinematics import steering


def test_cn_variance(rng):
    z = cn(rng, 200000, var=3.0)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(3.0, rel=0.02)
    assert abs(np.mean(z.real * z.imag)) < 0.02


def test_path_loss_reference_point():
    assert path_loss_db(1.0, 1e9) == pytest.approx(32.4)
    assert path_loss_db(10.0, 1e9) - path_loss_db(1.0, 1e9) == pytest.approx(45.0)


def test_fading_decays_with_distance():
    lam = large_scale_fading(np.zeros((1, 2)), np.array([[10.0, 0.0], [100.0, 0.0]]), 5.89e9)
    assert lam[0, 0] / lam[0, 1] == pytest.approx(10.0**4.5)


def test_rician_los_limit(rng):
    theta = 0.3
    h = np.array([init_channel(2.0, 1e9, theta, 4, rng) for _ in range(200)])
    v = steering(theta, 4)
    # fully LoS: every draw is a scalar multiple of the steering vector
    coeff = h @ v.conj()
    np.testing.assert_allclose(h, coeff[:, None] * v[None, :], atol=1e-4 * np.abs(h).max())
    assert np.mean(np.abs(h) ** 2) == pytest.approx(2.0, rel=0.2)


def test_rayleigh_limit_variance(rng):
    lam = np.full((40, 50), 0.5)
    h = init_channels(lam, 0.0, np.zeros((40, 50)), 3, 4, rng)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(0.5, rel=0.02)


def test_gauss_markov_limits(rng):
    h = cn(rng, (30, 4))
    np.testing.assert_array_equal(evolve_channel(h, 1.0, 1.0, rng), h)
    fresh = evolve_channel(np.zeros((20000, 4), complex), 0.0, 2.0, rng)
    assert np.mean(np.abs(fresh) ** 2) == pytest.approx(2.0, rel=0.03)


def test_aging_preserves_variance(rng):
    h = cn(rng, (20000, 4), 1.5)
    for _ in range(5):
        h = evolve_channel(h, 0.9, 1.5, rng)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.5, rel=0.03)
    with pytest.raises(ValueError):
        evolve_channel(h, 1.2, 1.0, rng)


def test_pilot_counts():
    assert pilot_count(0, 0, 0, [], 16, np.zeros(4), 1) == 16
    assert pilot_count(0, 2, 0, [0, 2], 16, np.array([0, 0, 6, 0]), 1) == 6
    assert pilot_count(0, 2, 0, [0, 2], 16, np.zeros(4), 1) == 0
    with pytest.raises(EstimationLogicError):
        pilot_count(0, 3, 0, [0, 2], 16, np.zeros(4), 1)


def test_error_variance_examples():
    assert estimation_error_variance(1.0, 0.0, 2.0, 1, 2.0) == pytest.approx(0.5)
    assert estimation_error_variance(3.0, 0.0, 1.0, 0, 1.0) == pytest.approx(3.0)
    assert estimation_error_variance(1.0, 0.0, 1e15, 1, 1.0) < 1e-14


@given(st.floats(1e-12, 1.0), st.floats(0, 0.999), st.floats(1e-3, 10.0), st.integers(0, 64), st.floats(1e-15, 1e-3))
def test_error_variance_bounds(lam, rho, p, D, sigma):
    d = estimation_error_variance(lam, rho, p, D, sigma)
    lam_bar = (1 - rho**2) * lam
    assert 0.0 <= d <= lam_bar * (1 + 1e-12)
    assert estimation_error_variance(lam, rho, p, D + 1, sigma) <= d * (1 + 1e-12)


def test_perfect_csi(rng):
    h = cn(rng, (3, 4))
    np.testing.assert_array_equal(estimate_channel(h, 0.0, rng), h)


def test_book_estimates_only_requested_entries(rng):
    aps = np.array([[0.0, 0.0], [100.0, 0.0]])
    users = np.array([[50.0, 50.0], [80.0, 10.0], [10.0, 90.0]])
    book = ChannelBook.create(aps, users, 2, 4, 5.89e9, 4.0, rng)
    book.estimate([1], [0, 2], 1, 16, rho=0.0, p_ce=0.3, sigma_ap=np.full(2, 1e-13), rng=rng)
    assert book.estimated.sum() == 2
    assert book.estimated[1, 0, 1] and book.estimated[1, 2, 1]
    assert np.all(book.h_hat[0] == 0)
    book.clear_estimates()
    assert not book.estimated.any()

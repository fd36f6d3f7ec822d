import numpy as np
import pytest
from hypothesis import given, strategies as st

from elastic_isac.channel import ChannelBook, cn
from elastic_isac.comm_metrics import (
    InfeasibleFrameError,
    RegimeContext,
    comm_sinr,
    effective_rate,
    effective_rates,
    effective_slots,
    sinr_matrix,
)
from elastic_isac.topology import BeamPowerPlan


def test_effective_slot_examples():
    assert effective_slots("L", 100, 4, 1) == 96
    assert effective_slots("F", 100, 4, 1, [{0, 1}, {4, 5}]) == 94
    assert effective_slots("F", 100, 4, 1, [{0, 1, 2}]) == 96
    with pytest.raises(InfeasibleFrameError):
        effective_slots("L", 3, 4, 1)
    with pytest.raises(ValueError):
        effective_slots("X", 100, 4, 1)


def test_rate_example():
    assert effective_rate([np.e - 1], [16], [96], 4, 16, 100) == pytest.approx(0.24)
    assert effective_rate([0.0, 0.0], [8, 8], [96, 96], 4, 16, 100) == 0.0


def _book(h_hat, delta):
    a, k, s, n = h_hat.shape
    return ChannelBook(h=h_hat.copy(), h_hat=h_hat, delta=delta, estimated=np.ones((a, k, s), bool),
                       lambda_C=np.ones((a, k)), theta=np.zeros((a, k)))


def _ctx(a, k, s):
    return RegimeContext("L", 0, np.arange(a), np.arange(k), np.zeros(0, int), np.arange(s),
                         np.full(s, 4), np.full(s, 96))


def _plan(ctx, p, w):
    a, k, s, n = w.shape
    return BeamPowerPlan(ctx, p, w, np.zeros((a, 0, s)), np.zeros((a, 0, s, n), complex), np.ones(a))


def test_matched_single_link(rng):
    h = cn(rng, (1, 1, 1, 4))
    w = h / np.linalg.norm(h)
    book = _book(h, np.zeros((1, 1, 1)))
    plan = _plan(_ctx(1, 1, 1), np.full((1, 1, 1), 0.2), w)
    sigma = np.array([1e-3])
    assert comm_sinr(0, 0, plan, book, sigma) == pytest.approx(0.2 * np.linalg.norm(h) ** 2 / 1e-3, rel=1e-12)


def test_zero_power_gives_zero_sinr(rng):
    h = cn(rng, (2, 3, 2, 4))
    book = _book(h, np.full((2, 3, 2), 0.1))
    plan = _plan(_ctx(2, 3, 2), np.zeros((2, 3, 2)), cn(rng, (2, 3, 2, 4)))
    assert np.all(sinr_matrix(plan, book, np.ones(3)) == 0.0)


def _sinr_loops(p, w, h_hat, delta, sigma):
    a_n, k_n, s_n, _ = w.shape
    out = np.zeros((k_n, s_n))
    for k in range(k_n):
        for s in range(s_n):
            amp = [sum(np.sqrt(p[a, t, s]) * np.vdot(h_hat[a, k, s], w[a, t, s]) for a in range(a_n)) for t in range(k_n)]
            sig = abs(amp[k]) ** 2
            intf = sum(abs(amp[t]) ** 2 for t in range(k_n) if t != k)
            err = sum(delta[a, k, s] * p[a, :, s].sum() for a in range(a_n))
            out[k, s] = sig / (intf + err + sigma[k])
    return out


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_sinr_matches_loop_oracle(seed, a, k, s):
    rng = np.random.default_rng(seed)
    h = cn(rng, (a, k, s, 4))
    delta = rng.uniform(0, 0.2, (a, k, s))
    w = cn(rng, (a, k, s, 4))
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    p = rng.uniform(0, 1, (a, k, s))
    sigma = rng.uniform(0.1, 1, k)
    got = sinr_matrix(_plan(_ctx(a, k, s), p, w), _book(h, delta), sigma)
    np.testing.assert_allclose(got, _sinr_loops(p, w, h, delta, sigma), rtol=1e-12)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=4))
def test_rate_nonnegative_and_monotone(sinrs):
    s = np.array(sinrs)
    ctx = RegimeContext("L", 0, np.arange(1), np.arange(1), np.zeros(0, int), np.arange(len(s)),
                        np.full(len(s), 8), np.full(len(s), 96))
    r = effective_rates(s[None, :], ctx, 2, 16, 100)[0]
    assert r >= 0
    assert effective_rates(2 * s[None, :] + 1, ctx, 2, 16, 100)[0] >= r
    assert r == pytest.approx(effective_rate(s, ctx.bandwidth, ctx.slots, 2, 16, 100))

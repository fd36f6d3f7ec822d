import numpy as np
import pytest

from elastic_isac.baselines import LIVE_ROLES, cfn_only_actions, ccn_only_actions, random_mrt_actions
from elastic_isac.config import desk_config
from elastic_isac.environment import ROLES, ElasticIsacEnv
from elastic_isac.kinematics import relative_angles
from elastic_isac.topology import beam_grid, local_context

CFG = desk_config()


@pytest.fixture
def env():
    e = ElasticIsacEnv(CFG)
    e.reset(0)
    return e


def test_random_classification_is_fair(env):
    rng = np.random.default_rng(0)
    bits = np.concatenate([a[: CFG.K + CFG.Q] for _ in range(2500) for a in random_mrt_actions(env, "LCP", None, rng)])
    assert bits.mean() == pytest.approx(0.5, abs=0.02)
    labels = np.concatenate([random_mrt_actions(env, "FG", None, rng)[0] for _ in range(2000)])
    assert set(np.unique(labels)) == set(range(1, CFG.R + 1))


def test_mrt_equal_power_split(env):
    rng = np.random.default_rng(1)
    env._apply("LCP", ccn_only_actions(env, "LCP", None))
    raw = random_mrt_actions(env, "LPB", None, rng)
    env._apply("LPB", raw)
    for m, plan in enumerate(env.plans_L):
        ctx = plan.ctx
        s = len(ctx.users) + len(ctx.targets)
        expect = env.split.P_L[ctx.aps] / (ctx.bandwidth.sum() * s)
        np.testing.assert_allclose(plan.p_comm[:, :, 0], np.repeat(expect[:, None], len(ctx.users), 1))
        np.testing.assert_allclose(plan.ap_totals(), env.split.P_L[ctx.aps])


def test_mrt_radar_beam_points_at_prediction(env):
    rng = np.random.default_rng(2)
    env._apply("LCP", ccn_only_actions(env, "LCP", None))
    env._apply("LPB", random_mrt_actions(env, "LPB", None, rng))
    grid = beam_grid(CFG.delta_theta)
    for plan in env.plans_L:
        for j, a in enumerate(plan.ctx.aps):
            th = relative_angles(env.x_pred[plan.ctx.targets, :2], env.scn.ap_positions[a][None, :])
            nearest = grid[np.abs(th[:, None] - grid[None, :]).argmin(axis=1)]
            np.testing.assert_allclose(plan.theta_radar[j], nearest)


def test_mrt_comm_beam_maximises_grid_gain(env):
    rng = np.random.default_rng(3)
    env._apply("LCP", ccn_only_actions(env, "LCP", None))
    env._apply("LPB", random_mrt_actions(env, "LPB", None, rng))
    from elastic_isac.kinematics import steering_matrix

    V = steering_matrix(beam_grid(CFG.delta_theta), CFG.N_tx)
    for plan in env.plans_L:
        for j, a in enumerate(plan.ctx.aps):
            for t, k in enumerate(plan.ctx.users):
                h = env.book.h_hat[a, k, plan.ctx.subbands[0]]
                gains = np.abs(V.conj() @ h) ** 2
                chosen = np.abs(np.vdot(h, plan.w_comm[j, t, 0])) ** 2
                assert chosen == pytest.approx(gains.max())


def test_ccn_and_cfn_corners(env):
    lcp = ccn_only_actions(env, "LCP", None)
    assert all(np.all(a[: CFG.K + CFG.Q] == 0) and a[-1] == CFG.B for a in lcp)
    lcp = cfn_only_actions(env, "LCP", None)
    assert all(np.all(a[: CFG.K + CFG.Q] == 1) and a[-1] == 0 for a in lcp)


def test_live_roles():
    assert LIVE_ROLES["proposed"] == ROLES
    assert LIVE_ROLES["random"] == ()
    assert set(LIVE_ROLES["ccn"]) | set(LIVE_ROLES["cfn"]) == {"LPB", "FG", "FPB"}


def test_fixed_policies_drive_full_episodes():
    env = ElasticIsacEnv(CFG)
    rng = np.random.default_rng(0)
    for fn in (ccn_only_actions, cfn_only_actions, random_mrt_actions):
        env.reset(1)
        while not env.done:
            env.step(lambda role, obs: fn(env, role, obs, rng))
            assert env.violations() == []

"""End-to-end acceptance checks; each test prints one PASS/FAIL line for its criterion."""
import time
from pathlib import Path

import numpy as np
import pytest

from elastic_isac.accounting import federated_overhead, frame_totals, phase1_overhead
from elastic_isac.baselines import ccn_only_actions, cfn_only_actions
from elastic_isac.cli import main as cli_main
from elastic_isac.config import ScenarioConfig, desk_config, load_config
from elastic_isac.environment import ROLES, ElasticIsacEnv
from elastic_isac.kinematics import TargetState, delay_doppler, relative_angles
from elastic_isac.learner.mappo import compute_gae
from elastic_isac.learner.mlp import Mlp
from elastic_isac.runner import Runner, moving_average, train
from elastic_isac.sensing_metrics import waveform_weights
from elastic_isac.topology import beam_grid, validate_topology

ROOT = Path(__file__).resolve().parents[1]
DESK = ROOT / "configs" / "desk.toml"


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return emit


# 1 -------------------------------------------------------------------------------------------
def _oracle_suite(rng) -> dict[str, float]:
    worst = {}
    # network gradients vs central differences
    err = 0.0
    for _ in range(5):
        net = Mlp((6, 16, 16, 4), rng, slope=0.1)
        x, c = rng.standard_normal((5, 6)), rng.standard_normal((5, 4))
        out, cache = net.forward(x, keep=True)
        g = net.flatten(net.backward(c, cache))
        for j in rng.choice(net.flat.size, 40, replace=False):
            old = net.flat[j]
            net.flat[j] = old + 1e-6
            up = np.sum(c * net.forward(x))
            net.flat[j] = old - 1e-6
            dn = np.sum(c * net.forward(x))
            net.flat[j] = old
            fd = (up - dn) / 2e-6
            err = max(err, abs(fd - g[j]) / max(abs(fd), abs(g[j]), 1e-3))
    worst["backprop"] = err
    # delay / Doppler gradients vs central differences
    err = 0.0
    for _ in range(200):
        s = np.concatenate([rng.uniform(100, 500, 2), rng.uniform(-80, 80, 2)])
        ap1, ap2 = rng.uniform(0, 600, 2), rng.uniform(0, 600, 2)
        if min(np.hypot(*(ap1 - s[:2])), np.hypot(*(ap2 - s[:2]))) < 20:
            continue
        J = delay_doppler(TargetState.from_vector(s), ap1, ap2, 5.89e9).jacobian()
        for j in range(4):
            e = np.zeros(4)
            e[j] = 1e-3
            up = delay_doppler(TargetState.from_vector(s + e), ap1, ap2, 5.89e9)
            dn = delay_doppler(TargetState.from_vector(s - e), ap1, ap2, 5.89e9)
            fd = np.array([up.tau - dn.tau, up.f - dn.f]) / 2e-3
            err = max(err, float(np.max(np.abs(fd - J[:, j]) / np.abs(J).max(axis=1))))
    worst["delay_doppler"] = err
    # waveform closed forms vs brute-force triple sums
    err = 0.0
    for _ in range(30):
        n = rng.integers(1, 4)
        g, Bn, Ln, r = rng.uniform(0, 3, n), rng.integers(0, 17, n), rng.integers(0, 101, n), rng.uniform(1, 1.01, n)
        df, T = 156.25e3, 6.4e-6
        brute = np.zeros(3)
        for gi, bi, li, ri in zip(g, Bn, Ln, r):
            b = np.arange(bi)[:, None]
            l = np.arange(li)[None, :]
            brute += [np.sum(8 * (np.pi * b * df) ** 2 * gi * np.ones_like(l)),
                      np.sum(8 * (np.pi * ri * l * T) ** 2 * gi * np.ones_like(b)),
                      np.sum(8 * np.pi**2 * b * l * T * df * gi)]
        got = np.array(waveform_weights(1.0, g, Bn, Ln, r, df, T))
        err = max(err, float(np.max(np.abs(got - brute) / np.maximum(np.abs(brute), 1e-300))))
    worst["waveform"] = err
    # GAE vs a scalar recursion
    err = 0.0
    for _ in range(50):
        T = rng.integers(1, 30)
        rw, V = rng.normal(size=T), rng.normal(size=(2, T))
        gam, lam = rng.uniform(0, 0.99), rng.uniform(0, 1)
        _, adv, _, _ = compute_gae(rw, V, gam, lam)
        for i in range(2):
            acc = 0.0
            for n in reversed(range(T)):
                nxt = V[i, n + 1] if n + 1 < T else 0.0
                acc = rw[n] + gam * nxt - V[i, n] + gam * lam * acc
                err = max(err, abs(acc - adv[i, n]))
    worst["gae"] = err
    return worst


def test_criterion_1_oracles(report):
    t0 = time.perf_counter()
    worst = _oracle_suite(np.random.default_rng(1))
    elapsed = time.perf_counter() - t0
    ok = (worst["backprop"] < 1e-4 and worst["delay_doppler"] < 1e-4 and worst["waveform"] < 1e-10
          and worst["gae"] < 1e-12 and elapsed < 120)
    report(1, ok, f"{elapsed:.1f}s " + " ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok


# 2 -------------------------------------------------------------------------------------------
def test_criterion_2_random_actions_decode_feasibly(report):
    cfg = desk_config()
    env = ElasticIsacEnv(cfg)
    env.reset(0)
    rng = np.random.default_rng(2)
    bad, worst_split, worst_ap = 0, 0.0, 0.0
    for _ in range(10_000):
        env._begin_frame()
        for role in ROLES:
            lay = env.layouts[role]
            env._apply(role, [rng.normal(0, 1, lay.length) * 10.0 ** rng.uniform(-3, 3)
                              for _ in range(env.n_agents[role])])
        plans = env.plans_L + env.plans_F
        bad += bool(validate_topology(env.partition, env.split, env.grouping, plans, cfg))
        worst_split = max(worst_split, float(np.max(np.abs(env.split.P_L + env.split.P_F - cfg.P_max))))
        for p in plans:
            cap = (env.split.P_L if p.ctx.regime == "L" else env.split.P_F)[p.ctx.aps]
            worst_ap = max(worst_ap, float(np.max(p.ap_totals() - cap, initial=-np.inf)))
    ok = bad == 0 and worst_split <= 1e-9 and worst_ap <= 1e-9
    report(2, ok, f"violations={bad}/10000 split_err={worst_split:.1e} ap_excess={worst_ap:.1e}")
    assert ok


# 3 -------------------------------------------------------------------------------------------
def test_criterion_3_overhead_arithmetic(report):
    c = ScenarioConfig()
    o1, _ = phase1_overhead(0, 0, c.A, c.K, c.N_tx)
    _, o2 = phase1_overhead(2, 1, c.A, c.K, c.N_tx)
    of = federated_overhead([2, 2], c.A, c.N_tx)
    _, S, _, _ = frame_totals([1.0], [o1] * c.M, [0] * c.M, [], c.o, c.O_bar_m)
    ok = o1 == 32 and o2 == 44 and of == 240 and c.o == 1024 and abs(c.O_bar_m - 716.8) < 1e-9 \
        and abs(S - 4 * (716.8 + 32) / 1024) < 1e-12
    report(3, ok, f"O1={o1} O2={o2} OF={of} S_ccn={S:.4f}")
    assert ok


# 4 -------------------------------------------------------------------------------------------
def _mean_overhead(env, policy) -> float:
    out = []
    while not env.done:
        out.append(env.step(policy).diagnostics["S"])
    return float(np.mean(out))


def test_criterion_4_untrained_overhead_ordering(report):
    cfg = load_config(DESK)
    S = {"ccn": [], "proposed": [], "cfn": []}
    for seed in range(100):
        r = Runner(cfg, "proposed", seed)
        S["proposed"].append(r.run_episode(0, train=False).metrics(seed)["overhead"])
        env = r.env
        env.reset([seed, 0])
        S["ccn"].append(_mean_overhead(env, lambda role, obs: ccn_only_actions(env, role, obs)))
        env.reset([seed, 0])
        S["cfn"].append(_mean_overhead(env, lambda role, obs: cfn_only_actions(env, role, obs)))
    S = {k: np.array(v) for k, v in S.items()}
    rng = np.random.default_rng(4)
    idx = rng.integers(0, 100, (5000, 100))
    lo_gap = np.percentile(S["proposed"][idx].mean(1) - S["ccn"][idx].mean(1), 2.5)
    hi_gap = np.percentile(S["cfn"][idx].mean(1) - S["proposed"][idx].mean(1), 2.5)
    ok = lo_gap > 0 and hi_gap > 0
    report(4, ok, " < ".join(f"S({k})={S[k].mean():.3f}" for k in ("ccn", "proposed", "cfn"))
           + f" (95% lower gaps {lo_gap:.3f}, {hi_gap:.3f})")
    assert ok


# 5 -------------------------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_5_learning_signal(report):
    cfg = load_config(DESK)
    t0 = time.perf_counter()
    usr = {}
    for scheme, n in (("random", 200), ("proposed", 2000), ("ccn", 2000), ("cfn", 2000)):
        _, rows = train(cfg, scheme, 0, n)
        usr[scheme] = np.array([r["usr"] for r in rows])
    elapsed = time.perf_counter() - t0
    rand = float(usr["random"].mean())
    first = float(usr["proposed"][:40].mean())
    final = {k: float(moving_average(v, 40)[-1]) for k, v in usr.items() if k != "random"}
    checks = {
        "improve30": final["proposed"] >= 1.3 * first,
        "beats_random": final["proposed"] > rand,
        "ccn_beats_random": final["ccn"] > rand,
        "cfn_beats_random": final["cfn"] > rand,
        "under_1h": elapsed < 3600,
    }
    ok = all(checks.values())
    report(5, ok, f"{elapsed / 60:.1f}min first40={first:.3f} final_ma={final} random={rand:.3f} "
           + " ".join(k for k, v in checks.items() if not v))
    assert ok


# 6 -------------------------------------------------------------------------------------------
def test_criterion_6_byte_identical_runs(report, tmp_path):
    outs = []
    for name in ("a", "b"):
        assert cli_main(["train", "--config", str(DESK), "--episodes", "5", "--seed", "11",
                         "--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name / "metrics.csv").read_bytes())
    ok = outs[0] == outs[1] and outs[0].count(b"\n") == 6
    report(6, ok, f"{len(outs[0])} bytes each")
    assert ok


# 7 -------------------------------------------------------------------------------------------
def test_criterion_7_tracking_converges(report):
    cfg = desk_config(M=1, R=1, M_max=1, A=2, K=1, Q=1)
    env = ElasticIsacEnv(cfg)
    grid = beam_grid(cfg.delta_theta)

    def full_radar(role, obs):
        if role == "LCP":
            return [np.concatenate([[0.0, 0.0], np.full(cfg.A, cfg.P_max), [cfg.B]])]
        if role == "LPB":
            th = relative_angles(env.x_pred[0, :2][None, :], env.scn.ap_positions)
            raw = np.zeros((cfg.A, 4))
            raw[:, 1] = cfg.P_max / cfg.B
            raw[:, 2] = 1
            raw[:, 3] = np.abs(th[:, None] - grid[None, :]).argmin(axis=1) + 1
            return [raw.ravel()]
        lay = env.layouts[role]
        return [np.ones(lay.length) if role == "FG" else np.zeros(lay.length)]

    good = 0
    for seed in range(100):
        env.reset(seed)
        err = [env.step(full_radar).diagnostics["pos_err"][0] for _ in range(10)]
        good += bool(np.all(np.diff(err) < 0))
    ok = good >= 95
    report(7, ok, f"monotone in {good}/100 seeds")
    assert ok

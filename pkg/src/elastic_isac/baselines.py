"""Comparison schemes: local-only, federated-only and random classification with MRT beams."""
from __future__ import annotations

import enum

import numpy as np

from .kinematics import relative_angles, steering_matrix
from .topology import beam_grid, federated_context, local_context


class BaselineKind(enum.Enum):
    CCN_ONLY = "ccn"
    CFN_ONLY = "cfn"
    RANDOM_MRT = "random"


# roles each scheme trains; the rest are driven by the fixed policies below
LIVE_ROLES = {
    "proposed": ("LCP", "LPB", "FG", "FPB"),
    "ccn": ("LPB",),
    "cfn": ("FG", "FPB"),
    "random": (),
}


def _balanced_labels(M: int, R: int, M_max: int) -> np.ndarray:
    """Contiguous blocks of at most M_max cells, labels 1..R."""
    return np.minimum(np.arange(M) // M_max, R - 1) + 1.0


def ccn_only_actions(env, role: str, obs, rng=None) -> list[np.ndarray]:
    """Every service local with all spectrum and power; federated roles get inert actions."""
    c = env.cfg
    if role == "LCP":
        raw = np.concatenate([np.zeros(c.K + c.Q), np.full(c.A, c.P_max), [float(c.B)]])
        return [raw.copy() for _ in range(c.M)]
    return _inert(env, role)


def cfn_only_actions(env, role: str, obs, rng=None) -> list[np.ndarray]:
    """Every service federated with all spectrum and power; local roles get inert actions."""
    c = env.cfg
    if role == "LCP":
        raw = np.concatenate([np.ones(c.K + c.Q), np.zeros(c.A), [0.0]])
        return [raw.copy() for _ in range(c.M)]
    if role == "FG":
        return [_balanced_labels(c.M, c.R, c.M_max)]
    return _inert(env, role)


def _inert(env, role: str) -> list[np.ndarray]:
    c = env.cfg
    lay = env.layouts[role]
    raw = np.zeros(lay.length)
    raw[lay.cat_idx] = 1.0
    if role == "FG":
        return [_balanced_labels(c.M, c.R, c.M_max)]
    return [raw.copy() for _ in range(env.n_agents[role])]


def _mrt_block(env, ctx, budget_per_ap, cand_users, cand_targets, cand_aps) -> np.ndarray:
    """Equal power over served entities and grid beams matched to channels / predicted targets."""
    c = env.cfg
    nKc, nQc = len(cand_users), len(cand_targets)
    raw = np.zeros((len(cand_aps), 2 * (nKc + nQc)))
    raw[:, nKc + nQc:] = 1.0  # grid level 1 for unused beams
    n_served = len(ctx.users) + len(ctx.targets)
    bw_total = float(np.sum(ctx.bandwidth))
    if n_served == 0 or bw_total <= 0:
        return raw.ravel()
    grid = beam_grid(c.delta_theta)
    V = steering_matrix(grid, c.N_tx)  # (levels, n)
    rows = np.searchsorted(cand_aps, ctx.aps)
    ucols = np.searchsorted(cand_users, ctx.users)
    qcols = np.searchsorted(cand_targets, ctx.targets)
    for j, a in zip(rows, ctx.aps):
        p = budget_per_ap[j] / (bw_total * n_served)
        raw[j, ucols] = p
        raw[j, nKc + qcols] = p
        if len(ctx.users):
            H = env.book.h_hat[a][np.ix_(ctx.users, ctx.subbands)]  # (k, s, n)
            score = (np.abs(np.einsum("ksn,ln->ksl", H.conj(), V)) ** 2).sum(axis=1)
            raw[j, nKc + nQc + ucols] = score.argmax(axis=1) + 1
        if len(ctx.targets):
            th = relative_angles(env.x_pred[ctx.targets, :2], env.scn.ap_positions[a][None, :])
            raw[j, 2 * nKc + nQc + qcols] = np.abs(th[:, None] - grid[None, :]).argmin(axis=1) + 1
    return raw.ravel()


def random_mrt_actions(env, role: str, obs, rng) -> list[np.ndarray]:
    """Bernoulli(1/2) classification, even splits, random grouping, equal-power MRT beams."""
    c = env.cfg
    if role == "LCP":
        out = []
        for _ in range(c.M):
            bits = rng.integers(0, 2, c.K + c.Q).astype(float)
            out.append(np.concatenate([bits, np.full(c.A, c.P_max / 2), [c.B / 2]]))
        return out
    if role == "LPB":
        out = []
        for m in range(c.M):
            ctx = local_context(m, env.partition, env.split, c)
            aps = env.scn.aps_of(m)
            out.append(_mrt_block(env, ctx, env.split.P_L[aps], env.scn.users_of(m), env.scn.targets_of(m), aps))
        return out
    if role == "FG":
        return [rng.integers(1, c.R + 1, c.M).astype(float)]
    out = []
    all_u, all_q, all_a = np.arange(c.M * c.K), np.arange(c.M * c.Q), np.arange(c.M * c.A)
    for r in range(c.R):
        ctx = federated_context(r, env.partition, env.split, env.grouping, c)
        out.append(_mrt_block(env, ctx, env.split.P_F, all_u, all_q, all_a))
    return out


FIXED_POLICIES = {
    "ccn": ccn_only_actions,
    "cfn": cfn_only_actions,
    "random": random_mrt_actions,
}

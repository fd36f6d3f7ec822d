"""Decoding of raw agent actions into feasible topology and resource decisions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comm_metrics import RegimeContext, effective_slots
from .kinematics import steering_matrix

POWER_TOL = 1e-9


@dataclass
class ServicePartition:
    local_users: list[np.ndarray]
    local_targets: list[np.ndarray]
    fed_users: list[np.ndarray]
    fed_targets: list[np.ndarray]

    @property
    def n_cells(self) -> int:
        return len(self.local_users)

    def all_local(self) -> bool:
        return all(len(u) == 0 for u in self.fed_users) and all(len(q) == 0 for q in self.fed_targets)


@dataclass
class ResourceSplit:
    B_L: np.ndarray  # (M,) subcarriers per cell
    B_F: np.ndarray
    P_L: np.ndarray  # (M*A,) watts per AP
    P_F: np.ndarray


@dataclass
class Grouping:
    clusters: list[np.ndarray]  # 0-based cell indices per CFN

    def cluster_of(self, m: int) -> int:
        for r, s in enumerate(self.clusters):
            if m in s:
                return r
        raise LookupError(m)


@dataclass
class BeamPowerPlan:
    """Per-subcarrier powers and unit beams for one regime context.

    Arrays are indexed by the context's local AP / user / target / subband order.
    """
    ctx: RegimeContext
    p_comm: np.ndarray  # (a, k, s)
    w_comm: np.ndarray  # (a, k, s, n)
    p_radar: np.ndarray  # (a, q, s)
    w_radar: np.ndarray  # (a, q, s, n)
    budget: np.ndarray  # (a,) regime power per AP
    theta_comm: np.ndarray | None = None  # (a, k)
    theta_radar: np.ndarray | None = None  # (a, q)

    def ap_totals(self) -> np.ndarray:
        """Left-hand side of the per-AP power constraint: sum_s B_s * sum_z p."""
        per_sub = self.p_comm.sum(axis=1) + self.p_radar.sum(axis=1)
        return per_sub @ self.ctx.bandwidth

    @classmethod
    def empty(cls, ctx: RegimeContext, N_tx: int) -> "BeamPowerPlan":
        a, k, q, s = len(ctx.aps), len(ctx.users), len(ctx.targets), len(ctx.subbands)
        return cls(ctx, np.zeros((a, k, s)), np.zeros((a, k, s, N_tx), complex), np.zeros((a, q, s)),
                   np.zeros((a, q, s, N_tx), complex), np.zeros(a))


def beam_grid(delta_theta: int) -> np.ndarray:
    """Angles (-1/2 + l/Delta) * pi for l = 1..Delta."""
    ell = np.arange(1, delta_theta + 1)
    return (-0.5 + ell / delta_theta) * np.pi


def grid_angle(ell, delta_theta: int) -> np.ndarray:
    ell = np.clip(np.rint(np.asarray(ell, dtype=float)), 1, delta_theta)
    return (-0.5 + ell / delta_theta) * np.pi


def decode_lcp(raw, m: int, cfg):
    """Split cell ``m``'s services into local / federated and partition its bandwidth and power.

    Returns ``(local_users, local_targets, fed_users, fed_targets), (B_L, B_F, P_L, P_F)``
    with global indices and per-AP power arrays for the cell's APs.
    """
    K, Q, A, B = cfg.K, cfg.Q, cfg.A, cfg.B
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (K + Q + A + 1,):
        raise ValueError(f"LCP action must have length {K + Q + A + 1}")
    bits = np.clip(np.rint(np.nan_to_num(raw[: K + Q])), 0, 1).astype(int)
    users = np.arange(m * K, (m + 1) * K)
    targets = np.arange(m * Q, (m + 1) * Q)
    part = (users[bits[:K] == 0], targets[bits[K:] == 0], users[bits[:K] == 1], targets[bits[K:] == 1])
    P_L = np.clip(np.nan_to_num(raw[K + Q: K + Q + A]), 0.0, cfg.P_max)
    b_raw = float(np.clip(np.nan_to_num(raw[-1]), 0.0, B))
    B_L = int(min(max(math.ceil(b_raw), 0), B))
    return part, (B_L, B - B_L, P_L, cfg.P_max - P_L)


def assemble_lcp(decoded: list, cfg) -> tuple[ServicePartition, ResourceSplit]:
    parts = [d[0] for d in decoded]
    splits = [d[1] for d in decoded]
    partition = ServicePartition([p[0] for p in parts], [p[1] for p in parts], [p[2] for p in parts], [p[3] for p in parts])
    split = ResourceSplit(
        B_L=np.array([s[0] for s in splits], dtype=int),
        B_F=np.array([s[1] for s in splits], dtype=int),
        P_L=np.concatenate([s[2] for s in splits]),
        P_F=np.concatenate([s[3] for s in splits]),
    )
    return partition, split


def decode_fg(raw, R: int, M_max: int) -> Grouping:
    """Group cells by label; overfull clusters shed their highest-index cells to the least-loaded cluster."""
    labels = np.clip(np.rint(np.nan_to_num(np.asarray(raw, dtype=float))), 1, R).astype(int) - 1
    clusters = [sorted(np.flatnonzero(labels == r).tolist()) for r in range(R)]
    while True:
        over = [r for r in range(R) if len(clusters[r]) > M_max]
        if not over:
            break
        r = over[0]
        cell = clusters[r].pop()  # highest index
        loads = [len(c) if j != r else math.inf for j, c in enumerate(clusters)]
        target = int(np.argmin(loads))
        clusters[target] = sorted(clusters[target] + [cell])
    return Grouping([np.array(c, dtype=int) for c in clusters])


def local_context(m: int, partition: ServicePartition, split: ResourceSplit, cfg) -> RegimeContext:
    L_loc = effective_slots("L", cfg.L, cfg.K, cfg.D_ce)
    return RegimeContext(
        regime="L", index=m,
        aps=np.arange(m * cfg.A, (m + 1) * cfg.A),
        users=np.asarray(partition.local_users[m], dtype=int),
        targets=np.asarray(partition.local_targets[m], dtype=int),
        subbands=np.array([m]),
        bandwidth=np.array([float(split.B_L[m])]),
        slots=np.array([float(L_loc)]),
    )


def federated_context(r: int, partition: ServicePartition, split: ResourceSplit, grouping: Grouping, cfg) -> RegimeContext:
    cells = np.asarray(grouping.clusters[r], dtype=int)
    users = np.concatenate([partition.fed_users[m] for m in cells]).astype(int) if len(cells) else np.zeros(0, int)
    targets = np.concatenate([partition.fed_targets[m] for m in cells]).astype(int) if len(cells) else np.zeros(0, int)
    L_fed = effective_slots("F", cfg.L, cfg.K, cfg.D_ce, [partition.fed_users[m] for m in cells])
    aps = np.concatenate([np.arange(m * cfg.A, (m + 1) * cfg.A) for m in cells]).astype(int) if len(cells) else np.zeros(0, int)
    return RegimeContext(
        regime="F", index=r, aps=aps, users=np.sort(users), targets=np.sort(targets), subbands=cells,
        bandwidth=split.B_F[cells].astype(float), slots=np.full(len(cells), float(L_fed)),
    )


def project_power_simplex(raw, weights, budget: float) -> np.ndarray:
    """Rescale ``raw`` (last axis aligned with ``weights``) so that sum(weights * p) <= budget."""
    p = np.maximum(np.nan_to_num(np.asarray(raw, dtype=float)), 0.0)
    if budget <= 0:
        return np.zeros_like(p)
    total = float(np.sum(p * np.asarray(weights, dtype=float)))
    if total <= budget:
        return p
    return p * (budget / total)


def decode_beam_power(raw, ctx: RegimeContext, budget, book, cfg, cand_users, cand_targets, cand_aps) -> BeamPowerPlan:
    """Turn a per-AP raw block into a feasible plan for ``ctx``.

    ``raw`` has shape (len(cand_aps), 2*(len(cand_users)+len(cand_targets))) laid out as
    [user powers, target powers, user angle levels, target angle levels]; rows and
    columns outside the context are ignored (zero power).
    """
    nKc, nQc = len(cand_users), len(cand_targets)
    raw = np.asarray(raw, dtype=float).reshape(len(cand_aps), 2 * (nKc + nQc))
    a_rows = np.searchsorted(cand_aps, ctx.aps)
    u_cols = np.searchsorted(cand_users, ctx.users)
    q_cols = np.searchsorted(cand_targets, ctx.targets)
    budget = np.asarray(budget, dtype=float)
    bud = budget[a_rows] if budget.ndim and budget.size == len(cand_aps) else np.broadcast_to(budget, (len(ctx.aps),))
    block = raw[a_rows]
    pc = np.clip(np.nan_to_num(block[:, u_cols]), 0.0, bud[:, None])
    pr = np.clip(np.nan_to_num(block[:, nKc + q_cols]), 0.0, bud[:, None])
    th_c = grid_angle(np.nan_to_num(block[:, nKc + nQc + u_cols], nan=1.0), cfg.delta_theta)
    th_r = grid_angle(np.nan_to_num(block[:, 2 * nKc + nQc + q_cols], nan=1.0), cfg.delta_theta)

    nS = len(ctx.subbands)
    bw = ctx.bandwidth
    live = (bw > 0).astype(float)
    nA, nK, nQ = len(ctx.aps), len(ctx.users), len(ctx.targets)
    p_comm = np.repeat(pc[:, :, None], nS, axis=2) * live
    p_radar = np.repeat(pr[:, :, None], nS, axis=2) * live
    for a in range(nA):
        stacked = np.concatenate([p_comm[a], p_radar[a]], axis=0)
        stacked = project_power_simplex(stacked, bw, float(bud[a]))
        p_comm[a], p_radar[a] = stacked[:nK], stacked[nK:]

    v_c = steering_matrix(th_c, cfg.N_tx)  # (a, k, n)
    v_r = steering_matrix(th_r, cfg.N_tx)
    w_comm = np.repeat(v_c[:, :, None, :], nS, axis=2)
    if nK and nS:
        H = book.h_hat[np.ix_(ctx.aps, ctx.users, ctx.subbands)]  # (a, k, s, n)
        inner = np.einsum("aksn,aksn->aks", H.conj(), w_comm)
        w_comm = w_comm * np.exp(-1j * np.angle(inner))[..., None]
    w_radar = np.repeat(v_r[:, :, None, :], nS, axis=2)
    return BeamPowerPlan(ctx, p_comm, w_comm, p_radar, w_radar, bud.copy(), th_c, th_r)


def validate_topology(partition: ServicePartition, split: ResourceSplit, grouping: Grouping, plans, cfg) -> list[str]:
    """Identifiers of every violated constraint; an empty list means feasible."""
    out: list[str] = []
    M, K, Q, A, B = cfg.M, cfg.K, cfg.Q, cfg.A, cfg.B
    for m in range(M):
        for loc, fed, full in ((partition.local_users[m], partition.fed_users[m], np.arange(m * K, (m + 1) * K)),
                               (partition.local_targets[m], partition.fed_targets[m], np.arange(m * Q, (m + 1) * Q))):
            sl, sf = set(map(int, loc)), set(map(int, fed))
            if sl & sf or (sl | sf) != set(map(int, full)):
                out.append("service partition")
                break
    if np.any(split.B_L < 0) or np.any(split.B_F < 0) or np.any(split.B_L + split.B_F != B):
        out.append("bandwidth split")
    if (np.any(split.P_L < -POWER_TOL) or np.any(split.P_F < -POWER_TOL)
            or np.any(np.abs(split.P_L + split.P_F - cfg.P_max) > POWER_TOL * max(1.0, cfg.P_max))):
        out.append("power split")
    seen: list[int] = []
    for s in grouping.clusters:
        seen.extend(int(c) for c in s)
    if len(seen) != len(set(seen)):
        out.append("CFN disjointness")
    if set(seen) != set(range(M)):
        out.append("CFN coverage")
    if any(len(s) > cfg.M_max for s in grouping.clusters):
        out.append("CFN size")
    if len(grouping.clusters) != cfg.R:
        out.append("CFN count")

    for plan in plans:
        ctx = plan.ctx
        if np.any(plan.p_comm < 0) or np.any(plan.p_radar < 0):
            out.append("power nonnegativity")
        if ctx.regime == "L":
            m = ctx.index
            ok = (set(map(int, ctx.users)) <= set(map(int, partition.local_users[m]))
                  and set(map(int, ctx.targets)) <= set(map(int, partition.local_targets[m]))
                  and set(map(int, ctx.aps)) <= set(range(m * A, (m + 1) * A)))
            if not ok:
                out.append("local service indicator")
            cap = split.P_L[ctx.aps]
            name = "per-AP local power"
        else:
            cells = grouping.clusters[ctx.index]
            fu = set().union(*[set(map(int, partition.fed_users[m])) for m in cells]) if len(cells) else set()
            fq = set().union(*[set(map(int, partition.fed_targets[m])) for m in cells]) if len(cells) else set()
            fa = {a for m in cells for a in range(m * A, (m + 1) * A)}
            ok = set(map(int, ctx.users)) <= fu and set(map(int, ctx.targets)) <= fq and set(map(int, ctx.aps)) <= fa
            if not ok:
                out.append("federated service indicator")
            cap = split.P_F[ctx.aps]
            name = "per-AP federated power"
        # individual (per-entity) and per-AP totals
        if np.any(plan.p_comm @ ctx.bandwidth > cap[:, None] * (1 + POWER_TOL) + POWER_TOL) or \
                np.any(plan.p_radar @ ctx.bandwidth > cap[:, None] * (1 + POWER_TOL) + POWER_TOL):
            out.append(name.replace("per-AP", "per-entity"))
        if np.any(plan.ap_totals() > cap * (1 + POWER_TOL) + POWER_TOL):
            out.append(name)
    return out

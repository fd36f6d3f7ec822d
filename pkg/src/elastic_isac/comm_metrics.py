"""Downlink SINR with imperfect CSI, effective slot counts and per-user effective rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleFrameError(ValueError):
    pass


@dataclass(frozen=True)
class RegimeContext:
    """Serving sets of one CCN (regime "L") or one CFN (regime "F").

    ``bandwidth`` and ``slots`` are aligned with ``subbands``.
    """
    regime: str
    index: int
    aps: np.ndarray
    users: np.ndarray
    targets: np.ndarray
    subbands: np.ndarray
    bandwidth: np.ndarray
    slots: np.ndarray

    @property
    def n_aps(self) -> int:
        return len(self.aps)


def effective_slots(regime: str, L: int, K: int, D_ce: int, federated_sets=()) -> int:
    """Transmission slots left after channel estimation.

    ``federated_sets`` lists the federated user sets of the cells in the cluster
    (only used for the "F" regime).
    """
    if regime == "L":
        out = L - K * D_ce
    elif regime == "F":
        sets = [set(int(k) for k in s) for s in federated_sets]
        union = set().union(*sets) if sets else set()
        worst = max((len(union - s) for s in sets), default=0)
        out = L - D_ce * (worst + K)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    if out < 0:
        raise InfeasibleFrameError(f"negative effective slot count {out}")
    return out


def _gains(plan, book):
    ctx = plan.ctx
    H = book.h_hat[np.ix_(ctx.aps, ctx.users, ctx.subbands)]  # (a, k, s, n)
    # G[r, t, s] = sum_a sqrt(p[a,t,s]) * h_hat[a,r,s]^H w[a,t,s]
    return np.einsum("arsn,atsn,ats->rts", H.conj(), plan.w_comm, np.sqrt(plan.p_comm))


def effective_noise(plan, book, sigma_user) -> np.ndarray:
    """Error-induced noise plus receiver noise, shape (users, subbands)."""
    ctx = plan.ctx
    delta = book.delta[np.ix_(ctx.aps, ctx.users, ctx.subbands)]  # (a, k, s)
    tx = plan.p_comm.sum(axis=1) + plan.p_radar.sum(axis=1)  # (a, s)
    return np.einsum("aks,as->ks", delta, tx) + np.asarray(sigma_user, dtype=float)[ctx.users][:, None]


def sinr_matrix(plan, book, sigma_user) -> np.ndarray:
    """SINR for every served user on every subband of the context, shape (users, subbands)."""
    ctx = plan.ctx
    nK, nS = len(ctx.users), len(ctx.subbands)
    if nK == 0 or nS == 0:
        return np.zeros((nK, nS))
    P = np.abs(_gains(plan, book)) ** 2
    diag = np.arange(nK)
    signal = P[diag, diag, :]
    off = P.copy()
    off[diag, diag, :] = 0.0
    interference = off.sum(axis=1)
    return signal / (interference + effective_noise(plan, book, sigma_user))


def comm_sinr(k: int, i: int, plan, book, sigma_user) -> float:
    """SINR of global user ``k`` on global subband ``i``."""
    ctx = plan.ctx
    users = list(map(int, ctx.users))
    subs = list(map(int, ctx.subbands))
    if k not in users or i not in subs:
        raise LookupError(f"user {k} / subband {i} not served in this context")
    return float(sinr_matrix(plan, book, sigma_user)[users.index(k), subs.index(i)])


def effective_rate(sinrs, bandwidth, slots, M: int, B: int, L: int) -> float:
    """Rate in nats/s/Hz summed over the context's subbands."""
    sinrs = np.asarray(sinrs, dtype=float)
    w = np.asarray(bandwidth, dtype=float) * np.asarray(slots, dtype=float) / (M * B * L)
    return float(np.sum(w * np.log1p(sinrs)))


def effective_rates(sinr: np.ndarray, ctx: RegimeContext, M: int, B: int, L: int) -> np.ndarray:
    w = ctx.bandwidth * ctx.slots / (M * B * L)
    return np.log1p(sinr) @ w if sinr.size else np.zeros(len(ctx.users))

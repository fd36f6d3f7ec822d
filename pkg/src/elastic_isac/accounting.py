"""Signaling overhead counts, utility normalisation and the utility-to-signaling ratio."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REWARD_FLOOR = 1e-3


def phase1_overhead(n_fed_users: int, n_fed_targets: int, A: int, K: int, N_tx: int) -> tuple[int, int]:
    """(local CSI exchange, local result reporting) coefficient counts for one cell."""
    o1 = (A - 1) * K * N_tx
    o2 = n_fed_users * A * N_tx + 20 * n_fed_targets
    return int(o1), int(o2)


def federated_overhead(fed_user_counts, A: int, N_tx: int) -> int:
    """CSI forwarded inside one cluster; ``fed_user_counts`` holds |K_i^F| per member cell."""
    counts = [int(c) for c in fed_user_counts]
    total = sum(counts)
    n_cells = len(counts)
    per_cell = sum(total * n_cells - c for c in counts)
    return int(per_cell * (A - 1) * N_tx + per_cell * A * N_tx)


def normalize_comm(u, u_min: float, u_max: float):
    return np.clip((np.asarray(u, dtype=float) - u_min) / (u_max - u_min), 0.0, 1.0)


def _log_score(err, lo: float, hi: float):
    err = np.asarray(err, dtype=float)
    if np.any(err <= 0):
        raise FloatingPointError("sensing errors must be positive")
    return (np.log10(hi) - np.log10(err)) / (np.log10(hi) - np.log10(lo))


def normalize_sense(pos_err, vel_err, pos_bounds: tuple[float, float], vel_bounds: tuple[float, float]):
    """Worse of the position and velocity log-scores, clipped to [0, 1]; bounds are (min, max)."""
    rp = _log_score(pos_err, *pos_bounds)
    rv = _log_score(vel_err, *vel_bounds)
    return np.clip(np.minimum(rp, rv), 0.0, 1.0)


def frame_totals(utilities, o1, o2, of, o: float, O_bar: float, floor: float = REWARD_FLOOR):
    """(U, S, USR, reward) for one frame."""
    U = float(np.sum(utilities))
    o1 = np.asarray(o1, dtype=float)
    S = float((np.sum(O_bar + o1 + np.asarray(o2, dtype=float)) + np.sum(of)) / o)
    return U, S, U / S, float(np.log(max(U, floor)) - np.log(S))


@dataclass
class FrameLedger:
    O1: list[int] = field(default_factory=list)  # per cell
    O2: list[int] = field(default_factory=list)
    OF: list[int] = field(default_factory=list)  # per cluster
    comm_utility: float = 0.0
    sense_utility: float = 0.0
    U: float = 0.0
    S: float = 0.0
    USR: float = 0.0
    reward: float = 0.0

    def close(self, o: float, O_bar: float) -> None:
        self.U, self.S, self.USR, self.reward = frame_totals(
            [self.comm_utility, self.sense_utility], self.O1, self.O2, self.OF, o, O_bar)

    @property
    def overhead(self) -> float:
        return self.S

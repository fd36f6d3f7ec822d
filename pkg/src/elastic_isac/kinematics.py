"""Target motion, bistatic delay/Doppler geometry and steering vectors."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import C0


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class TargetState:
    x: np.ndarray  # position (m)
    v: np.ndarray  # velocity (m/s)
    frame: int = 0

    @classmethod
    def from_vector(cls, s, frame: int = 0) -> "TargetState":
        s = np.asarray(s, dtype=float)
        return cls(s[:2].copy(), s[2:4].copy(), frame)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.v])


@dataclass(frozen=True)
class DelayDoppler:
    tau: float
    f: float
    d_tau_dx: np.ndarray
    d_f_dx: np.ndarray
    d_f_dv: np.ndarray

    def jacobian(self) -> np.ndarray:
        """2x4 Jacobian of (tau, f) with respect to [x, y, vx, vy]."""
        return np.array([
            [self.d_tau_dx[0], self.d_tau_dx[1], 0.0, 0.0],
            [self.d_f_dx[0], self.d_f_dx[1], self.d_f_dv[0], self.d_f_dv[1]],
        ])


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=32)
def transition_matrix(T_bar: float) -> np.ndarray:
    """Constant-velocity transition; the cached result is read-only."""
    return _frozen(np.kron(np.array([[1.0, T_bar], [0.0, 1.0]]), np.eye(2)))


@lru_cache(maxsize=32)
def process_noise(delta_q: float, T_bar: float) -> np.ndarray:
    blk = np.array([[T_bar**3 / 3.0, T_bar**2 / 2.0], [T_bar**2 / 2.0, T_bar]])
    return _frozen(delta_q * np.kron(blk, np.eye(2)))


@lru_cache(maxsize=32)
def _noise_factor(delta_q: float, T_bar: float) -> np.ndarray:
    return _frozen(np.linalg.cholesky(process_noise(delta_q, T_bar)))


def advance_target(s: TargetState, delta_q: float, T_bar: float, rng) -> TargetState:
    """One frame of the constant-velocity model with white acceleration noise."""
    if T_bar <= 0:
        raise ValueError("T_bar must be positive")
    nxt = transition_matrix(T_bar) @ s.vector()
    if delta_q > 0:
        nxt = nxt + _noise_factor(delta_q, T_bar) @ rng.standard_normal(4)
    return TargetState.from_vector(nxt, s.frame + 1)


def delay_doppler(target: TargetState, ap_a, ap_a2, f_c: float) -> DelayDoppler:
    """Round-trip delay and Doppler for the path ap_a2 -> target -> ap_a, with gradients."""
    x = np.asarray(target.x, dtype=float)
    v = np.asarray(target.v, dtype=float)
    tau = 0.0
    f = 0.0
    d_tau = np.zeros(2)
    d_fx = np.zeros(2)
    d_fv = np.zeros(2)
    k = f_c / C0
    for ap in (np.asarray(ap_a, dtype=float), np.asarray(ap_a2, dtype=float)):
        r = ap - x
        d = float(np.hypot(r[0], r[1]))
        if d == 0.0:
            raise DegenerateGeometryError("target co-located with an AP")
        u = r / d
        vu = float(v @ u)
        tau += d / C0
        f += k * vu
        d_tau -= u / C0
        d_fx += k * (-v + vu * u) / d
        d_fv += k * u
    return DelayDoppler(tau, f, d_tau, d_fx, d_fv)


def steering(theta: float, N_tx: int) -> np.ndarray:
    if N_tx < 1:
        raise ValueError("N_tx must be >= 1")
    i = np.arange(N_tx)
    return np.exp(-1j * np.pi * i * np.sin(theta)) / np.sqrt(N_tx)


def steering_matrix(thetas, N_tx: int) -> np.ndarray:
    """Steering vectors stacked along the last axis, shape thetas.shape + (N_tx,)."""
    th = np.asarray(thetas, dtype=float)
    i = np.arange(N_tx)
    return np.exp(-1j * np.pi * np.sin(th)[..., None] * i) / np.sqrt(N_tx)


def relative_angle(frm, to) -> float:
    """arctan of the y/x difference ratio; a vertical pair maps to pi/2."""
    dx = float(to[0] - frm[0])
    dy = float(to[1] - frm[1])
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometryError("coincident points have no relative angle")
    if dx == 0.0:
        return np.pi / 2
    return float(np.arctan(dy / dx))


def relative_angles(frm: np.ndarray, to: np.ndarray) -> np.ndarray:
    """Vectorised relative_angle over broadcastable (..., 2) arrays."""
    d = np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)
    dx, dy = d[..., 0], d[..., 1]
    if np.any((dx == 0) & (dy == 0)):
        raise DegenerateGeometryError("coincident points have no relative angle")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.arctan(dy / dx)
    return np.where(dx == 0, np.pi / 2, out)

"""Communication channels: Rician initialisation, Gauss-Markov aging and the pilot-based estimation model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import relative_angles, steering, steering_matrix


def cn(rng, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def path_loss_db(d, f_c: float) -> np.ndarray:
    return 32.4 + 45.0 * np.log10(np.asarray(d, dtype=float)) + 20.0 * np.log10(f_c / 1e9)


def large_scale_fading(ap_positions, user_positions, f_c: float, min_distance: float = 1.0) -> np.ndarray:
    """Linear attenuation lambda[a, k] from the log-distance path loss."""
    diff = np.asarray(ap_positions)[:, None, :] - np.asarray(user_positions)[None, :, :]
    d = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), min_distance)
    return 10.0 ** (-path_loss_db(d, f_c) / 10.0)


def init_channel(lambda_C: float, kappa_bar: float, theta: float, N_tx: int, rng) -> np.ndarray:
    g = cn(rng, ())
    g_nlos = cn(rng, (N_tx,))
    los = np.sqrt(kappa_bar * N_tx) * g * steering(theta, N_tx)
    return np.sqrt(lambda_C / (kappa_bar + 1.0)) * (los + g_nlos)


def init_channels(lambda_C: np.ndarray, kappa_bar: float, theta: np.ndarray, n_sub: int, N_tx: int, rng) -> np.ndarray:
    """Independent Rician draws per (a, k, subband), sharing lambda and angle across subbands."""
    nA, nK = lambda_C.shape
    g = cn(rng, (nA, nK, n_sub))
    g_nlos = cn(rng, (nA, nK, n_sub, N_tx))
    v = steering_matrix(theta, N_tx)[:, :, None, :]
    los = np.sqrt(kappa_bar * N_tx) * g[..., None] * v
    return np.sqrt(lambda_C / (kappa_bar + 1.0))[:, :, None, None] * (los + g_nlos)


def evolve_channel(h_prev: np.ndarray, rho: float, lambda_C, rng) -> np.ndarray:
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    lam = np.asarray(lambda_C, dtype=float)
    lam = lam.reshape(lam.shape + (1,) * (np.ndim(h_prev) - lam.ndim))
    eps = cn(rng, np.shape(h_prev), np.broadcast_to(lam, np.shape(h_prev)))
    return rho * h_prev + np.sqrt(1.0 - rho**2) * eps


def estimation_error_variance(lambda_C, rho: float, p_ce: float, D_pilots, sigma_A):
    """MMSE error variance of the aged channel for ``D_pilots`` pilot symbols."""
    lam_bar = (1.0 - rho**2) * np.asarray(lambda_C, dtype=float)
    snr = p_ce * np.asarray(D_pilots, dtype=float) * lam_bar
    return lam_bar * (1.0 - snr / (snr + np.asarray(sigma_A, dtype=float)))


def estimate_channel(h_true: np.ndarray, delta, rng) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    delta = delta.reshape(delta.shape + (1,) * (np.ndim(h_true) - delta.ndim))
    return h_true + cn(rng, np.shape(h_true), np.broadcast_to(delta, np.shape(h_true)))


class EstimationLogicError(RuntimeError):
    pass


def pilot_count(k: int, i: int, home_cell: int, federated_subbands, B: int, B_F, D_ce: int) -> int:
    """Pilot symbols spent on user ``k``'s channel on subband ``i``.

    ``federated_subbands`` is the subband set of the cluster serving ``k`` in the
    federated regime (empty if ``k`` is local). ``B_F`` maps subband -> shared
    subcarrier count.
    """
    if i == home_cell:
        return B * D_ce
    if i in set(int(s) for s in federated_subbands):
        return int(B_F[i]) * D_ce
    raise EstimationLogicError(f"user {k} needs no channel estimate on subband {i}")


@dataclass
class ChannelBook:
    h: np.ndarray  # (nA, nK, M, N_tx) true channels
    h_hat: np.ndarray  # estimates, valid where ``estimated``
    delta: np.ndarray  # (nA, nK, M) per-entry error variance
    estimated: np.ndarray  # bool (nA, nK, M)
    lambda_C: np.ndarray  # (nA, nK)
    theta: np.ndarray  # (nA, nK)
    frame: int = 0

    @classmethod
    def create(cls, ap_positions, user_positions, M: int, N_tx: int, f_c: float, kappa_bar: float,
               rng, min_distance: float = 1.0) -> "ChannelBook":
        lam = large_scale_fading(ap_positions, user_positions, f_c, min_distance)
        theta = relative_angles(np.asarray(user_positions)[None, :, :], np.asarray(ap_positions)[:, None, :])
        h = init_channels(lam, kappa_bar, theta, M, N_tx, rng)
        nA, nK = lam.shape
        return cls(h=h, h_hat=np.zeros_like(h), delta=np.zeros((nA, nK, M)),
                   estimated=np.zeros((nA, nK, M), dtype=bool), lambda_C=lam, theta=theta)

    def clear_estimates(self) -> None:
        self.h_hat[...] = 0.0
        self.delta[...] = 0.0
        self.estimated[...] = False

    def estimate(self, aps, users, i: int, D_pilots, *, rho: float, p_ce: float, sigma_ap, rng) -> None:
        """Estimate h[a, k, i] for the cross product ``aps x users`` with ``D_pilots`` pilots.

        ``rho`` sets the prior: 0 when no previous-frame channel is available.
        """
        aps = np.asarray(aps, dtype=int)
        users = np.asarray(users, dtype=int)
        if aps.size == 0 or users.size == 0:
            return
        ix = np.ix_(aps, users)
        lam = self.lambda_C[ix]
        sig = np.asarray(sigma_ap, dtype=float)[aps][:, None]
        d = estimation_error_variance(lam, rho, p_ce, np.broadcast_to(D_pilots, lam.shape), sig)
        self.delta[aps[:, None], users[None, :], i] = d
        self.h_hat[aps[:, None], users[None, :], i] = estimate_channel(self.h[aps[:, None], users[None, :], i], d, rng)
        self.estimated[aps[:, None], users[None, :], i] = True

    def evolve(self, rho: float, rng) -> None:
        self.h = evolve_channel(self.h, rho, self.lambda_C, rng)
        self.frame += 1

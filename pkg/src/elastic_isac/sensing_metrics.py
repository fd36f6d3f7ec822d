"""Fisher information for target tracking, the Bayesian information recursion and sensing errors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import C0
from .kinematics import (
    DelayDoppler,
    TargetState,
    delay_doppler,
    process_noise,
    relative_angles,
    steering_matrix,
    transition_matrix,
)


@dataclass
class SensingBelief:
    x_pred: np.ndarray  # predicted state for the current frame
    J_prev: np.ndarray  # information matrix from the previous frame
    x_est: np.ndarray  # posterior estimate from the previous frame


@dataclass(frozen=True)
class FimPair:
    F_P: np.ndarray
    F_PV: np.ndarray
    F_V: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.block([[self.F_P, self.F_PV], [self.F_PV.T, self.F_V]])


def initial_information(sigma_p: float, sigma_v: float) -> np.ndarray:
    return np.diag([1 / sigma_p**2, 1 / sigma_p**2, 1 / sigma_v**2, 1 / sigma_v**2])


def radar_fading(target_pos, ap_a, ap_a2, cfg) -> float:
    """Variance of the round-trip coefficient for the path ap_a2 -> target -> ap_a."""
    x = np.asarray(target_pos, dtype=float)
    d2 = [max(float(np.sum((x - np.asarray(ap, dtype=float)) ** 2)), cfg.min_distance**2) for ap in (ap_a, ap_a2)]
    e = cfg.radar_range_exponent / 2.0
    num = cfg.G_R * cfg.N_tx**2 * C0**2 * cfg.sigma_rcs
    return num / ((4 * np.pi) ** 3 * cfg.f_c**2 * (d2[0] ** e) * (d2[1] ** e))


def sense_gain(ap_row: int, target_col: int, sub_col: int, plan, theta: float) -> float:
    """Power reaching direction ``theta`` from one AP on one subband, summed over all beams.

    Indices are local to ``plan``'s context.
    """
    v = steering_matrix(theta, plan.w_comm.shape[-1])
    gc = np.abs(plan.w_comm[ap_row, :, sub_col, :] @ v.conj()) ** 2
    gr = np.abs(plan.w_radar[ap_row, :, sub_col, :] @ v.conj()) ** 2
    return float(plan.p_comm[ap_row, :, sub_col] @ gc + plan.p_radar[ap_row, :, sub_col] @ gr)


def sense_gains(plan, thetas: np.ndarray) -> np.ndarray:
    """Gamma for every (ap, subband) given per-AP angles ``thetas`` (a,) toward one target."""
    v = steering_matrix(thetas, plan.w_comm.shape[-1])  # (a, n)
    gc = np.abs(np.einsum("aksn,an->aks", plan.w_comm, v.conj())) ** 2
    gr = np.abs(np.einsum("aqsn,an->aqs", plan.w_radar, v.conj())) ** 2
    return np.einsum("aks,aks->as", plan.p_comm, gc) + np.einsum("aqs,aqs->as", plan.p_radar, gr)


def index_sums(n) -> tuple[np.ndarray, np.ndarray]:
    """(sum_{j<n} j, sum_{j<n} j^2) elementwise."""
    n = np.asarray(n, dtype=float)
    return n * (n - 1) / 2.0, n * (n - 1) * (2 * n - 1) / 6.0


def waveform_weights(lambda_R: float, gamma, bandwidth, slots, freq_ratio, delta_f: float, T_sym: float):
    """(W_tt, W_ff, W_tf) summed over subbands, with the b and l sums in closed form.

    ``gamma``, ``bandwidth``, ``slots`` and ``freq_ratio`` are aligned per subband.
    """
    gamma = np.asarray(gamma, dtype=float)
    s1b, s2b = index_sums(bandwidth)
    s1l, s2l = index_sums(slots)
    Bn = np.asarray(bandwidth, dtype=float)
    Ln = np.asarray(slots, dtype=float)
    r = np.asarray(freq_ratio, dtype=float)
    c = 8.0 * np.pi**2 * lambda_R * gamma
    w_tt = float(np.sum(c * delta_f**2 * s2b * Ln))
    w_ff = float(np.sum(c * T_sym**2 * r**2 * Bn * s2l))
    w_tf = float(np.sum(c * T_sym * delta_f * s1b * s1l))
    return w_tt, w_ff, w_tf


def fim_pair(weights, dd: DelayDoppler) -> FimPair:
    """Per AP pair information blocks from the waveform weights and delay/Doppler gradients."""
    w_tt, w_ff, w_tf = weights
    gt, gf, gv = dd.d_tau_dx, dd.d_f_dx, dd.d_f_dv
    F_P = w_tt * np.outer(gt, gt) + w_ff * np.outer(gf, gf) - w_tf * (np.outer(gf, gt) + np.outer(gt, gf))
    F_PV = np.outer(-w_tf * gt + w_ff * gf, gv)
    F_V = w_ff * np.outer(gv, gv)
    return FimPair(F_P, F_PV, F_V)


def freq_ratios(subbands, cfg) -> np.ndarray:
    return (cfg.f_c + np.asarray(subbands, dtype=float) * cfg.B * cfg.delta_f) / cfg.f_c


def fim_total(state, plan, ap_positions, sigma_ap, cfg) -> np.ndarray:
    """4x4 FIM of one target served by ``plan``'s context, summed over all transmit/receive AP pairs."""
    ctx = plan.ctx
    if len(ctx.aps) == 0 or len(ctx.subbands) == 0:
        return np.zeros((4, 4))
    s = np.asarray(state, dtype=float)
    x, v = s[:2], s[2:4]
    P = np.asarray(ap_positions, dtype=float)[ctx.aps]  # (a, 2)
    rvec = P - x
    d = np.maximum(np.hypot(rvec[:, 0], rvec[:, 1]), cfg.min_distance)
    u = rvec / d[:, None]
    k = cfg.f_c / C0
    vu = u @ v
    # per-leg gradients; a pair's gradient is the sum of its two legs
    g_tau = -u / C0
    g_fx = k * (-v[None, :] + vu[:, None] * u) / d[:, None]
    g_fv = k * u
    thetas = relative_angles(x[None, :], P)
    gam = sense_gains(plan, thetas)  # (a', s)
    bw, sl = ctx.bandwidth, ctx.slots
    r = freq_ratios(ctx.subbands, cfg)
    s1b, s2b = index_sums(bw)
    s1l, s2l = index_sums(sl)
    c_tt = 8 * np.pi**2 * cfg.delta_f**2 * s2b * sl
    c_ff = 8 * np.pi**2 * cfg.T_sym**2 * r**2 * bw * s2l
    c_tf = 8 * np.pi**2 * cfg.T_sym * cfg.delta_f * s1b * s1l
    e = cfg.radar_range_exponent
    lam = cfg.G_R * cfg.N_tx**2 * C0**2 * cfg.sigma_rcs / ((4 * np.pi) ** 3 * cfg.f_c**2)
    leg = d ** (-e)
    lam_pair = lam * leg[:, None] * leg[None, :]  # (a, a')
    W_tt = lam_pair * (gam @ c_tt)[None, :]
    W_ff = lam_pair * (gam @ c_ff)[None, :]
    W_tf = lam_pair * (gam @ c_tf)[None, :]
    inv_sig = 1.0 / np.asarray(sigma_ap, dtype=float)[ctx.aps]
    W_tt, W_ff, W_tf = (inv_sig[:, None] * W for W in (W_tt, W_ff, W_tf))
    Gt = g_tau[:, None, :] + g_tau[None, :, :]  # (a, a', 2)
    Gf = g_fx[:, None, :] + g_fx[None, :, :]
    Gv = g_fv[:, None, :] + g_fv[None, :, :]
    F_P = (np.einsum("ab,abi,abj->ij", W_tt, Gt, Gt) + np.einsum("ab,abi,abj->ij", W_ff, Gf, Gf)
           - np.einsum("ab,abi,abj->ij", W_tf, Gf, Gt) - np.einsum("ab,abi,abj->ij", W_tf, Gt, Gf))
    F_PV = np.einsum("ab,abi,abj->ij", W_ff, Gf, Gv) - np.einsum("ab,abi,abj->ij", W_tf, Gt, Gv)
    F_V = np.einsum("ab,abi,abj->ij", W_ff, Gv, Gv)
    F = np.block([[F_P, F_PV], [F_PV.T, F_V]])
    return 0.5 * (F + F.T)


def fim_total_reference(state, plan, ap_positions, sigma_ap, cfg) -> np.ndarray:
    """Loop-based assembly of the same FIM through ``fim_pair``; slower, used for cross-checks."""
    ctx = plan.ctx
    F = np.zeros((4, 4))
    target = TargetState.from_vector(state)
    P = np.asarray(ap_positions, dtype=float)
    r = freq_ratios(ctx.subbands, cfg)
    for j2, a2 in enumerate(ctx.aps):
        theta = float(relative_angles(target.x, P[a2]))
        gam = [sense_gain(j2, 0, s, plan, theta) for s in range(len(ctx.subbands))]
        for a in ctx.aps:
            lam = radar_fading(target.x, P[a], P[a2], cfg)
            w = waveform_weights(lam, gam, ctx.bandwidth, ctx.slots, r, cfg.delta_f, cfg.T_sym)
            dd = delay_doppler(target, P[a], P[a2], cfg.f_c)
            F += fim_pair(w, dd).matrix() / sigma_ap[a]
    return 0.5 * (F + F.T)


def measurement_information(F: np.ndarray) -> np.ndarray:
    """diag(F^-1)^-1, with directions carrying no information contributing zero.

    Works on a single 4x4 matrix or a stack of them.
    """
    F = np.asarray(F, dtype=float)
    F = 0.5 * (F + np.swapaxes(F, -1, -2))
    out = np.zeros_like(F)
    live = np.abs(F).max(axis=(-2, -1)) > 0
    if not np.any(live):
        return out
    cov = np.linalg.pinv(F[live], rcond=1e-12, hermitian=True)
    dg = np.diagonal(cov, axis1=-2, axis2=-1)
    info = np.where(dg > 0, 1.0 / np.where(dg > 0, dg, 1.0), 0.0)
    idx = np.arange(F.shape[-1])
    sub = np.zeros_like(F[live])
    sub[..., idx, idx] = info
    out[live] = sub
    return out


def bfim_update(J_prev: np.ndarray, F_meas: np.ndarray, T_bar: float, delta_q: float) -> np.ndarray:
    """Prior information propagated through the motion model plus the measurement term.

    Accepts single matrices or stacks with matching leading axes.
    """
    J_prev = np.asarray(J_prev, dtype=float)
    try:
        np.linalg.cholesky(J_prev)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("previous information matrix is not positive definite") from exc
    G = transition_matrix(T_bar)
    E = process_noise(delta_q, T_bar)
    pred = E + G @ np.linalg.solve(J_prev, np.broadcast_to(G.T, J_prev.shape))
    pred = 0.5 * (pred + np.swapaxes(pred, -1, -2))
    J = np.linalg.inv(pred) + measurement_information(F_meas)
    return 0.5 * (J + np.swapaxes(J, -1, -2))


def sensing_errors(J: np.ndarray):
    """Trace of the position and velocity blocks of J^-1 (arrays for stacked input)."""
    cov = np.linalg.inv(np.asarray(J, dtype=float))
    pos = cov[..., 0, 0] + cov[..., 1, 1]
    vel = cov[..., 2, 2] + cov[..., 3, 3]
    if np.ndim(pos) == 0:
        return float(pos), float(vel)
    return pos, vel


def predict_state(x_est, T_bar: float) -> np.ndarray:
    return transition_matrix(T_bar) @ np.asarray(x_est, dtype=float)


def draw_posterior(x_true, J: np.ndarray, rng) -> np.ndarray:
    """Estimate = truth + zero-mean Gaussian error with the diagonal of J^-1 as variances."""
    var = np.clip(np.diagonal(np.linalg.inv(J), axis1=-2, axis2=-1), 0.0, None)
    x = np.asarray(x_true, dtype=float)
    return x + np.sqrt(var) * rng.standard_normal(x.shape)

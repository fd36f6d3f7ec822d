"""Two-phase multi-agent environment for the elastic ISAC network.

One ``step`` is one frame. Agents act in protocol order: the per-cell classifiers
(LCP), the per-cell local beam/power agents (LPB), the central grouping agent (FG)
and the per-cluster federated beam/power agents (FPB). Each later role observes
what the earlier ones decided, so ``step`` accepts either a mapping of raw actions
or a callable ``policy(role, observations) -> actions`` that is queried stage by stage.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .accounting import FrameLedger, federated_overhead, normalize_comm, normalize_sense, phase1_overhead
from .channel import ChannelBook
from .comm_metrics import effective_rates, sinr_matrix
from .config import ScenarioConfig
from .kinematics import TargetState, advance_target, transition_matrix
from .scenario import Scenario, build_scenario, perturb_positions, rng_streams
from .sensing_metrics import bfim_update, draw_posterior, fim_total, initial_information, sensing_errors
from .topology import (
    BeamPowerPlan,
    Grouping,
    assemble_lcp,
    decode_beam_power,
    decode_fg,
    decode_lcp,
    federated_context,
    local_context,
    validate_topology,
)

ROLES = ("LCP", "LPB", "FG", "FPB")
ENV_STREAMS = ("perturb", "channel", "estimation", "federation", "motion", "posterior")


class InterfaceError(ValueError):
    pass


class CausalityError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentId:
    role: str
    index: int


@dataclass(frozen=True)
class ActionLayout:
    """Where each kind of component sits in a role's raw action vector."""
    length: int
    binary_idx: np.ndarray
    cont_idx: np.ndarray
    cat_idx: np.ndarray
    n_classes: int = 0  # classes per categorical component
    cat_offset: int = 1  # raw value = class index + offset


@dataclass
class StepResult:
    observations: dict
    reward: float
    diagnostics: dict
    done: bool


def slog(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.log10(1.0 + np.abs(x))


_TRIU = np.triu_indices(4)


def _layout_beam(n_aps: int, n_users: int, n_targets: int, delta_theta: int) -> ActionLayout:
    row = 2 * (n_users + n_targets)
    cont, cat = [], []
    for j in range(n_aps):
        base = j * row
        cont.extend(range(base, base + n_users + n_targets))
        cat.extend(range(base + n_users + n_targets, base + row))
    return ActionLayout(n_aps * row, np.zeros(0, int), np.array(cont), np.array(cat), delta_theta, 1)


class ElasticIsacEnv:
    def __init__(self, cfg: ScenarioConfig, base: Scenario | None = None):
        self.cfg = cfg
        self.base = base if base is not None else build_scenario(cfg)
        c = cfg
        self.layouts = {
            "LCP": ActionLayout(c.K + c.Q + c.A + 1, np.arange(c.K + c.Q), np.arange(c.K + c.Q, c.K + c.Q + c.A + 1),
                                np.zeros(0, int)),
            "LPB": _layout_beam(c.A, c.K, c.Q, c.delta_theta),
            "FG": ActionLayout(c.M, np.zeros(0, int), np.zeros(0, int), np.arange(c.M), c.R, 1),
            "FPB": _layout_beam(c.M * c.A, c.M * c.K, c.M * c.Q, c.delta_theta),
        }
        self.n_agents = {"LCP": c.M, "LPB": c.M, "FG": 1, "FPB": c.R}
        self._stage = None

    # sizes -------------------------------------------------------------------------------------
    def slot_length(self) -> int:
        c = self.cfg
        return c.K * (1 + c.A * (2 * c.N_tx + 1)) + c.Q * 21 + c.A + 1

    def obs_length(self, role: str) -> int:
        c = self.cfg
        lcp = 2 * c.K + 2 * c.A + c.A * c.K * (2 * c.N_tx + 1) + c.Q * 4 + c.Q * len(_TRIU[0])
        if role == "LCP":
            return lcp
        if role == "LPB":
            return lcp + self.layouts["LCP"].length
        if role == "FG":
            return c.M * self.slot_length()
        if role == "FPB":
            return c.M * self.slot_length() + c.M * c.R + c.M
        raise KeyError(role)

    # episode -----------------------------------------------------------------------------------
    def reset(self, seed) -> dict:
        c = self.cfg
        entropy = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
        self.rngs = rng_streams(entropy, ENV_STREAMS)
        self.scn = perturb_positions(self.base, self.rngs["perturb"])
        self.book = ChannelBook.create(self.scn.ap_positions, self.scn.user_positions, c.M, c.N_tx, c.f_c,
                                       c.kappa_bar, self.rngs["channel"], c.min_distance)
        self.targets = self.scn.target_states.copy()
        J0 = initial_information(c.sigma_p0, c.sigma_v0)
        nQ = c.M * c.Q
        self.J = np.repeat(J0[None], nQ, axis=0)
        sd = np.array([c.sigma_p0, c.sigma_p0, c.sigma_v0, c.sigma_v0])
        self.x_pred = self.targets + sd * self.rngs["posterior"].standard_normal((nQ, 4))
        self.n = 0
        self._begin_frame()
        return {"LCP": self.observe("LCP")}

    def _begin_frame(self) -> None:
        """Phase-I estimation: every cell's APs estimate their own users on the home subband."""
        c = self.cfg
        self.book.clear_estimates()
        rho = c.rho_ak if self.n > 0 else 0.0
        for m in range(c.M):
            self.book.estimate(self.scn.aps_of(m), self.scn.users_of(m), m, c.B * c.D_ce, rho=rho, p_ce=c.p_ce,
                               sigma_ap=self.scn.sigma_ap, rng=self.rngs["estimation"])
        self._stage = "LCP"
        self.partition = self.split = self.grouping = None
        self.lcp_raw: list[np.ndarray] = []
        self.plans_L: list[BeamPowerPlan] = []
        self.plans_F: list[BeamPowerPlan] = []
        self._cache: dict = {}

    @property
    def done(self) -> bool:
        return self.n >= self.cfg.N_T

    # observations ------------------------------------------------------------------------------
    def _target_features(self, q) -> np.ndarray:
        c = self.cfg
        x = self.x_pred[q]
        vmax = max(c.v_range[1], 1.0)
        return np.concatenate([x[..., :2] / c.area, x[..., 2:] / vmax], axis=-1)

    def _lcp_obs(self, m: int) -> np.ndarray:
        c = self.cfg
        aps, users, tg = self.scn.aps_of(m), self.scn.users_of(m), self.scn.targets_of(m)
        lam = self.book.lambda_C[np.ix_(aps, users)]
        h = self.book.h_hat[np.ix_(aps, users)][:, :, m, :] / np.sqrt(lam)[..., None]
        d = self.book.delta[np.ix_(aps, users)][:, :, m] / lam
        parts = [
            self.scn.user_positions[users].ravel() / c.area,
            self.scn.ap_positions[aps].ravel() / c.area,
            np.stack([h.real, h.imag], axis=-1).ravel(),
            d.ravel(),
            self._target_features(tg).ravel(),
            slog(self.J[tg][:, _TRIU[0], _TRIU[1]]).ravel(),
        ]
        return np.concatenate(parts)

    def _report_slot(self, m: int) -> np.ndarray:
        """What cell m's DPU forwards to the CPU; absent services are zero with a zero flag."""
        c = self.cfg
        aps, users, tg = self.scn.aps_of(m), self.scn.users_of(m), self.scn.targets_of(m)
        fed_u = np.isin(users, self.partition.fed_users[m])
        fed_q = np.isin(tg, self.partition.fed_targets[m])
        lam = self.book.lambda_C[np.ix_(aps, users)]
        h = self.book.h_hat[np.ix_(aps, users)][:, :, m, :] / np.sqrt(lam)[..., None]
        d = self.book.delta[np.ix_(aps, users)][:, :, m] / lam
        per_user = np.concatenate([h.real, h.imag, d[..., None]], axis=-1).transpose(1, 0, 2).reshape(c.K, -1)
        per_user = np.column_stack([fed_u.astype(float), per_user * fed_u[:, None]])
        per_tgt = np.column_stack([self._target_features(tg), slog(self.J[tg].reshape(c.Q, 16))])
        per_tgt = np.column_stack([fed_q.astype(float), per_tgt * fed_q[:, None]])
        res = np.concatenate([self.split.P_F[aps] / c.P_max, [self.split.B_F[m] / c.B]])
        return np.concatenate([per_user.ravel(), per_tgt.ravel(), res])

    def observe(self, role: str) -> list[np.ndarray]:
        c = self.cfg
        order = ROLES.index(role)
        if self._stage is None or order > ROLES.index(self._stage):
            raise CausalityError(f"{role} observation requested before its inputs exist (stage {self._stage})")
        if "lcp" not in self._cache:
            self._cache["lcp"] = [self._lcp_obs(m) for m in range(c.M)]
        lcp = self._cache["lcp"]
        if role == "LCP":
            return [o.copy() for o in lcp]
        if role == "LPB":
            return [np.concatenate([self._lcp_action_features(m), lcp[m]]) for m in range(c.M)]
        if "slots" not in self._cache:
            self._cache["slots"] = [self._report_slot(m) for m in range(c.M)]
        slots = self._cache["slots"]
        if role == "FG":
            return [np.concatenate(slots)]
        labels = np.zeros((c.M, c.R))
        for r, cells in enumerate(self.grouping.clusters):
            labels[cells, r] = 1.0
        out = []
        for r, cells in enumerate(self.grouping.clusters):
            mask = np.zeros(c.M)
            mask[cells] = 1.0
            masked = np.concatenate([s * w for s, w in zip(slots, mask)])
            out.append(np.concatenate([masked, labels.ravel(), mask]))
        return out

    def _lcp_action_features(self, m: int) -> np.ndarray:
        c = self.cfg
        raw = self.lcp_raw[m]
        bits = np.clip(np.rint(raw[: c.K + c.Q]), 0, 1)
        p = np.clip(raw[c.K + c.Q: c.K + c.Q + c.A], 0, c.P_max) / c.P_max
        return np.concatenate([bits, p, [self.split.B_L[m] / c.B]])

    def action_bounds(self, role: str, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Boxes of the continuous components of agent ``(role, i)`` in layout order."""
        c = self.cfg
        if role == "LCP":
            return np.zeros(c.A + 1), np.concatenate([np.full(c.A, c.P_max), [float(c.B)]])
        if role == "FG":
            return np.zeros(0), np.zeros(0)
        if role == "LPB":
            if self.split is None:
                raise CausalityError("LPB bounds depend on the LCP decision")
            caps = self.split.P_L[self.scn.aps_of(i)]
            n = c.K + c.Q
        elif role == "FPB":
            if self.grouping is None:
                raise CausalityError("FPB bounds depend on the FG decision")
            caps = self.split.P_F
            n = c.M * (c.K + c.Q)
        else:
            raise KeyError(role)
        hi = np.repeat(caps, n)
        return np.zeros_like(hi), hi

    # stages ------------------------------------------------------------------------------------
    def _check(self, role: str, acts) -> list[np.ndarray]:
        n = self.n_agents[role]
        if acts is None or len(acts) != n:
            raise InterfaceError(f"{role} expects {n} actions")
        L = self.layouts[role].length
        out = []
        for a in acts:
            a = np.asarray(a, dtype=float).ravel()
            if a.shape != (L,):
                raise InterfaceError(f"{role} action must have length {L}, got {a.shape}")
            out.append(a)
        return out

    def _apply(self, role: str, acts) -> None:
        if role != self._stage:
            raise CausalityError(f"expected {self._stage} actions, got {role}")
        c = self.cfg
        acts = self._check(role, acts)
        if role == "LCP":
            self.lcp_raw = acts
            self.partition, self.split = assemble_lcp([decode_lcp(a, m, c) for m, a in enumerate(acts)], c)
            self._stage = "LPB"
        elif role == "LPB":
            for m, a in enumerate(acts):
                ctx = local_context(m, self.partition, self.split, c)
                aps = self.scn.aps_of(m)
                self.plans_L.append(decode_beam_power(a, ctx, self.split.P_L[aps], self.book, c,
                                                      self.scn.users_of(m), self.scn.targets_of(m), aps))
            self._stage = "FG"
        elif role == "FG":
            self.grouping = decode_fg(acts[0], c.R, c.M_max)
            self._federated_estimation()
            self._stage = "FPB"
        else:
            all_u, all_q, all_a = np.arange(c.M * c.K), np.arange(c.M * c.Q), np.arange(c.M * c.A)
            for r, a in enumerate(acts):
                ctx = federated_context(r, self.partition, self.split, self.grouping, c)
                self.plans_F.append(decode_beam_power(a, ctx, self.split.P_F, self.book, c, all_u, all_q, all_a))
            self._stage = "DONE"

    def _federated_estimation(self) -> None:
        """Phase-II estimation of every cross-cell (AP, federated user, cluster subband) channel."""
        c = self.cfg
        rho = c.rho_ak if self.n > 0 else 0.0
        for cells in self.grouping.clusters:
            if len(cells) == 0:
                continue
            fed = np.concatenate([self.partition.fed_users[m] for m in cells]).astype(int)
            if fed.size == 0:
                continue
            aps = np.concatenate([self.scn.aps_of(m) for m in cells])
            for i in cells:
                for k in fed:
                    home = self.scn.cell_of_user(k)
                    todo = aps[~self.book.estimated[aps, k, i]]
                    if todo.size == 0:
                        continue
                    D = c.B * c.D_ce if i == home else int(self.split.B_F[i]) * c.D_ce
                    self.book.estimate(todo, [k], int(i), D, rho=rho, p_ce=c.p_ce, sigma_ap=self.scn.sigma_ap,
                                       rng=self.rngs["federation"])

    # frame -------------------------------------------------------------------------------------
    def step(self, actions: Mapping[str, list] | Callable) -> StepResult:
        if self.done:
            raise RuntimeError("episode finished; call reset")
        for role in ROLES:
            if callable(actions):
                acts = actions(role, self.observe(role))
            else:
                if role not in actions:
                    raise InterfaceError(f"missing {role} actions")
                acts = actions[role]
            self._apply(role, acts)
        diag = self._evaluate()
        self._advance()
        obs = {} if self.done else {"LCP": self.observe("LCP")}
        return StepResult(obs, diag["reward"], diag, self.done)

    def _evaluate(self) -> dict:
        c = self.cfg
        nK, nQ = c.M * c.K, c.M * c.Q
        rates = np.zeros(nK)
        fims = np.zeros((nQ, 4, 4))
        for plan in self.plans_L + self.plans_F:
            ctx = plan.ctx
            if len(ctx.users):
                sinr = sinr_matrix(plan, self.book, self.scn.sigma_user)
                rates[ctx.users] = effective_rates(sinr, ctx, c.M, c.B, c.L)
            for j, q in enumerate(ctx.targets):
                fims[q] = fim_total(self.targets[q], plan, self.scn.ap_positions, self.scn.sigma_ap, c)
        J_new = bfim_update(self.J, fims, c.T_bar, c.delta_q)
        pos, vel = sensing_errors(J_new)
        x_est = draw_posterior(self.targets, J_new, self.rngs["posterior"])
        self.J = J_new
        self.x_est = x_est
        self.last_decisions = (self.partition, self.split, self.grouping, self.plans_L + self.plans_F)

        ledger = FrameLedger()
        for m in range(c.M):
            o1, o2 = phase1_overhead(len(self.partition.fed_users[m]), len(self.partition.fed_targets[m]),
                                     c.A, c.K, c.N_tx)
            ledger.O1.append(o1)
            ledger.O2.append(o2)
        for cells in self.grouping.clusters:
            ledger.OF.append(federated_overhead([len(self.partition.fed_users[m]) for m in cells], c.A, c.N_tx))
        u_comm = normalize_comm(rates, c.U_k_C_min, c.U_k_C_max)
        u_sense = normalize_sense(pos, vel, (c.U_q_RP_min, c.U_q_RP_max), (c.U_q_RV_min, c.U_q_RV_max))
        ledger.comm_utility = float(np.sum(u_comm))
        ledger.sense_utility = float(np.sum(u_sense))
        ledger.close(c.o, c.O_bar_m)
        return {
            "frame": self.n,
            "rates": rates,
            "pos_err": pos,
            "vel_err": vel,
            "comm_utility": ledger.comm_utility,
            "sense_utility": ledger.sense_utility,
            "O1": list(ledger.O1),
            "O2": list(ledger.O2),
            "OF": list(ledger.OF),
            "U": ledger.U,
            "S": ledger.S,
            "USR": ledger.USR,
            "reward": ledger.reward,
            "B_L": self.split.B_L.copy(),
            "clusters": [cells.tolist() for cells in self.grouping.clusters],
            "n_federated": int(sum(len(u) for u in self.partition.fed_users)
                               + sum(len(q) for q in self.partition.fed_targets)),
        }

    def violations(self) -> list[str]:
        """Constraint check of the most recent frame's decisions (for diagnostics and tests)."""
        partition, split, grouping, plans = self.last_decisions
        return validate_topology(partition, split, grouping, plans, self.cfg)

    def _advance(self) -> None:
        c = self.cfg
        self.book.evolve(c.rho_ak, self.rngs["channel"])
        for q in range(len(self.targets)):
            nxt = advance_target(TargetState.from_vector(self.targets[q]), c.delta_q, c.T_bar, self.rngs["motion"])
            self.targets[q] = nxt.vector()
        self.x_pred = self.x_est @ transition_matrix(c.T_bar).T
        self.n += 1
        if not self.done:
            self._begin_frame()
        else:
            self._stage = None


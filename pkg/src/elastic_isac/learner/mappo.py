"""Multi-agent PPO with role-shared centralised critics, written against the numpy Mlp."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import TrainConfig
from .mlp import Mlp
from .policy import HeadSpec, Sample, evaluate, sample

log = logging.getLogger(__name__)

STD_FLOOR = 1e-8
LOG_STD_RANGE = (-5.0, 1.0)


def compute_gae(rewards, values, gamma: float, lam: float):
    """TD errors, advantages, role-standardised advantages and returns.

    ``rewards`` has shape (T,) and is shared; ``values`` has shape (n_agents, T).
    The value after the last frame is zero.
    """
    r = np.asarray(rewards, dtype=float)
    V = np.atleast_2d(np.asarray(values, dtype=float))
    V_next = np.concatenate([V[:, 1:], np.zeros((V.shape[0], 1))], axis=1)
    delta = r[None, :] + gamma * V_next - V
    adv = np.zeros_like(delta)
    acc = np.zeros(V.shape[0])
    for n in reversed(range(V.shape[1])):
        acc = delta[:, n] + gamma * lam * acc
        adv[:, n] = acc
    return delta, adv, standardize(adv), adv + V


def standardize(x: np.ndarray) -> np.ndarray:
    return (x - x.mean()) / max(float(x.std()), STD_FLOOR)


def smooth_l1(x):
    """Elementwise Huber loss with unit threshold and its derivative."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1.0
    return np.where(small, 0.5 * x**2, np.abs(x) - 0.5), np.where(small, x, np.sign(x))


def critic_loss(values, targets):
    """Mean smooth-L1 residual and its gradient w.r.t. ``values``."""
    loss, g = smooth_l1(np.asarray(values, dtype=float) - np.asarray(targets, dtype=float))
    n = loss.size
    return float(loss.mean()), g / n


def ppo_surrogate(logp_new, logp_old, adv, ent, clip_eps: float, ent_coef: float):
    """Clipped surrogate loss (to minimise) with gradients w.r.t. new log-probs and entropies."""
    ratio = np.exp(logp_new - logp_old)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * adv
    n = ratio.size
    loss = -float(np.mean(np.minimum(unclipped, clipped) + ent_coef * ent))
    active = unclipped <= clipped
    dlogp = -np.where(active, adv * ratio, 0.0) / n
    dent = np.full(n, -ent_coef / n)
    return loss, dlogp, dent, ratio


def linear_anneal(start: float, end: float, step: int, total: int) -> float:
    frac = min(max(step / max(total - 1, 1), 0.0), 1.0)
    return start + (end - start) * frac


class Adam:
    """Adaptive moment estimation over one flat parameter vector, updated in place."""

    def __init__(self, size: int, lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> bool:
        """Returns False (and changes nothing) if the gradient is non-finite."""
        if not np.all(np.isfinite(grad)):
            log.warning("non-finite gradient; update skipped")
            return False
        self.t += 1
        self.m *= self.b1
        self.m += (1 - self.b1) * grad
        self.v *= self.b2
        self.v += (1 - self.b2) * (grad * grad)
        denom = np.sqrt(self.v / (1 - self.b2**self.t))
        denom += self.eps
        params -= (self.lr / (1 - self.b1**self.t)) * self.m / denom
        return True


class Actor:
    def __init__(self, obs_dim: int, spec: HeadSpec, layers, rng, tc: TrainConfig):
        self.spec = spec
        self.mlp = Mlp((obs_dim, *layers, spec.out_dim), rng, tc.leaky_slope, out_scale=0.01,
                       extra={"log_std": spec.n_continuous})
        self.mlp.params["log_std"][...] = tc.init_log_std
        self.opt = Adam(self.mlp.flat.size, tc.lr, tc.adam_beta1, tc.adam_beta2, tc.adam_eps)

    @property
    def params(self) -> dict[str, np.ndarray]:
        return self.mlp.params

    def act(self, obs, rng, greedy: bool = False) -> tuple[Sample, np.ndarray]:
        out = self.mlp.forward(obs)
        s = sample(self.spec, out, self.params["log_std"], rng, greedy)
        logp, _ = evaluate(self.spec, out, self.params["log_std"], s)
        return s, logp

    def loss_grads(self, obs, s: Sample, logp_old, adv, clip_eps: float, ent_coef: float):
        out, cache = self.mlp.forward(obs, keep=True)
        ls = self.params["log_std"]
        logp, ent, dlp, den, dlp_ls, den_ls = evaluate(self.spec, out, ls, s, grad=True)
        loss, g_lp, g_en, ratio = ppo_surrogate(logp, logp_old, adv, ent, clip_eps, ent_coef)
        dout = g_lp[:, None] * dlp + g_en[:, None] * den
        grads = self.mlp.backward(dout, cache)
        grads["log_std"] = (g_lp[:, None] * dlp_ls + g_en[:, None] * den_ls).sum(axis=0)
        return loss, grads, float(ent.mean()), ratio


@dataclass
class RoleBatch:
    """One role's episode data; leading axes are (agent, frame)."""
    obs: list[np.ndarray]  # per agent (T, obs_dim)
    samples: list[Sample]  # per agent, arrays with leading T
    logp: np.ndarray  # (n_agents, T)
    critic_in: np.ndarray  # (n_agents, T, z_dim)


@dataclass
class RoleLearner:
    role: str
    actors: list[Actor]
    critic: Mlp
    critic_opt: Adam
    spec: HeadSpec
    obs_dim: int
    z_dim: int
    with_action: bool = True

    def critic_input(self, obs: np.ndarray, s: Sample, i: int) -> np.ndarray:
        n = len(self.actors)
        onehot = np.zeros((obs.shape[0], n))
        onehot[:, i] = 1.0
        parts = [obs, s.normalized(self.spec.n_classes)] if self.with_action else [obs]
        return np.concatenate(parts + [onehot], axis=1)

    def values(self, z: np.ndarray) -> np.ndarray:
        lead = z.shape[:-1]
        return self.critic.forward(z.reshape(-1, z.shape[-1]))[:, 0].reshape(lead)


@dataclass
class Mappo:
    tc: TrainConfig
    roles: dict[str, RoleLearner]
    total_updates: int = 1
    updates_done: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def build(cls, tc: TrainConfig, role_dims: dict[str, tuple[int, int, HeadSpec]], rng, total_updates: int = 1):
        """``role_dims`` maps role -> (n_agents, obs_dim, head spec)."""
        roles = {}
        for role, (n, obs_dim, spec) in role_dims.items():
            actors = [Actor(obs_dim, spec, tc.actor_layers, rng, tc) for _ in range(n)]
            act_dim = spec.n_binary + spec.n_categorical + spec.n_continuous if tc.critic_action else 0
            z_dim = obs_dim + act_dim + n
            critic = Mlp((z_dim, *tc.critic_layers, 1), rng, tc.leaky_slope)
            roles[role] = RoleLearner(role, actors, critic,
                                      Adam(critic.flat.size, tc.lr, tc.adam_beta1, tc.adam_beta2, tc.adam_eps),
                                      spec, obs_dim, z_dim, tc.critic_action)
        return cls(tc, roles, total_updates)

    def schedule(self) -> tuple[float, float]:
        tc = self.tc
        return (linear_anneal(tc.clip_start, tc.clip_end, self.updates_done, self.total_updates),
                linear_anneal(tc.entropy_start, tc.entropy_end, self.updates_done, self.total_updates))

    def step_size(self) -> float:
        tc = self.tc
        if tc.lr_end is None:
            return tc.lr
        return linear_anneal(tc.lr, tc.lr_end, self.updates_done, self.total_updates)

    def update(self, rewards, batches: dict[str, RoleBatch]) -> dict[str, float]:
        tc = self.tc
        clip_eps, ent_coef = self.schedule()
        lr = self.step_size()
        for rl in self.roles.values():
            rl.critic_opt.lr = lr
            for actor in rl.actors:
                actor.opt.lr = lr
        a_losses, c_losses, ents, ev = [], [], [], []
        for role, batch in batches.items():
            rl = self.roles[role]
            V = rl.values(batch.critic_in)
            _, _, adv_n, ret = compute_gae(rewards, V, tc.gamma, tc.gae_lambda)
            ev.append(explained_variance(V, ret))
            z = batch.critic_in.reshape(-1, rl.z_dim)
            target = ret.reshape(-1)
            for _ in range(tc.epochs):
                for i, actor in enumerate(rl.actors):
                    loss, grads, ent, _ = actor.loss_grads(batch.obs[i], batch.samples[i], batch.logp[i], adv_n[i],
                                                           clip_eps, ent_coef)
                    if actor.opt.step(actor.mlp.flat, actor.mlp.flatten(grads)):
                        np.clip(actor.params["log_std"], *LOG_STD_RANGE, out=actor.params["log_std"])
                    a_losses.append(loss)
                    ents.append(ent)
                out, cache = rl.critic.forward(z, keep=True)
                c_loss, g = critic_loss(out[:, 0], target)
                grads = rl.critic.backward(tc.value_coef * g[:, None], cache)
                rl.critic_opt.step(rl.critic.flat, rl.critic.flatten(grads))
                c_losses.append(c_loss)
        self.updates_done += 1
        stats = {
            "actor_loss": float(np.mean(a_losses)) if a_losses else 0.0,
            "critic_loss": float(np.mean(c_losses)) if c_losses else 0.0,
            "entropy": float(np.mean(ents)) if ents else 0.0,
            "explained_variance": float(np.mean(ev)) if ev else 0.0,
            "clip": clip_eps,
            "entropy_coef": ent_coef,
            "lr": lr,
        }
        return stats

    def named_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for role, rl in self.roles.items():
            for i, a in enumerate(rl.actors):
                for k, v in a.params.items():
                    out[f"{role}.actor{i}.{k}"] = v
            for k, v in rl.critic.params.items():
                out[f"{role}.critic.{k}"] = v
        return out


def explained_variance(pred, target) -> float:
    var = float(np.var(target))
    return 0.0 if var == 0 else 1.0 - float(np.var(np.asarray(target) - np.asarray(pred))) / var

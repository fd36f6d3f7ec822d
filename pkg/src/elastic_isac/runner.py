"""Episode rollouts and the training loop shared by the CLI and the experiment scripts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import FIXED_POLICIES, LIVE_ROLES
from .config import RunConfig
from .environment import ROLES, ElasticIsacEnv
from .learner.checkpoint import load_tensors, restore_into, save_tensors
from .learner.mappo import Mappo, RoleBatch
from .learner.policy import HeadSpec, Sample
from .scenario import rng_streams

METRIC_COLUMNS = ("episode", "usr", "total_utility", "comm_utility", "sense_utility", "overhead", "reward_mean",
                  "actor_loss", "critic_loss", "entropy", "wall_ms", "seed")


def head_spec(layout) -> HeadSpec:
    return HeadSpec(len(layout.binary_idx), len(layout.cat_idx), layout.n_classes, len(layout.cont_idx))


def assemble(layout, s: Sample, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    raw = np.zeros(layout.length)
    raw[layout.binary_idx] = s.bits[0]
    raw[layout.cat_idx] = s.cats[0] + layout.cat_offset
    raw[layout.cont_idx] = lo + s.fractions[0] * (hi - lo)
    return raw


@dataclass
class EpisodeRecord:
    episode: int
    frames: list[dict]
    stats: dict = field(default_factory=dict)

    def metrics(self, seed: int, wall_ms: float = 0.0) -> dict:
        f = self.frames
        return {
            "episode": self.episode,
            "usr": float(np.mean([d["USR"] for d in f])),
            "total_utility": float(np.mean([d["U"] for d in f])),
            "comm_utility": float(np.mean([d["comm_utility"] for d in f])),
            "sense_utility": float(np.mean([d["sense_utility"] for d in f])),
            "overhead": float(np.mean([d["S"] for d in f])),
            "reward_mean": float(np.mean([d["reward"] for d in f])),
            "actor_loss": self.stats.get("actor_loss", 0.0),
            "critic_loss": self.stats.get("critic_loss", 0.0),
            "entropy": self.stats.get("entropy", 0.0),
            "wall_ms": wall_ms,
            "seed": seed,
        }


class Runner:
    """Drives one scheme: learned roles come from MAPPO actors, the others from fixed policies."""

    def __init__(self, cfg: RunConfig, scheme: str = "proposed", seed: int = 0, total_updates: int = 1):
        if scheme not in LIVE_ROLES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.cfg = cfg
        self.scheme = scheme
        self.seed = int(seed)
        self.env = ElasticIsacEnv(cfg.scenario)
        self.live = LIVE_ROLES[scheme]
        streams = rng_streams([self.seed], ("init", "policy", "baseline"))
        self.policy_rng = streams["policy"]
        self.baseline_rng = streams["baseline"]
        dims = {r: (self.env.n_agents[r], self.env.obs_length(r), head_spec(self.env.layouts[r])) for r in self.live}
        self.learner = Mappo.build(cfg.train, dims, streams["init"], max(total_updates, 1)) if self.live else None
        self.fixed = FIXED_POLICIES.get(scheme)

    def _policy(self, greedy: bool, record: dict):
        env = self.env

        def act(role, obs):
            if role in self.live:
                rl = self.learner.roles[role]
                out = []
                for i, o in enumerate(obs):
                    s, logp = rl.actors[i].act(o, self.policy_rng, greedy)
                    lo, hi = env.action_bounds(role, i)
                    out.append(assemble(env.layouts[role], s, lo, hi))
                    record.setdefault(role, []).append((i, o, s, float(logp[0])))
                return out
            return self.fixed(env, role, obs, self.baseline_rng)

        return act

    def run_episode(self, episode: int, train: bool = True, greedy: bool = False) -> EpisodeRecord:
        env = self.env
        env.reset([self.seed, int(episode)])
        frames, rewards = [], []
        steps: list[dict] = []
        while not env.done:
            rec: dict = {}
            res = env.step(self._policy(greedy, rec))
            frames.append(res.diagnostics)
            rewards.append(res.reward)
            steps.append(rec)
        stats = {}
        if train and self.learner is not None:
            stats = self.learner.update(np.array(rewards), self._batches(steps))
        return EpisodeRecord(episode, frames, stats)

    def _batches(self, steps: list[dict]) -> dict[str, RoleBatch]:
        out = {}
        for role in self.live:
            rl = self.learner.roles[role]
            n = len(rl.actors)
            obs = [[] for _ in range(n)]
            smp = [[] for _ in range(n)]
            logp = np.zeros((n, len(steps)))
            for t, rec in enumerate(steps):
                for i, o, s, lp in rec[role]:
                    obs[i].append(o)
                    smp[i].append(s)
                    logp[i, t] = lp
            obs_a = [np.array(o) for o in obs]
            smp_a = [Sample(np.concatenate([s.bits for s in ss]), np.concatenate([s.cats for s in ss]),
                            np.concatenate([s.u for s in ss])) for ss in smp]
            z = np.stack([rl.critic_input(obs_a[i], smp_a[i], i) for i in range(n)])
            out[role] = RoleBatch(obs_a, smp_a, logp, z)
        return out

    # persistence -------------------------------------------------------------------------------
    def tensors(self) -> dict[str, np.ndarray]:
        return self.learner.named_tensors() if self.learner else {}

    def save(self, path) -> None:
        extra = {"scheme": self.scheme, "updates_done": self.learner.updates_done if self.learner else 0}
        save_tensors(path, self.tensors(), self.live, extra)

    def load(self, path) -> dict:
        header, loaded = load_tensors(path)
        restore_into(self.tensors(), loaded)
        if self.learner is not None:
            self.learner.updates_done = int(header.get("extra", {}).get("updates_done", 0))
        return header


def train(cfg: RunConfig, scheme: str, seed: int, episodes: int, callback=None) -> tuple[Runner, list[dict]]:
    runner = Runner(cfg, scheme, seed, total_updates=episodes)
    rows = []
    for ep in range(episodes):
        row = runner.run_episode(ep, train=True).metrics(seed)
        rows.append(row)
        if callback:
            callback(row)
    return runner, rows


def moving_average(x, window: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) < window:
        return np.array([x.mean()]) if len(x) else x
    c = np.cumsum(np.insert(x, 0, 0.0))
    return (c[window:] - c[:-window]) / window


__all__ = ["ROLES", "Runner", "train", "moving_average", "METRIC_COLUMNS", "EpisodeRecord"]

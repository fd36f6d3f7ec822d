"""Factorised stochastic policy heads over binary, categorical and bounded continuous components.

Continuous components are Gaussian in an unbounded latent ``u`` and squashed with a
sigmoid into [0, 1]; callers map that fraction onto the component's box. Log-probabilities
are of the squashed fraction, so they include the change-of-variables term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI_E = np.log(2 * np.pi * np.e)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def log_sigmoid(z):
    z = np.asarray(z, dtype=float)
    return -np.logaddexp(0.0, -z)


@dataclass(frozen=True)
class HeadSpec:
    n_binary: int = 0
    n_categorical: int = 0
    n_classes: int = 0
    n_continuous: int = 0

    @property
    def out_dim(self) -> int:
        return self.n_binary + self.n_categorical * self.n_classes + self.n_continuous

    def split(self, out: np.ndarray):
        """Views of (binary logits, categorical logits (.., n_cat, n_cls), continuous means)."""
        b = self.n_binary
        c = self.n_categorical * self.n_classes
        z = out[..., :b]
        logits = out[..., b:b + c].reshape(out.shape[:-1] + (self.n_categorical, self.n_classes))
        mu = out[..., b + c:]
        return z, logits, mu


@dataclass
class Sample:
    bits: np.ndarray  # (n, n_binary) 0/1
    cats: np.ndarray  # (n, n_categorical) class indices
    u: np.ndarray  # (n, n_continuous) pre-squash latent

    @property
    def fractions(self) -> np.ndarray:
        return sigmoid(self.u)

    def normalized(self, n_classes: int) -> np.ndarray:
        """Action features in [0, 1] for critic inputs."""
        cats = self.cats / max(n_classes - 1, 1)
        return np.concatenate([self.bits.astype(float), cats, self.fractions], axis=-1)


def _log_softmax(logits):
    if logits.size == 0:
        return logits.copy()
    m = logits.max(axis=-1, keepdims=True)
    s = logits - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def sample(spec: HeadSpec, out: np.ndarray, log_std: np.ndarray, rng, greedy: bool = False) -> Sample:
    out = np.atleast_2d(out)
    z, logits, mu = spec.split(out)
    n = out.shape[0]
    if greedy:
        bits = (z > 0).astype(int)
        cats = logits.argmax(axis=-1) if spec.n_categorical else np.zeros((n, 0), int)
        u = mu.copy()
    else:
        bits = (rng.random(z.shape) < sigmoid(z)).astype(int)
        if spec.n_categorical:
            p = np.exp(_log_softmax(logits))
            cdf = np.cumsum(p, axis=-1)
            draw = rng.random(cdf.shape[:-1] + (1,))
            cats = np.minimum((draw > cdf).sum(axis=-1), spec.n_classes - 1)
        else:
            cats = np.zeros((n, 0), int)
        u = mu + np.exp(log_std) * rng.standard_normal(mu.shape)
    return Sample(bits, cats, u)


def evaluate(spec: HeadSpec, out: np.ndarray, log_std: np.ndarray, s: Sample, grad: bool = False):
    """Per-row (log_prob, entropy); with ``grad`` also their gradients w.r.t. ``out`` and ``log_std``.

    Returns ``(logp, ent)`` or ``(logp, ent, dlogp_dout, dent_dout, dlogp_dlogstd, dent_dlogstd)``
    where the log_std gradients are per row.
    """
    out = np.atleast_2d(out)
    z, logits, mu = spec.split(out)
    bits = np.asarray(s.bits, dtype=float)
    if np.any((bits != 0) & (bits != 1)):
        raise FloatingPointError("binary action outside {0, 1}")
    if spec.n_categorical and (np.any(s.cats < 0) or np.any(s.cats >= spec.n_classes)):
        raise FloatingPointError("categorical action outside its support")
    u = np.asarray(s.u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("continuous latent must be finite")

    # binary
    lp_b = bits * log_sigmoid(z) + (1 - bits) * log_sigmoid(-z)
    pz = sigmoid(z)
    ent_b = -(pz * log_sigmoid(z) + (1 - pz) * log_sigmoid(-z))
    # categorical
    lsm = _log_softmax(logits)
    pi = np.exp(lsm)
    onehot = np.zeros_like(lsm)
    if spec.n_categorical:
        np.put_along_axis(onehot, s.cats[..., None], 1.0, axis=-1)
    lp_c = (onehot * lsm).sum(axis=-1)
    ent_c = -(pi * lsm).sum(axis=-1)
    # continuous, density of y = sigmoid(u)
    sd = np.exp(log_std)
    eps = (u - mu) / sd
    lp_g = -0.5 * eps**2 - log_std - 0.5 * np.log(2 * np.pi)
    log_jac = log_sigmoid(u) + log_sigmoid(-u)
    lp_u = lp_g - log_jac
    ent_u = np.broadcast_to(0.5 * LOG_2PI_E + log_std, mu.shape)

    logp = lp_b.sum(-1) + lp_c.sum(-1) + lp_u.sum(-1)
    ent = ent_b.sum(-1) + ent_c.sum(-1) + ent_u.sum(-1)
    if not grad:
        return logp, ent
    n = out.shape[0]
    dlogp = np.concatenate([bits - pz, (onehot - pi).reshape(n, -1), eps / sd], axis=-1)
    dent = np.concatenate([-z * pz * (1 - pz), (-pi * (lsm + ent_c[..., None])).reshape(n, -1),
                           np.zeros_like(mu)], axis=-1)
    dlogp_ls = eps**2 - 1.0
    dent_ls = np.ones_like(mu)
    return logp, ent, dlogp, dent, dlogp_ls, dent_ls

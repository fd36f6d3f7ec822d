"""Multilayer perceptron with layer normalisation and leaky rectifiers, with explicit backprop."""
from __future__ import annotations

import numpy as np

LN_EPS = 1e-5


class Mlp:
    """affine -> LayerNorm -> LeakyReLU for each hidden layer, then a linear output.

    Parameters live in ``self.params`` as a flat name -> array dict so optimisers and
    checkpoints can treat every network alike.
    """

    def __init__(self, sizes, rng=None, slope: float = 0.01, out_scale: float = 1.0, extra: dict | None = None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.slope = slope
        n_layers = len(self.sizes) - 1
        shapes: dict[str, tuple[int, ...]] = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            shapes[f"W{i}"] = (fan_in, fan_out)
            shapes[f"b{i}"] = (fan_out,)
            if i < n_layers - 1:
                shapes[f"g{i}"] = (fan_out,)
                shapes[f"beta{i}"] = (fan_out,)
        for name, n in (extra or {}).items():
            shapes[name] = (int(n),)
        # every tensor is a view into one flat buffer so optimisers see a single vector
        self.flat = np.zeros(sum(int(np.prod(sh)) for sh in shapes.values()))
        self.params: dict[str, np.ndarray] = {}
        pos = 0
        for name, sh in shapes.items():
            size = int(np.prod(sh))
            self.params[name] = self.flat[pos:pos + size].reshape(sh)
            pos += size
        for i, fan_in in enumerate(self.sizes[:-1]):
            if i < n_layers - 1:
                self.params[f"g{i}"][...] = 1.0
            if rng is not None:
                scale = np.sqrt(2.0 / fan_in) if i < n_layers - 1 else out_scale / np.sqrt(fan_in)
                self.params[f"W{i}"][...] = scale * rng.standard_normal(shapes[f"W{i}"])

    def flatten(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        """Gradient dict in the same layout as ``self.flat``."""
        return np.concatenate([grads[name].ravel() for name in self.params])

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x: np.ndarray, keep: bool = False):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input width {self.sizes[0]}, got {x.shape[1]}")
        cache = []
        h = x
        p = self.params
        for i in range(self.n_layers):
            a = h @ p[f"W{i}"] + p[f"b{i}"]
            if i == self.n_layers - 1:
                cache.append((h,))
                h = a
                break
            width = a.shape[1]
            cen = a - a.sum(axis=1, keepdims=True) / width
            inv = 1.0 / np.sqrt(np.einsum("ij,ij->i", cen, cen)[:, None] / width + LN_EPS)
            xhat = cen * inv
            y = p[f"g{i}"] * xhat + p[f"beta{i}"]
            out = np.where(y > 0, y, self.slope * y)
            cache.append((h, xhat, inv, y))
            h = out
        return (h, cache) if keep else h

    def backward(self, dout: np.ndarray, cache) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        p = self.params
        g = np.atleast_2d(dout)
        for i in reversed(range(self.n_layers)):
            if i == self.n_layers - 1:
                (h,) = cache[i]
                da = g
            else:
                h, xhat, inv, y = cache[i]
                dy = g * np.where(y > 0, 1.0, self.slope)
                grads[f"g{i}"] = np.sum(dy * xhat, axis=0)
                grads[f"beta{i}"] = np.sum(dy, axis=0)
                dxhat = dy * p[f"g{i}"]
                n = xhat.shape[1]
                da = inv / n * (n * dxhat - dxhat.sum(axis=1, keepdims=True)
                                - xhat * np.sum(dxhat * xhat, axis=1, keepdims=True))
            grads[f"W{i}"] = h.T @ da
            grads[f"b{i}"] = da.sum(axis=0)
            g = da @ p[f"W{i}"].T
        return grads

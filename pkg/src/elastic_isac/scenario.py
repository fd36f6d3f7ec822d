"""Node placement, index sets and named random streams."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .config import ScenarioConfig

STREAMS = ("scenario", "perturb", "channel", "motion", "posterior", "policy")


def rng_streams(seed, names: tuple[str, ...] = STREAMS) -> dict[str, np.random.Generator]:
    """Independent generators keyed by name; adding a name never shifts the others."""
    out = {}
    for name in names:
        key = int.from_bytes(name.encode(), "little") % (2**63)
        out[name] = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))
    return out


def cell_grid(M: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(M))
    return cols, math.ceil(M / cols)


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    ap_positions: np.ndarray  # (M*A, 2)
    user_positions: np.ndarray  # (M*K, 2)
    target_states: np.ndarray  # (M*Q, 4) as [x, y, vx, vy]
    sigma_ap: np.ndarray  # (M*A,)
    sigma_user: np.ndarray  # (M*K,)

    # contiguous index blocks per cell
    def aps_of(self, m: int) -> np.ndarray:
        A = self.config.A
        return np.arange(m * A, (m + 1) * A)

    def users_of(self, m: int) -> np.ndarray:
        K = self.config.K
        return np.arange(m * K, (m + 1) * K)

    def targets_of(self, m: int) -> np.ndarray:
        Q = self.config.Q
        return np.arange(m * Q, (m + 1) * Q)

    def cell_of_user(self, k: int) -> int:
        return int(k) // self.config.K

    def cell_of_target(self, q: int) -> int:
        return int(q) // self.config.Q

    def cell_of_ap(self, a: int) -> int:
        return int(a) // self.config.A

    def cell_bounds(self, m: int) -> tuple[float, float, float, float]:
        cols, rows = cell_grid(self.config.M)
        w, h = self.config.area / cols, self.config.area / rows
        c, r = m % cols, m // cols
        return c * w, r * h, (c + 1) * w, (r + 1) * h

    def to_bytes(self) -> bytes:
        header = json.dumps(asdict(self.config), sort_keys=True).encode()
        arrays = (self.ap_positions, self.user_positions, self.target_states, self.sigma_ap, self.sigma_user)
        body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
        return len(header).to_bytes(4, "little") + header + body


def _ap_grid(A: int) -> np.ndarray:
    cols = math.ceil(math.sqrt(A))
    rows = math.ceil(A / cols)
    pts = [((j % cols + 0.5) / cols, (j // cols + 0.5) / rows) for j in range(A)]
    return np.array(pts)


def build_scenario(config: ScenarioConfig, seed: int | None = None) -> Scenario:
    """Lay out APs on a per-cell grid and draw users and targets uniformly inside their cells."""
    config.validate()
    seed = config.rng_seed if seed is None else seed
    rng = rng_streams(seed, ("scenario",))["scenario"]
    M, A, K, Q = config.M, config.A, config.K, config.Q
    cols, rows = cell_grid(M)
    w, h = config.area / cols, config.area / rows
    unit_aps = _ap_grid(A)
    aps, users, targets = [], [], []
    for m in range(M):
        x0, y0 = (m % cols) * w, (m // cols) * h
        aps.append(np.column_stack([x0 + unit_aps[:, 0] * w, y0 + unit_aps[:, 1] * h]))
        users.append(np.column_stack([x0 + rng.uniform(0, w, K), y0 + rng.uniform(0, h, K)]))
        pos = np.column_stack([x0 + rng.uniform(0, w, Q), y0 + rng.uniform(0, h, Q)])
        heading = rng.uniform(0.0, 2 * np.pi, Q)
        speed = rng.uniform(config.v_range[0], config.v_range[1], Q)
        targets.append(np.column_stack([pos, speed * np.cos(heading), speed * np.sin(heading)]))
    sigma = config.noise_power
    return Scenario(
        config=config,
        ap_positions=np.vstack(aps),
        user_positions=np.vstack(users),
        target_states=np.vstack(targets),
        sigma_ap=np.full(M * A, sigma),
        sigma_user=np.full(M * K, sigma),
    )


def perturb_positions(scenario: Scenario, rng) -> Scenario:
    """Offset every node by up to 1% of the area per axis, clamped to the area."""
    area = scenario.config.area
    bound = 0.01 * area

    def shift(pts: np.ndarray) -> np.ndarray:
        off = np.asarray(rng.uniform(-bound, bound, size=pts.shape), dtype=float)
        return np.clip(pts + off, 0.0, area)

    targets = scenario.target_states.copy()
    targets[:, :2] = shift(targets[:, :2])
    return replace(
        scenario,
        ap_positions=shift(scenario.ap_positions),
        user_positions=shift(scenario.user_positions),
        target_states=targets,
    )

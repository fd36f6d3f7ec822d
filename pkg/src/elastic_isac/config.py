"""Configuration dataclasses and the TOML config loader."""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

C0 = 3.0e8


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class ScenarioConfig:
    # network dimensions
    M: int = 4
    R: int = 2
    A: int = 3
    K: int = 4
    Q: int = 4
    N_tx: int = 4
    B: int = 16
    L: int = 100
    N_T: int = 20
    # radio
    delta_f: float = 156.25e3
    f_c: float = 5.89e9
    T_sym: float | None = None  # default 1/delta_f
    T_bar: float | None = None  # default L*T_sym
    P_max: float = dbm_to_watt(40.0)
    p_ce: float = dbm_to_watt(25.0)
    D_ce: int = 1
    M_max: int = 2
    rho_ak: float = 0.98
    kappa_bar: float = 4.0
    delta_q: float = 100.0
    sigma_rcs: float = 1.0
    G_R: float = 1.0
    N0: float = dbm_to_watt(-174.0)
    area: float = 600.0
    v_range: tuple[float, float] = (20.0, 80.0)
    # signaling overhead normalisation, defaults 8M(A-1)N_tx*K and 0.7*o
    o: float | None = None
    O_bar_m: float | None = None
    # utility bounds
    U_k_C_min: float = 0.05
    U_k_C_max: float = 0.35
    U_q_RP_min: float = 5e-5
    U_q_RP_max: float = 2.0
    U_q_RV_min: float = 5e-5
    U_q_RV_max: float = 2.0
    rng_seed: int = 0
    # beam grid levels
    delta_theta: int = 8
    # frame-0 belief standard deviations
    sigma_p0: float = 10.0
    sigma_v0: float = 5.0
    # distance exponent per AP leg in the round-trip fading coefficient
    radar_range_exponent: float = 2.0
    # path-loss distances are floored here
    min_distance: float = 1.0

    def __post_init__(self) -> None:
        if isinstance(self.v_range, list):
            object.__setattr__(self, "v_range", tuple(self.v_range))
        if self.T_sym is None:
            object.__setattr__(self, "T_sym", 1.0 / self.delta_f)
        if self.T_bar is None:
            object.__setattr__(self, "T_bar", self.L * self.T_sym)
        if self.o is None:
            object.__setattr__(self, "o", float(8 * self.M * (self.A - 1) * self.N_tx * self.K))
        if self.O_bar_m is None:
            object.__setattr__(self, "O_bar_m", 0.7 * self.o)
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, what: str) -> None:
            if not cond:
                raise ConfigError(f"invalid config: {what}")

        for name in ("M", "R", "A", "K", "Q", "N_tx", "B", "L", "N_T", "D_ce", "delta_theta"):
            need(isinstance(getattr(self, name), int) and getattr(self, name) >= 1, f"{name} must be a positive integer")
        need(1 <= self.R <= self.M, "1 <= R <= M")
        need(1 <= self.M_max <= self.M, "1 <= M_max <= M")
        need(self.R * self.M_max >= self.M, "R * M_max >= M (a feasible grouping must exist)")
        need(self.D_ce * self.K < self.L, "D_ce * K < L")
        for name in ("delta_f", "f_c", "T_sym", "T_bar", "P_max", "p_ce", "N0", "area", "o", "O_bar_m",
                     "sigma_rcs", "G_R", "sigma_p0", "sigma_v0", "min_distance"):
            need(getattr(self, name) > 0 and math.isfinite(getattr(self, name)), f"{name} must be positive")
        need(0.0 <= self.rho_ak <= 1.0, "0 <= rho_ak <= 1")
        need(self.kappa_bar >= 0.0, "kappa_bar >= 0")
        need(self.delta_q >= 0.0, "delta_q >= 0")
        need(len(self.v_range) == 2 and 0 <= self.v_range[0] <= self.v_range[1], "0 <= v_range[0] <= v_range[1]")
        need(self.U_k_C_max > self.U_k_C_min, "U_k_C_max > U_k_C_min")
        need(self.U_q_RP_max > self.U_q_RP_min > 0, "U_q_RP_max > U_q_RP_min > 0")
        need(self.U_q_RV_max > self.U_q_RV_min > 0, "U_q_RV_max > U_q_RV_min > 0")
        need(self.radar_range_exponent > 0, "radar_range_exponent > 0")

    @property
    def noise_power(self) -> float:
        """Per-subcarrier noise power N0 * delta_f (W)."""
        return self.N0 * self.delta_f


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.9
    gae_lambda: float = 0.96
    clip_start: float = 0.3
    clip_end: float = 0.15
    entropy_start: float = 1e-3
    entropy_end: float = 1e-4
    value_coef: float = 0.5
    lr: float = 5e-5
    actor_layers: tuple[int, ...] = (256, 256, 256, 256)
    critic_layers: tuple[int, ...] = (512, 512, 512)
    epochs: int = 4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    leaky_slope: float = 0.01
    init_log_std: float = -0.5
    # own action as a critic feature; off turns the critic into a state-value baseline
    critic_action: bool = True
    # final Adam step size for a linear decay over the run; None keeps lr fixed
    lr_end: float | None = None

    def __post_init__(self) -> None:
        for name in ("actor_layers", "critic_layers"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError("invalid config: 0 <= gamma < 1")
        if not (0.0 <= self.gae_lambda <= 1.0):
            raise ConfigError("invalid config: 0 <= gae_lambda <= 1")
        if self.epochs < 1 or self.lr <= 0:
            raise ConfigError("invalid config: epochs >= 1 and lr > 0")
        if self.lr_end is not None and not (0.0 <= self.lr_end <= self.lr):
            raise ConfigError("invalid config: 0 <= lr_end <= lr")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


def _build(cls, values: Mapping[str, Any], where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")
    return cls(**dict(values))


def config_from_mapping(data: Mapping[str, Any]) -> RunConfig:
    data = dict(data)
    train = data.pop("train", {})
    if not isinstance(train, Mapping):
        raise ConfigError("[train] must be a table")
    return RunConfig(scenario=_build(ScenarioConfig, data, "scenario"), train=_build(TrainConfig, train, "train"))


def load_config(path: str | Path) -> RunConfig:
    """Read a TOML config: scenario keys at top level, learner keys under ``[train]``."""
    with open(path, "rb") as fh:
        return config_from_mapping(tomllib.load(fh))


def desk_config(**overrides: Any) -> ScenarioConfig:
    """Small two-cell layout used for the desk-scale experiments."""
    base = dict(M=2, R=2, A=2, K=2, Q=2, M_max=2, N_T=20)
    base.update(overrides)
    return ScenarioConfig(**base)


_DERIVED = ("T_sym", "T_bar", "o", "O_bar_m")


def with_overrides(cfg: ScenarioConfig, **kw: Any) -> ScenarioConfig:
    """Copy ``cfg`` with ``kw`` applied; derived fields not given are recomputed."""
    for name in _DERIVED:
        kw.setdefault(name, None)
    return replace(cfg, **kw)

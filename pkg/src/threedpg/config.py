"""Run configuration: dataclasses plus a YAML key/value tree on disk.

Example file::

    name: exp1-3dpg
    mode: centralized          # centralized | networked
    algo: 3dpg                 # 3dpg | maddpg
    epochs: 300
    seeds: [0, 1, 2, 3, 4]
    env: {variant: coord, num_agents: 2, num_landmarks: 3, horizon: 25}
    hyper:
      gamma: 0.9
      minibatch: 128
      replay_size: 20000
      tau_soft: 0.01
      schedules: {base: e-6, scale: 1.0, horizon: 1000}
      ou: {theta: 0.15, sigma: 0.2, dt: 1.0, sigma_decay: 1.0}
      actor_hidden: [64, 8]
      critic_hidden: [128, 32]
      param_norm_ceiling: 1.0e6
    network:                   # required for networked mode
      lambda: exp(-2)          # number, exp(x), or a list per agent
      budget_bits: 15000
      tuples_per_cycle: 33
      force_paper_ratios: false
      quantize_wire: true
"""

from __future__ import annotations

import dataclasses
import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .env import EnvConfig
from .errors import ConfigurationError
from .learner import Algo
from .netsim import NetworkConfig
from .schedules import StepSizes


class Mode(str, enum.Enum):
    CENTRALIZED = "centralized"
    NETWORKED = "networked"


@dataclass(frozen=True)
class OuConfig:
    theta: float = 0.15
    sigma: float = 0.2
    dt: float = 1.0
    sigma_decay: float = 1.0    # per-epoch multiplier; 1.0 keeps exploration constant


@dataclass(frozen=True)
class ScheduleConfig:
    base: Any = "e-6"
    scale: float = 1.0
    horizon: float = 1000.0

    def step_sizes(self) -> StepSizes:
        return StepSizes.from_config(self.base, self.horizon, self.scale)


@dataclass(frozen=True)
class HyperConfig:
    gamma: float = 0.9
    minibatch: int = 128
    replay_size: int = 20000
    tau_soft: float = 0.01
    schedules: ScheduleConfig = field(default_factory=ScheduleConfig)
    ou: OuConfig = field(default_factory=OuConfig)
    actor_hidden: tuple[int, ...] = (64, 8)
    critic_hidden: tuple[int, ...] = (128, 32)
    param_norm_ceiling: float = 1e6

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if self.minibatch < 1 or self.replay_size < 1:
            raise ConfigurationError("minibatch and replay_size must be >= 1")
        if not 0.0 < self.tau_soft <= 1.0:
            raise ConfigurationError("tau_soft must lie in (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    hyper: HyperConfig = field(default_factory=HyperConfig)
    network: NetworkConfig | None = None
    epochs: int = 300
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    mode: Mode = Mode.CENTRALIZED
    algo: Algo = Algo.THREE_DPG
    diagnostics: bool = False
    name: str = "run"

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "algo", Algo(self.algo))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.mode is Mode.NETWORKED and self.network is None:
            raise ConfigurationError("networked mode requires a network block")
        if self.mode is Mode.NETWORKED and self.algo is Algo.MADDPG:
            raise ConfigurationError("MADDPG is only supported with centralized training")

    def with_(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_EXP = re.compile(r"^\s*exp\(\s*([-+]?[0-9.eE+-]+)\s*\)\s*$")


def parse_probability(value) -> float:
    if isinstance(value, str):
        match = _EXP.match(value)
        if not match:
            raise ConfigurationError(f"cannot parse probability {value!r}; use a number or exp(x)")
        return math.exp(float(match.group(1)))
    return float(value)


def _build(cls, data: dict | None, **nested):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    for key, sub in nested.items():
        if key in data:
            data[key] = _build(sub, data[key])
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    env = _build(EnvConfig, data.pop("env", None))
    hyper_raw = dict(data.pop("hyper", None) or {})
    for key in ("actor_hidden", "critic_hidden"):
        if key in hyper_raw:
            hyper_raw[key] = tuple(int(w) for w in hyper_raw[key])
    hyper = _build(HyperConfig, hyper_raw, schedules=ScheduleConfig, ou=OuConfig)
    network = None
    net_raw = data.pop("network", None)
    if net_raw is not None:
        net_raw = dict(net_raw)
        if "lambda" in net_raw:
            lam = net_raw.pop("lambda")
            net_raw["access_prob"] = (tuple(parse_probability(v) for v in lam)
                                      if isinstance(lam, (list, tuple)) else parse_probability(lam))
        network = _build(NetworkConfig, net_raw)
    if "mode" not in data:
        data["mode"] = Mode.NETWORKED if network is not None else Mode.CENTRALIZED
    unknown = set(data) - {f.name for f in dataclasses.fields(RunConfig)}
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    return RunConfig(env=env, hyper=hyper, network=network, **data)


def config_to_dict(config: RunConfig) -> dict:
    def plain(value):
        if dataclasses.is_dataclass(value):
            return {f.name: plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
        if isinstance(value, enum.Enum):
            return value.value
        if isinstance(value, (tuple, list)):
            return [plain(v) for v in value]
        return value

    out = plain(config)
    if out.get("network") is not None:
        net = out["network"]
        net["lambda"] = net.pop("access_prob")
    return out


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(yaml.safe_load(fh) or {})


def dump_config(config: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(config), sort_keys=True), encoding="utf-8")


DESK_HYPER = HyperConfig(
    tau_soft=0.05,
    schedules=ScheduleConfig(scale=100.0, horizon=1e5),
    ou=OuConfig(sigma=0.4),
)


def desk_profile(**overrides) -> RunConfig:
    """300 epochs, 5 seeds, critic (128, 32).

    Plain SGD at the default step sizes barely moves the networks within
    7500 steps, so the desk profile uses near-constant steps of about 0.25
    (critic) and 0.5 (actor), wider exploration and faster target tracking.
    """
    base = dict(hyper=DESK_HYPER)
    base.update(overrides)
    return RunConfig(**base)


def paper_profile(**overrides) -> RunConfig:
    """1500 epochs, 10 seeds, critic (1024, 64)."""
    base = dict(epochs=1500, seeds=tuple(range(10)), hyper=HyperConfig(critic_hidden=(1024, 64)))
    base.update(overrides)
    return RunConfig(**base)

"""Experiment configuration.

Line-oriented ``key = value`` text with sections (INI), parsed by the
standard library.  Every section maps onto one parameter dataclass; keys not
declared by the target dataclass (and sections not listed here) are
rejected, so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace

from .agents import AgentConfig
from .dynamics import ControllerGains, VehicleParams
from .env import EnvParams, RewardWeights
from .options import OptionParams
from .road import default_road
from .safety import SafetyParams
from .traffic import IdmParams, MobilParams, RuleParams
from .training import TrainConfig


class ConfigError(Exception):
    """Unknown section/key or an uncoercible value."""


@dataclass(frozen=True)
class RoadConfig:
    lane_count: int = 3
    lane_width: float = 3.5
    straight_length: float = 500.0
    arc_radius: float = 400.0


@dataclass(frozen=True)
class EnvFlat:
    """The scalar fields of EnvParams (nested groups get their own section)."""

    v_limit: float = 130.0 / 3.6
    dt: float = 0.1
    horizon: int = 5000
    density: float = 10.0
    d_max: float = 150.0
    t_pred: float = 1.0
    mobil_period: int = 5
    traffic_mix: float = 0.5


@dataclass(frozen=True)
class ExperimentSection:
    agent: str = "single"


_SECTIONS = {
    "experiment": ExperimentSection,
    "road": RoadConfig,
    "env": EnvFlat,
    "reward": RewardWeights,
    "vehicle": VehicleParams,
    "gains": ControllerGains,
    "safety": SafetyParams,
    "options": OptionParams,
    "idm": IdmParams,
    "mobil": MobilParams,
    "rule": RuleParams,
    "agent": AgentConfig,
    "train": TrainConfig,
}

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _coerce(raw: str, default, where: str):
    raw = raw.strip()
    if isinstance(default, bool):
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ConfigError(f"{where}: {raw!r} is not a boolean")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: {raw!r} is not an integer")
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: {raw!r} is not a number")
    if isinstance(default, tuple):
        elem = default[0] if default else 0
        parts = [p for p in raw.split(",") if p.strip()]
        return tuple(_coerce(p, elem, where) for p in parts)
    return raw


@dataclass(frozen=True)
class ExperimentConfig:
    agent: str = "single"
    env: EnvParams = EnvParams()
    agent_cfg: AgentConfig = AgentConfig()
    train: TrainConfig = TrainConfig()

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}")
    parsed: dict[str, object] = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(
                f"unknown section [{section}]; expected one of "
                f"{sorted(_SECTIONS)}")
        cls = _SECTIONS[section]
        defaults = cls()
        names = {f.name for f in fields(cls)}
        values = {}
        for key, raw in cp.items(section):
            if key not in names:
                raise ConfigError(
                    f"unknown key {key!r} in [{section}]; expected one of "
                    f"{sorted(names)}")
            values[key] = _coerce(raw, getattr(defaults, key),
                                  f"[{section}] {key}")
        parsed[section] = replace(defaults, **values)
    return _assemble(parsed)


def _get(parsed: dict, name: str):
    return parsed.get(name, _SECTIONS[name]())


def _assemble(parsed: dict) -> ExperimentConfig:
    road_cfg: RoadConfig = _get(parsed, "road")
    flat: EnvFlat = _get(parsed, "env")
    env = EnvParams(
        road=default_road(road_cfg.lane_count, road_cfg.lane_width,
                          road_cfg.straight_length, road_cfg.arc_radius),
        vehicle=_get(parsed, "vehicle"),
        gains=_get(parsed, "gains"),
        safety=_get(parsed, "safety"),
        options=_get(parsed, "options"),
        idm=_get(parsed, "idm"),
        mobil=_get(parsed, "mobil"),
        rule=_get(parsed, "rule"),
        reward=_get(parsed, "reward"),
        v_limit=flat.v_limit, dt=flat.dt, horizon=flat.horizon,
        density=flat.density, d_max=flat.d_max, t_pred=flat.t_pred,
        mobil_period=flat.mobil_period, traffic_mix=flat.traffic_mix)
    return ExperimentConfig(agent=_get(parsed, "experiment").agent,
                            env=env,
                            agent_cfg=_get(parsed, "agent"),
                            train=_get(parsed, "train"))


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

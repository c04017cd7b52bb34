"""Configuration and design schemas with YAML round-tripping.

Every field defaults to the Argonaut descent parameters; unknown keys are
rejected with the full list of offending paths.
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dynamics import EngineModel
from .moon import MoonConstants, theta_from_downrange

MOON_RADIUS = MoonConstants().r_moon


class ConfigError(ValueError):
    def __init__(self, message: str, keys=()):
        super().__init__(message)
        self.keys = list(keys)


@dataclass(frozen=True)
class Gates:
    """Mission parameters and waypoint constraints."""

    peri_alt: float = 30_000.0
    apo_alt: float = 100_000.0
    m0: float = 7000.0
    pitch_rate_max_deg: float = 5.0
    pitch_up_target_deg: float = 80.0
    lga_altitude: float = 500.0
    lga_min_pitch_deg: float = 80.0
    lga_max_speed: float = 30.0
    hda1_max_divert: float = 100.0
    hda2_altitude: float = 150.0
    hda2_max_divert: float = 20.0
    vga_altitude: float = 30.0
    vertical_pitch_deg: float = 90.0
    vertical_speed: float = 2.0


@dataclass(frozen=True)
class DeConfig:
    population: int = 40
    weight: float = 0.7
    crossover: float = 0.9
    generations: int = 300
    seed: int = 0
    # half-widths of the search box around the seed design
    box_r: float = 200.0
    box_theta_deg: float = 0.02
    box_v_r: float = 15.0
    box_v_theta: float = 15.0
    box_dt: float = 15.0
    penalty_weight: float = 1e3
    failure_penalty: float = 1e5

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be at least 4")
        if not 0.0 < self.weight <= 2.0:
            raise ValueError("weight F must lie in (0, 2]")
        if not 0.0 <= self.crossover <= 1.0:
            raise ValueError("crossover CR must lie in [0, 1]")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")

    @property
    def half_widths(self) -> tuple[float, float, float, float, float]:
        return (self.box_r, math.radians(self.box_theta_deg), self.box_v_r, self.box_v_theta, self.box_dt)


@dataclass(frozen=True)
class ClosedLoopConfig:
    gnc_period: float = 1.0
    freeze_time: float = 10.0


def _default_scenarios() -> dict[str, list[float]]:
    return {
        "N": [0.0, 0.0],
        "F": [-100.0, 0.0],
        "FF": [-100.0, -20.0],
        "FB": [-100.0, 20.0],
        "B": [100.0, 0.0],
        "BF": [100.0, -20.0],
        "BB": [100.0, 20.0],
    }


@dataclass(frozen=True)
class MissionConfig:
    moon: MoonConstants = field(default_factory=MoonConstants)
    engine: EngineModel = field(default_factory=EngineModel)
    gates: Gates = field(default_factory=Gates)
    de: DeConfig = field(default_factory=DeConfig)
    closed_loop: ClosedLoopConfig = field(default_factory=ClosedLoopConfig)
    step: float = 0.1
    scenarios: dict[str, list[float]] = field(default_factory=_default_scenarios)

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        for code, shifts in self.scenarios.items():
            if len(shifts) != 2:
                raise ValueError(f"scenario {code} needs [hda1, hda2] shifts")


@dataclass(frozen=True)
class MissionDesign:
    """The five trajectory design parameters plus divert times of flight.

    ``dt_powered`` runs from the end of the pitch-up slew to the vertical
    gate. ``dt_div`` maps a scenario code to ``[tf_hda1, tf_hda2]``; a
    ``None`` entry keeps the remaining time of the plan being flown.
    """

    pga_r: float = MOON_RADIUS + 898.3
    pga_theta: float = theta_from_downrange(622.9)
    pga_v_r: float = -40.3
    pga_v_theta: float = 39.1
    dt_powered: float = 43.0
    dt_div: dict[str, list[float | None]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt_powered > 0.0:
            raise ValueError("dt_powered must be positive")

    def vector(self) -> list[float]:
        return [self.pga_r, self.pga_theta, self.pga_v_r, self.pga_v_theta, self.dt_powered]

    @classmethod
    def from_vector(cls, x, dt_div=None) -> "MissionDesign":
        return cls(*(float(v) for v in x), dt_div=dict(dt_div or {}))

    def divert_times(self, code: str) -> tuple[float | None, float | None]:
        tfs = self.dt_div.get(code) or [None, None]
        return tfs[0], tfs[1]


def _hints(cls):
    return typing.get_type_hints(cls)


def _from_dict(cls, data, path, bad):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        bad.append(f"{path or '<root>'} (expected a mapping)")
        return None
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            bad.append(f"{path}.{key}" if path else str(key))
    hints = _hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        tp = hints[f.name]
        sub = f"{path}.{f.name}" if path else f.name
        if dataclasses.is_dataclass(tp):
            value = _from_dict(tp, value, sub, bad)
        elif tp in (float, int):
            try:
                value = tp(value)
            except (TypeError, ValueError):
                bad.append(f"{sub} (expected {tp.__name__})")
                continue
        elif isinstance(value, dict):
            value = {str(k): (list(v) if isinstance(v, (list, tuple)) else v) for k, v in value.items()}
        kwargs[f.name] = value
    if bad:
        return None
    return cls(**kwargs)


def _load(cls, data):
    bad: list[str] = []
    try:
        obj = _from_dict(cls, data, "", bad)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc
    if bad:
        raise ConfigError("unknown or malformed keys: " + ", ".join(bad), bad)
    return obj


def to_dict(obj) -> dict:
    return dataclasses.asdict(obj)


def config_from_dict(data: dict) -> MissionConfig:
    return _load(MissionConfig, data)


def design_from_dict(data: dict) -> MissionDesign:
    return _load(MissionDesign, data)


def _read_yaml(path) -> dict:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return data or {}


def load_config(path) -> MissionConfig:
    return config_from_dict(_read_yaml(path))


def load_design(path) -> MissionDesign:
    return design_from_dict(_read_yaml(path))


def dump_yaml(obj) -> str:
    return yaml.safe_dump(to_dict(obj), sort_keys=False, default_flow_style=None)


def save_yaml(obj, path) -> None:
    Path(path).write_text(dump_yaml(obj))

"""Randomized dilemma-zone encounters and signal phase timing.

Initial speed is drawn uniformly; the vehicle is placed so that traveling
at constant speed for the drawn remaining-green time puts it exactly at
the option-zone start (x = 5.5 * v0) at yellow onset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from enum import Enum

from .kinematics import KinematicLimits, VehicleState, T_FAR_S
from .rng import Xoshiro256


class ConfigError(ValueError):
    pass


class Phase(Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


@dataclass(frozen=True)
class SignalTiming:
    green_remaining_s: float
    yellow_s: float = 3.5
    all_red_s: float = 2.0

    def __post_init__(self):
        if self.green_remaining_s < 0 or self.yellow_s <= 0 or self.all_red_s < 0:
            raise ConfigError(f"invalid signal timing: {self}")

    @property
    def yellow_onset_s(self) -> float:
        return self.green_remaining_s

    @property
    def red_onset_s(self) -> float:
        return self.green_remaining_s + self.yellow_s


@dataclass(frozen=True)
class ScenarioConfig:
    """Draw ranges and physics settings; loadable from a JSON file."""
    v_lo_mps: float = 11.111111111111111   # 40 km/h
    v_hi_mps: float = 27.77777777777778    # 100 km/h
    green_lo_s: float = 2.0
    green_hi_s: float = 5.0
    yellow_s: float = 3.5
    all_red_s: float = 2.0
    dt_s: float = 0.02
    a_max: float = 3.0
    b_max: float = 3.0
    t_far_s: float = T_FAR_S

    def __post_init__(self):
        if not (0 < self.v_lo_mps <= self.v_hi_mps):
            raise ConfigError(f"speed range invalid: [{self.v_lo_mps}, {self.v_hi_mps}]")
        if not (0 <= self.green_lo_s <= self.green_hi_s):
            raise ConfigError(f"green range invalid: [{self.green_lo_s}, {self.green_hi_s}]")
        if self.dt_s <= 0:
            raise ConfigError(f"dt must be positive: {self.dt_s}")

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            raw = json.load(fh)
        known = {k: v for k, v in raw.items() if k in cls.__dataclass_fields__}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown scenario config keys: {sorted(unknown)}")
        return cls(**known)

    def limits(self) -> KinematicLimits:
        return KinematicLimits(a_max=self.a_max, b_max=self.b_max)


@dataclass(frozen=True)
class Scenario:
    seed: int
    initial: VehicleState
    timing: SignalTiming
    limits: KinematicLimits
    dt_s: float = 0.02

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "initial": asdict(self.initial),
            "timing": asdict(self.timing),
            "limits": asdict(self.limits),
            "dt_s": self.dt_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            seed=d["seed"],
            initial=VehicleState(**d["initial"]),
            timing=SignalTiming(**d["timing"]),
            limits=KinematicLimits(**d["limits"]),
            dt_s=d["dt_s"],
        )


def generate_scenario(seed: int, config: ScenarioConfig = ScenarioConfig()) -> Scenario:
    """Deterministic scenario draw: v0 then remaining green, in that order."""
    rng = Xoshiro256(seed)
    v0 = rng.uniform(config.v_lo_mps, config.v_hi_mps)
    green = rng.uniform(config.green_lo_s, config.green_hi_s)
    x0 = config.t_far_s * v0 + v0 * green
    return Scenario(
        seed=seed,
        initial=VehicleState(position_m=x0, speed_mps=v0, accel_mps2=0.0, t_s=0.0),
        timing=SignalTiming(green_remaining_s=green, yellow_s=config.yellow_s,
                            all_red_s=config.all_red_s),
        limits=config.limits(),
        dt_s=config.dt_s,
    )


def phase_at(timing: SignalTiming, t: float) -> Phase:
    """Phase at time t; boundaries belong to the later phase; red holds forever."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if t < timing.yellow_onset_s:
        return Phase.GREEN
    if t < timing.red_onset_s:
        return Phase.YELLOW
    return Phase.RED

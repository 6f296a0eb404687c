"""Closed-form longitudinal kinematics for a signalized approach.

Positions are measured in meters upstream of the stop-line (positive =
before the line, negative = past it).  Deceleration limits are stored as
positive magnitudes; the stop/go context supplies the sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

T_FAR_S = 5.5   # constant-speed travel time to the line at the zone start
T_NEAR_S = 2.5  # ... at the zone end

DEFAULT_A_MAX = 3.0  # m/s^2
DEFAULT_B_MAX = 3.0  # m/s^2, magnitude

# positions within this of the line are "at" it; an exact-stop at the line
# lands a few 1e-13 m past zero from float rounding and must not count as
# a crossing
POSITION_EPS_M = 1e-9


@dataclass(frozen=True)
class KinematicLimits:
    a_max: float = DEFAULT_A_MAX
    b_max: float = DEFAULT_B_MAX
    comfort_decel: float = 2.0  # exposed knob; not used by zone classification

    def __post_init__(self):
        if self.a_max <= 0 or self.b_max <= 0:
            raise ValueError("acceleration limits must be positive magnitudes")


@dataclass
class VehicleState:
    position_m: float   # meters upstream of the stop-line
    speed_mps: float    # >= 0
    accel_mps2: float
    t_s: float


class ZoneClass(Enum):
    BEFORE_ZONE = "before_zone"
    TYPE_II = "type_ii"
    PAST_ZONE = "past_zone"
    TYPE_I = "type_i"
    CLEAR = "clear"


def time_to_stop(v0: float, limits: KinematicLimits) -> float:
    """Seconds to reach standstill from v0 at maximum braking."""
    if v0 < 0:
        raise ValueError(f"speed must be non-negative, got {v0}")
    return v0 / limits.b_max


def stop_distance(v0: float, limits: KinematicLimits) -> float:
    """Meters traveled while braking from v0 to standstill at b_max."""
    if v0 < 0:
        raise ValueError(f"speed must be non-negative, got {v0}")
    return v0 * v0 / (2.0 * limits.b_max)


def time_to_clear(x: float, v0: float, limits: KinematicLimits) -> float:
    """Seconds to cover x meters starting at v0 under maximum acceleration.

    Positive root of x = v0*t + a*t^2/2, evaluated as 2x/(v0 + sqrt(...))
    to stay accurate when a*x is small relative to v0^2.
    """
    if x < 0:
        raise ValueError(f"distance must be non-negative, got {x}")
    if x == 0.0:
        return 0.0
    a = limits.a_max
    disc = v0 * v0 + 2.0 * a * x
    denom = v0 + math.sqrt(disc)
    if denom <= 0.0:
        raise ValueError("stop-line unreachable: zero speed and acceleration")
    return 2.0 * x / denom


def dz_bounds(v0: float, t_far: float = T_FAR_S, t_near: float = T_NEAR_S) -> tuple[float, float]:
    """Option-zone bounds (x_start, x_end) under the constant-speed travel-time definition."""
    if v0 < 0:
        raise ValueError(f"speed must be non-negative, got {v0}")
    if t_far <= t_near or t_near <= 0:
        raise ValueError(f"need t_far > t_near > 0, got ({t_far}, {t_near})")
    return t_far * v0, t_near * v0


def classify_zone(
    state: VehicleState,
    yellow_remaining_s: float,
    limits: KinematicLimits,
    t_far: float = T_FAR_S,
    t_near: float = T_NEAR_S,
) -> ZoneClass:
    """Zone class for a (state, signal) query.

    A vehicle that can neither stop before the line at b_max nor clear it
    within the remaining yellow is trapped (TYPE_I); that test takes
    precedence over option-zone band membership.
    """
    if yellow_remaining_s < 0:
        raise ValueError("yellow_remaining must be non-negative")
    x = state.position_m
    v = state.speed_mps
    if x <= 0:
        return ZoneClass.CLEAR
    cannot_stop = stop_distance(v, limits) > x
    cannot_clear = time_to_clear(x, v, limits) > yellow_remaining_s
    if cannot_stop and cannot_clear:
        return ZoneClass.TYPE_I
    x_start, x_end = dz_bounds(v, t_far, t_near)
    if x_end <= x <= x_start:
        return ZoneClass.TYPE_II
    if x > x_start:
        return ZoneClass.BEFORE_ZONE
    return ZoneClass.PAST_ZONE


def crossing_time(prev: VehicleState, nxt: VehicleState) -> float:
    """Exact time the stop-line is crossed inside a tick (constant accel).

    prev must be before the line (position > 0) and nxt at/past it.
    """
    x, v, a = prev.position_m, prev.speed_mps, nxt.accel_mps2
    if abs(a) < 1e-12:
        tau = x / v if v > 0 else 0.0
    else:
        disc = v * v + 2.0 * a * x
        tau = 2.0 * x / (v + math.sqrt(max(disc, 0.0)))
    return prev.t_s + tau


def step(state: VehicleState, accel_cmd: float, dt: float, limits: KinematicLimits) -> VehicleState:
    """Advance one tick under constant acceleration, exactly.

    Speed clamps at zero; if braking reaches standstill inside the tick the
    traveled distance uses the exact sub-interval (v^2 / 2|a|) instead of a
    truncated Euler update, which matters near standstill at 50 Hz.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    a = min(max(accel_cmd, -limits.b_max), limits.a_max)
    v = state.speed_mps
    v_next = v + a * dt
    if v_next < 0.0:
        # stops at tau = v/|a| inside the tick
        dist = v * v / (2.0 * -a) if a < 0 else 0.0
        v_next = 0.0
    else:
        dist = v * dt + 0.5 * a * dt * dt
    return VehicleState(
        position_m=state.position_m - dist,
        speed_mps=v_next,
        accel_mps2=a,
        t_s=state.t_s + dt,
    )

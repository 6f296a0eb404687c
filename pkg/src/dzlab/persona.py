"""Synthetic drivers and 50 Hz episode rollouts.

A persona tracks its desired speed through green, reacts to the yellow
after a drawn reaction time, commits once to stop or go via a logistic
draw on the feasibility margin, then executes the commitment: graded
braking aimed at the stop-line, or acceleration through it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from importlib import resources
from typing import Optional

from .kinematics import (POSITION_EPS_M, KinematicLimits, VehicleState,
                         crossing_time, step, time_to_clear)
from .rng import Xoshiro256, derive_seed
from .scenario import Phase, Scenario, ScenarioConfig, generate_scenario, phase_at

REACTION_MIN_S = 0.2
REACTION_MAX_S = 2.0
POST_CROSS_RUNOUT_S = 2.0
SPEED_TRACK_GAIN = 0.3  # 1/s, proportional tracking toward desired speed

STOP, GO = "stop", "go"


@dataclass(frozen=True)
class PersonaProfile:
    name: str
    desired_speed_mps: float
    reaction_mean_s: float
    reaction_sd_s: float
    go_bias: float
    decision_gain: float       # 1/s, logistic slope on the time margin
    comfort_decel_mps2: float
    go_accel_mps2: float

    def __post_init__(self):
        if self.reaction_mean_s <= 0:
            raise ValueError("reaction_mean_s must be positive")
        if self.decision_gain <= 0:
            raise ValueError("decision_gain must be positive")
        if self.comfort_decel_mps2 <= 0:
            raise ValueError("comfort_decel_mps2 must be positive")


@dataclass
class Episode:
    driver_id: str
    scenario: Scenario
    # rows: (t_s, position_m, speed_mps, accel_mps2, phase)
    samples: list
    decision: Optional[str]          # "stop" | "go" | None (undecided human run)
    decision_t_s: Optional[float]
    ran_red: bool
    crossed_line_t_s: Optional[float]

    def decision_index(self) -> Optional[int]:
        """Index of the first sample at/after the decision commitment."""
        if self.decision_t_s is None:
            return None
        for i, row in enumerate(self.samples):
            if row[0] >= self.decision_t_s - 1e-12:
                return i
        return None

    def to_dict(self) -> dict:
        return {
            "driver_id": self.driver_id,
            "scenario": self.scenario.to_dict(),
            "samples": [[t, x, v, a, ph] for (t, x, v, a, ph) in self.samples],
            "decision": self.decision,
            "decision_t_s": self.decision_t_s,
            "ran_red": self.ran_red,
            "crossed_line_t_s": self.crossed_line_t_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Episode":
        return cls(
            driver_id=d["driver_id"],
            scenario=Scenario.from_dict(d["scenario"]),
            samples=[tuple(row) for row in d["samples"]],
            decision=d["decision"],
            decision_t_s=d["decision_t_s"],
            ran_red=d["ran_red"],
            crossed_line_t_s=d["crossed_line_t_s"],
        )


def compute_ran_red(decision: Optional[str], crossed_line_t_s: Optional[float],
                    final_position_m: float, red_onset_s: float) -> bool:
    """Red-run rule shared by synthetic rollouts and live sessions.

    Crossing the line at/after red onset is a violation; so is a stop
    whose standstill position ends past the line (bumper over the line at
    red onset counts even if the vehicle never clears the intersection).
    """
    if crossed_line_t_s is not None and crossed_line_t_s >= red_onset_s:
        return True
    if decision == STOP and final_position_m < -POSITION_EPS_M:
        return True
    return False


def sample_reaction(profile: PersonaProfile, rng: Xoshiro256) -> float:
    """Reaction delay draw: log-normal by (mean, sd), truncated to [0.2, 2.0] s."""
    mean, sd = profile.reaction_mean_s, profile.reaction_sd_s
    if sd <= 0:
        return min(max(mean, REACTION_MIN_S), REACTION_MAX_S)
    sigma2 = math.log(1.0 + (sd * sd) / (mean * mean))
    mu = math.log(mean) - 0.5 * sigma2
    sigma = math.sqrt(sigma2)
    for _ in range(100):
        draw = math.exp(rng.normal(mu, sigma))
        if REACTION_MIN_S <= draw <= REACTION_MAX_S:
            return draw
    return min(max(mean, REACTION_MIN_S), REACTION_MAX_S)


def go_probability(profile: PersonaProfile, state: VehicleState,
                   yellow_remaining_s: float, limits: KinematicLimits) -> float:
    """P(go) from the feasibility margin: remaining yellow minus the
    max-acceleration time to reach the line (Eq.-2-style refined estimate)."""
    x = max(state.position_m, 0.0)
    margin = max(yellow_remaining_s, 0.0) - time_to_clear(x, state.speed_mps, limits)
    z = profile.decision_gain * margin + profile.go_bias
    return 1.0 / (1.0 + math.exp(-z))


def decide(profile: PersonaProfile, state_at_reaction: VehicleState,
           yellow_remaining_s: float, limits: KinematicLimits, rng: Xoshiro256) -> str:
    p_go = go_probability(profile, state_at_reaction, yellow_remaining_s, limits)
    return GO if rng.bernoulli(p_go) else STOP


def _tracking_accel(profile: PersonaProfile, v: float) -> float:
    a = SPEED_TRACK_GAIN * (profile.desired_speed_mps - v)
    return min(max(a, -profile.comfort_decel_mps2), profile.go_accel_mps2)


def rollout(profile: PersonaProfile, scenario: Scenario, rng: Xoshiro256,
            max_duration_s: float = 120.0) -> Episode:
    """Roll one full episode at the scenario tick rate.

    Behavior: track desired speed until the reaction delay after yellow
    onset elapses, commit once, then execute.  A stop targets standstill
    exactly at the line with deceleration clamped to
    [comfort_decel, b_max]; if even b_max cannot stop in time the vehicle
    brakes at b_max and the overrun is recorded by the outcome flags.
    """
    timing, limits, dt = scenario.timing, scenario.limits, scenario.dt_s
    reaction = sample_reaction(profile, rng)
    decision_t = timing.yellow_onset_s + reaction

    state = scenario.initial
    samples = [(state.t_s, state.position_m, state.speed_mps, state.accel_mps2,
                phase_at(timing, state.t_s).value)]
    decision: Optional[str] = None
    stop_decel = 0.0
    crossed_t: Optional[float] = None
    cross_deadline: Optional[float] = None

    while state.t_s < max_duration_s:
        if decision is None and state.t_s >= decision_t - 1e-12:
            yellow_remaining = timing.red_onset_s - state.t_s
            decision = decide(profile, state, yellow_remaining, limits, rng)
            if decision == STOP:
                x, v = state.position_m, state.speed_mps
                if x <= 0.0 or v <= 0.0:
                    stop_decel = limits.b_max
                else:
                    required = v * v / (2.0 * x)
                    stop_decel = min(max(required, profile.comfort_decel_mps2), limits.b_max)

        if decision == STOP:
            accel_cmd = -stop_decel
        elif decision == GO:
            accel_cmd = profile.go_accel_mps2
        else:
            accel_cmd = _tracking_accel(profile, state.speed_mps)

        nxt = step(state, accel_cmd, dt, limits)
        if (crossed_t is None and state.position_m > POSITION_EPS_M
                and nxt.position_m <= -POSITION_EPS_M):
            crossed_t = crossing_time(state, nxt)
            cross_deadline = crossed_t + POST_CROSS_RUNOUT_S
        state = nxt
        samples.append((state.t_s, state.position_m, state.speed_mps, state.accel_mps2,
                        phase_at(timing, state.t_s).value))

        if decision is not None and state.speed_mps == 0.0:
            break
        if cross_deadline is not None and state.t_s >= cross_deadline:
            break

    ran_red = compute_ran_red(decision, crossed_t, state.position_m, timing.red_onset_s)
    return Episode(
        driver_id=profile.name,
        scenario=scenario,
        samples=samples,
        decision=decision,
        decision_t_s=decision_t,
        ran_red=ran_red,
        crossed_line_t_s=crossed_t,
    )


def rollout_fleet(profiles: list[PersonaProfile], episodes_per_driver: int, base_seed: int,
                  config: ScenarioConfig = ScenarioConfig()) -> dict[str, list[Episode]]:
    """Seeded batch of rollouts, keyed by driver; deterministic for a base seed."""
    fleet: dict[str, list[Episode]] = {}
    for p_idx, profile in enumerate(profiles):
        eps = []
        for e_idx in range(episodes_per_driver):
            scen_seed = derive_seed(base_seed, p_idx, e_idx, 0)
            rng = Xoshiro256(derive_seed(base_seed, p_idx, e_idx, 1))
            eps.append(rollout(profile, generate_scenario(scen_seed, config), rng))
        fleet[profile.name] = eps
    return fleet


def empirical_pof_go(profile: PersonaProfile, n_episodes: int, base_seed: int,
                     config: ScenarioConfig = ScenarioConfig()) -> float:
    gos = 0
    for e_idx in range(n_episodes):
        scen_seed = derive_seed(base_seed, 0, e_idx, 0)
        rng = Xoshiro256(derive_seed(base_seed, 0, e_idx, 1))
        ep = rollout(profile, generate_scenario(scen_seed, config), rng)
        gos += ep.decision == GO
    return gos / n_episodes


def calibrate_go_bias(profile: PersonaProfile, target_pof_go: float, n_episodes: int = 400,
                      base_seed: int = 20240, lo: float = -14.0, hi: float = 14.0,
                      iterations: int = 26,
                      config: ScenarioConfig = ScenarioConfig()) -> tuple[float, float]:
    """Bisection on go_bias against simulated PofGo (monotone in the bias).

    Returns (calibrated_bias, achieved_pof_go).  This is how the shipped
    persona fixtures were produced; see the sweep CLI subcommand.
    """
    def achieved(bias: float) -> float:
        probe = PersonaProfile(**{**asdict(profile), "go_bias": bias})
        return empirical_pof_go(probe, n_episodes, base_seed, config)

    f_lo, f_hi = achieved(lo), achieved(hi)
    if not (f_lo <= target_pof_go <= f_hi):
        raise ValueError(
            f"target {target_pof_go} outside achievable range [{f_lo:.3f}, {f_hi:.3f}]")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if achieved(mid) < target_pof_go:
            lo = mid
        else:
            hi = mid
    bias = 0.5 * (lo + hi)
    return bias, achieved(bias)


def load_personas(path=None) -> list[PersonaProfile]:
    """Persona fixtures from JSON; defaults to the four shipped profiles."""
    if path is None:
        text = resources.files("dzlab").joinpath("fixtures/personas.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = json.loads(text)
    return [PersonaProfile(**entry) for entry in raw["personas"]]


def save_personas(profiles: list[PersonaProfile], path, note: str = "") -> None:
    payload = {"note": note, "personas": [asdict(p) for p in profiles]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")

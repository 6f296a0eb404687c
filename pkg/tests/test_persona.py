import math

import pytest

from dzlab.kinematics import VehicleState, time_to_clear
from dzlab.persona import (GO, STOP, PersonaProfile, compute_ran_red, decide,
                           empirical_pof_go, go_probability, load_personas,
                           rollout, rollout_fleet, sample_reaction)
from dzlab.rng import Xoshiro256
from dzlab.scenario import ScenarioConfig, generate_scenario


def profile(**overrides):
    base = dict(name="test", desired_speed_mps=20.0, reaction_mean_s=0.8,
                reaction_sd_s=0.2, go_bias=0.0, decision_gain=2.0,
                comfort_decel_mps2=1.5, go_accel_mps2=2.8)
    base.update(overrides)
    return PersonaProfile(**base)


class TestSampleReaction:
    def test_degenerate_sd_returns_mean(self):
        assert sample_reaction(profile(reaction_sd_s=0.0), Xoshiro256(1)) == 0.8

    def test_draws_bounded(self):
        rng = Xoshiro256(2)
        p = profile(reaction_mean_s=0.8, reaction_sd_s=0.6)
        for _ in range(2000):
            assert 0.2 <= sample_reaction(p, rng) <= 2.0

    def test_monte_carlo_mean(self):
        rng = Xoshiro256(3)
        p = profile(reaction_mean_s=0.8, reaction_sd_s=0.2)
        draws = [sample_reaction(p, rng) for _ in range(10000)]
        assert abs(sum(draws) / len(draws) - 0.8) < 0.05


class TestDecide:
    def state(self, x, v):
        return VehicleState(position_m=x, speed_mps=v, accel_mps2=0.0, t_s=0.0)

    def test_huge_margin_goes(self):
        p = profile(go_bias=0.0, decision_gain=2.0)
        assert go_probability(p, self.state(5.0, 20.0), 1e6, generate_scenario(0).limits) > 0.999999

    def test_midpoint_probability(self):
        limits = generate_scenario(0).limits
        p = profile(go_bias=0.0, decision_gain=2.0)
        v, yellow = 15.0, 2.0
        # choose x so time_to_clear == yellow_remaining -> margin 0
        x = v * yellow + 0.5 * limits.a_max * yellow * yellow
        assert go_probability(p, self.state(x, v), yellow, limits) == pytest.approx(0.5, abs=1e-12)

    def test_bernoulli_seeded(self):
        limits = generate_scenario(0).limits
        p = profile()
        a = decide(p, self.state(60.0, 15.0), 3.0, limits, Xoshiro256(5))
        b = decide(p, self.state(60.0, 15.0), 3.0, limits, Xoshiro256(5))
        assert a == b and a in (STOP, GO)


class TestRollout:
    def test_tracking_fixpoint_through_green(self):
        cfg = ScenarioConfig(v_lo_mps=20.0, v_hi_mps=20.0, green_lo_s=5.0, green_hi_s=5.0)
        scenario = generate_scenario(11, cfg)
        ep = rollout(profile(desired_speed_mps=20.0), scenario, Xoshiro256(4))
        onset = scenario.timing.yellow_onset_s
        green_speeds = [v for (t, x, v, a, ph) in ep.samples if t <= onset]
        assert all(abs(v - 20.0) < 0.01 for v in green_speeds)

    def test_stop_execution_reaches_line(self):
        # feasible stop: commit near x=60 at 15 m/s -> required decel ~1.875 <= b_max
        cfg = ScenarioConfig(v_lo_mps=15.0, v_hi_mps=15.0, green_lo_s=2.0, green_hi_s=2.0)
        scenario = generate_scenario(21, cfg)
        p = profile(desired_speed_mps=15.0, go_bias=-50.0, reaction_sd_s=0.0,
                    reaction_mean_s=1.5, comfort_decel_mps2=1.0)
        ep = rollout(p, scenario, Xoshiro256(9))
        assert ep.decision == STOP
        final_x = ep.samples[-1][1]
        assert ep.samples[-1][2] == 0.0
        assert -1e-9 <= final_x <= 0.5
        assert not ep.ran_red

    def test_infeasible_stop_records_overrun(self):
        # commit so late that even b_max cannot stop before the line
        cfg = ScenarioConfig(v_lo_mps=25.0, v_hi_mps=25.0, green_lo_s=2.0,
                             green_hi_s=2.0, yellow_s=3.5)
        scenario = generate_scenario(33, cfg)
        p = profile(desired_speed_mps=25.0, go_bias=-50.0, reaction_sd_s=0.0,
                    reaction_mean_s=2.0)
        ep = rollout(p, scenario, Xoshiro256(2))
        assert ep.decision == STOP
        assert ep.samples[-1][1] < 0.0
        assert ep.ran_red  # standstill past the line counts as a violation

    def test_go_with_short_yellow_runs_red(self):
        cfg = ScenarioConfig(v_lo_mps=18.0, v_hi_mps=18.0, green_lo_s=2.0,
                             green_hi_s=2.0, yellow_s=1.0)
        scenario = generate_scenario(13, cfg)
        p = profile(desired_speed_mps=18.0, go_bias=50.0, reaction_sd_s=0.0)
        ep = rollout(p, scenario, Xoshiro256(8))
        assert ep.decision == GO
        assert ep.crossed_line_t_s is not None
        assert ep.crossed_line_t_s >= scenario.timing.red_onset_s
        assert ep.ran_red

    def test_single_decision_at_onset_plus_reaction(self):
        scenario = generate_scenario(17, ScenarioConfig())
        p = profile(reaction_sd_s=0.0, reaction_mean_s=0.9)
        ep = rollout(p, scenario, Xoshiro256(6))
        assert ep.decision in (STOP, GO)
        assert ep.decision_t_s == pytest.approx(scenario.timing.yellow_onset_s + 0.9)
        # exactly one accel regime change after the commit tick
        idx = ep.decision_index()
        assert ep.samples[idx][0] >= ep.decision_t_s - 1e-12

    def test_fleet_bit_reproducible(self):
        profiles = load_personas()
        a = rollout_fleet(profiles, 5, base_seed=77)
        b = rollout_fleet(profiles, 5, base_seed=77)
        for name in a:
            for ea, eb in zip(a[name], b[name]):
                assert ea.samples == eb.samples
                assert ea.decision == eb.decision
                assert ea.ran_red == eb.ran_red

    def test_feasible_stops_never_cross(self):
        profiles = load_personas()
        fleet = rollout_fleet(profiles, 40, base_seed=123)
        checked = 0
        for eps in fleet.values():
            for ep in eps:
                if ep.decision != STOP:
                    continue
                idx = ep.decision_index()
                t, x, v, _, _ = ep.samples[idx]
                if x > 0 and v * v / (2.0 * x) <= ep.scenario.limits.b_max:
                    checked += 1
                    assert ep.samples[-1][1] >= -1e-9
                    assert ep.crossed_line_t_s is None
        assert checked > 10


class TestRanRedRule:
    def test_crossing_after_red(self):
        assert compute_ran_red(GO, crossed_line_t_s=8.0, final_position_m=-30.0,
                               red_onset_s=7.5)

    def test_crossing_during_yellow_ok(self):
        assert not compute_ran_red(GO, crossed_line_t_s=7.0, final_position_m=-30.0,
                                   red_onset_s=7.5)

    def test_stop_overrun_counts(self):
        assert compute_ran_red(STOP, crossed_line_t_s=6.0, final_position_m=-1.5,
                               red_onset_s=7.5)

    def test_clean_stop(self):
        assert not compute_ran_red(STOP, crossed_line_t_s=None, final_position_m=2.0,
                                   red_onset_s=7.5)


class TestFixtures:
    def test_shipped_personas_load(self):
        profiles = load_personas()
        assert len(profiles) == 4
        names = {p.name for p in profiles}
        assert names == {"aggressive", "steady", "cautious", "moderate"}

    def test_pof_go_heterogeneity(self):
        # quick 60-episode probe of the calibrated spread
        values = [empirical_pof_go(p, 60, base_seed=515) for p in load_personas()]
        assert max(values) - min(values) >= 0.40

    def test_invalid_profile_rejected(self):
        with pytest.raises(ValueError):
            profile(reaction_mean_s=0.0)
        with pytest.raises(ValueError):
            profile(decision_gain=-1.0)

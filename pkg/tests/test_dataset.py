import json
import math

import numpy as np
import pytest

from dzlab.dataset import (DatasetMeta, JsonlParseError, PersonalStats, Sample,
                           WindowError, apply_norm, build_dataset,
                           compute_personal_stats, export_episodes_csv,
                           extract_window, read_episodes_jsonl, read_jsonl,
                           split_episodes, write_episodes_jsonl, write_jsonl)
from dzlab.persona import GO, STOP, Episode, load_personas, rollout_fleet
from dzlab.rng import Xoshiro256
from dzlab.scenario import Scenario, ScenarioConfig, generate_scenario


def make_episode(driver="d1", decision=GO, reaction=0.8, v0=16.0, ran_red=False,
                 seed=5, n_extra_ticks=120):
    """Hand-built constant-speed episode with a decision event."""
    cfg = ScenarioConfig(v_lo_mps=v0, v_hi_mps=v0, green_lo_s=2.0, green_hi_s=2.0)
    scenario = generate_scenario(seed, cfg)
    dt = scenario.dt_s
    onset = scenario.timing.yellow_onset_s
    samples = []
    x = scenario.initial.position_m
    n = int(round((onset + reaction) / dt)) + n_extra_ticks
    for k in range(n + 1):
        t = k * dt
        phase = "green" if t < onset else ("yellow" if t < onset + 3.5 else "red")
        samples.append((t, x - v0 * t, v0, 0.0, phase))
    return Episode(driver_id=driver, scenario=scenario, samples=samples,
                   decision=decision, decision_t_s=onset + reaction,
                   ran_red=ran_red, crossed_line_t_s=None)


class TestComputePersonalStats:
    def test_counting(self):
        eps = [make_episode(decision=GO) for _ in range(3)] + [make_episode(decision=STOP)]
        stats = compute_personal_stats(eps)
        assert stats.pof_go == 0.75

    def test_single_episode_values(self):
        ep = make_episode(decision=STOP, reaction=0.8, v0=16.0)
        stats = compute_personal_stats([ep])
        idx = ep.decision_index()
        t, x, v, _, _ = ep.samples[idx]
        assert stats.pof_go == 0.0
        assert stats.pof_rr == 0.0
        assert stats.avg_spd_mps == pytest.approx(16.0)
        assert stats.avg_dts_m == pytest.approx(x)
        assert stats.avg_yt_s == pytest.approx(0.8)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compute_personal_stats([])

    def test_mixed_drivers_rejected(self):
        with pytest.raises(ValueError):
            compute_personal_stats([make_episode(driver="a"), make_episode(driver="b")])


class TestExtractWindow:
    def test_single_row_at_onset(self):
        ep = make_episode(v0=20.0)
        w = extract_window(ep, W=1)
        assert w.shape == (1, 3)
        assert w[0, 0] == 20.0
        assert w[0, 2] == pytest.approx(0.0, abs=1e-9)

    def test_constant_speed_distance_decrement(self):
        ep = make_episode(v0=20.0)
        w = extract_window(ep, W=25)
        deltas = np.diff(w[:, 1])
        assert np.allclose(deltas, -0.4, atol=1e-9)

    def test_elapsed_column(self):
        ep = make_episode(v0=20.0)
        w = extract_window(ep, W=25)
        assert np.allclose(w[:, 2], np.arange(25) * 0.02, atol=1e-9)
        assert np.all(np.diff(w[:, 2]) > 0)

    def test_too_short_episode(self):
        ep = make_episode(n_extra_ticks=0)
        ep.samples = ep.samples[:len(ep.samples) // 2]
        short = Episode(driver_id=ep.driver_id, scenario=ep.scenario,
                        samples=ep.samples[:3], decision=ep.decision,
                        decision_t_s=ep.decision_t_s, ran_red=False,
                        crossed_line_t_s=None)
        with pytest.raises(WindowError):
            extract_window(short, W=25)

    def test_causal_rows(self):
        # truncating the episode after row i never changes rows <= i
        ep = make_episode(v0=18.0)
        full = extract_window(ep, W=10)
        onset_idx = next(i for i, r in enumerate(ep.samples)
                         if r[0] >= ep.scenario.timing.yellow_onset_s - 1e-12)
        clipped = Episode(driver_id=ep.driver_id, scenario=ep.scenario,
                          samples=ep.samples[:onset_idx + 10], decision=ep.decision,
                          decision_t_s=ep.decision_t_s, ran_red=False,
                          crossed_line_t_s=None)
        assert np.array_equal(extract_window(clipped, W=10), full)


class TestBuildDataset:
    @pytest.fixture(scope="class")
    def fleet(self):
        return rollout_fleet(load_personas(), 24, base_seed=999)

    def test_stratified_exact_counts(self, fleet):
        train, test, meta = build_dataset(fleet, split_seed=3, holdout_fraction=0.25)
        per_driver = {}
        for s in test:
            per_driver[s.driver_id] = per_driver.get(s.driver_id, 0) + 1
        assert set(per_driver.values()) == {6}

    def test_zero_holdout(self, fleet):
        train, test, meta = build_dataset(fleet, split_seed=3, holdout_fraction=0.0)
        assert test == []
        assert len(train) == sum(len(v) for v in fleet.values())

    def test_split_deterministic(self, fleet):
        a_train, a_test, _ = build_dataset(fleet, split_seed=11, holdout_fraction=0.25)
        b_train, b_test, _ = build_dataset(fleet, split_seed=11, holdout_fraction=0.25)
        assert [s.driver_id for s in a_test] == [s.driver_id for s in b_test]
        assert all(np.array_equal(x.common_seq, y.common_seq)
                   for x, y in zip(a_test, b_test))

    def test_personal_stats_from_train_only(self, fleet):
        train_eps, test_eps = split_episodes(fleet, 5, 0.25)
        stats_direct = {d: compute_personal_stats(train_eps[d]) for d in train_eps}
        train, test, _ = build_dataset(fleet, split_seed=5, holdout_fraction=0.25)
        for s in train + test:
            assert np.allclose(s.personal, stats_direct[s.driver_id].as_vector())
        # dropping test episodes entirely must not change the attached stats
        smaller = {d: train_eps[d] for d in train_eps}
        train2, _, _ = build_dataset(smaller, split_seed=5, holdout_fraction=0.0)
        # not the same split, but stats depend only on each driver's train side
        for d in train_eps:
            assert compute_personal_stats(train_eps[d]) == stats_direct[d]

    def test_normalized_train_moments(self, fleet):
        train, test, meta = build_dataset(fleet, split_seed=7, holdout_fraction=0.25)
        stacked = np.concatenate([apply_norm(s.common_seq, meta.common_norm)
                                  for s in train], axis=0)
        assert np.all(np.abs(stacked.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(stacked.std(axis=0) - 1.0) < 1e-9)
        personal = np.stack([apply_norm(s.personal, meta.personal_norm) for s in train])
        assert np.all(np.abs(personal.mean(axis=0)) < 1e-9)

    def test_too_few_episodes_rejected(self):
        tiny = {"a": [make_episode() for _ in range(5)]}
        with pytest.raises(ValueError):
            build_dataset(tiny)

    def test_constant_feature_gets_unit_sd(self):
        eps = {"a": [make_episode(seed=s) for s in range(12)],
               "b": [make_episode(driver="b", seed=s) for s in range(12)]}
        _, _, meta = build_dataset(eps, split_seed=1, holdout_fraction=0.0)
        # and every sd is strictly positive
        assert all(sd > 0 for _, sd in meta.common_norm + meta.personal_norm)


class TestJsonl:
    def random_samples(self, n, rng):
        out = []
        for i in range(n):
            out.append(Sample(driver_id=f"d{i % 3}", label=i % 2,
                              personal=np.array([rng.uniform01() for _ in range(5)]),
                              common_seq=np.array([[rng.uniform01() for _ in range(3)]
                                                   for _ in range(4)])))
        return out

    def test_empty_roundtrip(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_jsonl(path, [])
        assert path.read_text() == ""
        assert read_jsonl(path) == []

    def test_random_roundtrip_bit_exact(self, tmp_path):
        rng = Xoshiro256(33)
        samples = self.random_samples(1000, rng)
        path = tmp_path / "s.jsonl"
        write_jsonl(path, samples)
        back = read_jsonl(path)
        assert len(back) == 1000
        for a, b in zip(samples, back):
            assert a.driver_id == b.driver_id
            assert a.label == b.label
            assert np.array_equal(a.personal, b.personal)
            assert np.array_equal(a.common_seq, b.common_seq)

    def test_truncated_line_reports_number(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_jsonl(path, self.random_samples(3, Xoshiro256(1)))
        with open(path, "a") as fh:
            fh.write('{"driver_id": "x", "label"')
        with pytest.raises(JsonlParseError) as err:
            read_jsonl(path)
        assert err.value.line_no == 4

    def test_episode_roundtrip(self, tmp_path):
        fleet = rollout_fleet(load_personas()[:1], 3, base_seed=50)
        episodes = next(iter(fleet.values()))
        path = tmp_path / "eps.jsonl"
        write_episodes_jsonl(path, episodes)
        back = read_episodes_jsonl(path)
        for a, b in zip(episodes, back):
            assert a.driver_id == b.driver_id
            assert a.scenario == b.scenario
            assert [tuple(r) for r in a.samples] == [tuple(r) for r in b.samples]
            assert a.decision == b.decision
            assert a.ran_red == b.ran_red
            assert a.crossed_line_t_s == b.crossed_line_t_s

    def test_csv_export(self, tmp_path):
        fleet = rollout_fleet(load_personas()[:1], 2, base_seed=51)
        episodes = next(iter(fleet.values()))
        path = tmp_path / "eps.csv"
        export_episodes_csv(path, episodes)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("driver_id,")
        assert len(lines) == 1 + sum(len(e.samples) for e in episodes)


def test_meta_roundtrip():
    meta = DatasetMeta(W=25, dt_s=0.02, common_norm=[(0.0, 1.0)] * 3,
                       personal_norm=[(0.5, 2.0)] * 5, split_seed=9)
    assert DatasetMeta.from_dict(meta.to_dict()) == meta

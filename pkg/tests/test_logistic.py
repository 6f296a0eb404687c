import math

import numpy as np
import pytest

from dzlab.kinematics import KinematicLimits, time_to_clear, time_to_stop
from dzlab.model import (LogisticModel, episodes_to_features, logistic_features,
                         logistic_predict, logistic_train, nll_and_grad)
from dzlab.persona import load_personas, rollout_fleet

LIM = KinematicLimits()


def separable_dataset(n=800, yellow_s=3.5, seed=5):
    """Kinematically separable rule: go iff remaining yellow exceeds the
    max-acceleration time to the line."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for _ in range(n):
        v = rng.uniform(8.0, 28.0)
        x = rng.uniform(10.0, 160.0)
        t_a = time_to_clear(x, v, LIM)
        t_b = time_to_stop(v, LIM)
        X.append([v, x, t_a, t_b, 0.0])
        y.append(1.0 if yellow_s > t_a else 0.0)
    return np.array(X), np.array(y)


class TestSeparableRule:
    def test_accuracy_at_least_99_percent(self):
        X, y = separable_dataset(seed=5)
        Xte, yte = separable_dataset(seed=6)
        model, history = logistic_train(X, y)
        acc = ((model.predict_proba(Xte) >= 0.5) == yte).mean()
        assert acc >= 0.99
        assert history[-1] < history[0]


class TestPredict:
    def test_zero_weights_give_sigmoid_of_intercept(self):
        model = LogisticModel(weights=np.zeros(5), intercept=0.7,
                              norm=[(0.0, 1.0)] * 5)
        p = logistic_predict(model, np.zeros((3, 5)))
        assert np.allclose(p, 1.0 / (1.0 + math.exp(-0.7)))

    def test_feature_scaling_invariant_after_refit(self):
        X, y = separable_dataset(seed=7)
        Xte, yte = separable_dataset(seed=8)
        base, _ = logistic_train(X, y)
        scaled, _ = logistic_train(X * 10.0, y)
        acc_base = ((base.predict_proba(Xte) >= 0.5) == yte).mean()
        acc_scaled = ((scaled.predict_proba(Xte * 10.0) >= 0.5) == yte).mean()
        assert acc_base == acc_scaled


class TestGradient:
    def test_analytic_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 5))
        y = (rng.random(40) > 0.5).astype(float)
        w = rng.normal(size=5) * 0.5
        c = 0.3
        l2 = 1e-4
        _, gw, gc = nll_and_grad(w, c, X, y, l2)
        h = 1e-5
        for i in range(5):
            w_up, w_dn = w.copy(), w.copy()
            w_up[i] += h
            w_dn[i] -= h
            fd = (nll_and_grad(w_up, c, X, y, l2)[0]
                  - nll_and_grad(w_dn, c, X, y, l2)[0]) / (2 * h)
            assert abs(fd - gw[i]) / max(abs(fd), abs(gw[i]), 1e-6) < 1e-4
        fd_c = (nll_and_grad(w, c + h, X, y, l2)[0]
                - nll_and_grad(w, c - h, X, y, l2)[0]) / (2 * h)
        assert abs(fd_c - gc) / max(abs(fd_c), abs(gc), 1e-6) < 1e-4


class TestEpisodeFeatures:
    def test_onset_feature_vector(self):
        fleet = rollout_fleet(load_personas()[:1], 3, base_seed=61)
        for ep in next(iter(fleet.values())):
            feats = logistic_features(ep)
            onset = ep.scenario.timing.yellow_onset_s
            row = next(r for r in ep.samples if r[0] >= onset - 1e-12)
            assert feats[0] == row[2]
            assert feats[1] == row[1]
            assert feats[2] == pytest.approx(
                time_to_clear(row[1], row[2], ep.scenario.limits))
            assert feats[3] == pytest.approx(time_to_stop(row[2], ep.scenario.limits))
            assert 0.0 <= feats[4] < ep.scenario.dt_s + 1e-12

    def test_undecided_episodes_excluded(self):
        fleet = rollout_fleet(load_personas()[:1], 4, base_seed=62)
        eps = next(iter(fleet.values()))
        eps[0].decision = None
        X, y = episodes_to_features(eps)
        assert len(X) == len(eps) - 1

    def test_roundtrip_save_load(self, tmp_path):
        X, y = separable_dataset(n=100, seed=2)
        model, _ = logistic_train(X, y, iterations=200)
        path = tmp_path / "blr.json"
        model.save(path)
        loaded = LogisticModel.load(path)
        assert np.array_equal(loaded.weights, model.weights)
        assert loaded.intercept == model.intercept
        assert np.array_equal(loaded.predict_proba(X), model.predict_proba(X))

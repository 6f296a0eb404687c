"""Binary logistic regression baseline on yellow-onset features.

Features per episode: (speed, distance to stop-line, go-time t_a,
stop-time t_b, elapsed yellow) sampled at the first tick of the yellow
phase.  Fit by full-batch gradient descent on the L2-regularized
negative log-likelihood.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..kinematics import KinematicLimits, time_to_clear, time_to_stop
from ..persona import Episode, GO

N_FEATURES = 5


def logistic_features(episode: Episode) -> np.ndarray:
    """Yellow-onset feature vector for one episode."""
    onset = episode.scenario.timing.yellow_onset_s
    limits = episode.scenario.limits
    for (t, x, v, _, _) in episode.samples:
        if t >= onset - 1e-12:
            return np.array([
                v,
                x,
                time_to_clear(max(x, 0.0), v, limits),
                time_to_stop(v, limits),
                t - onset,
            ])
    raise ValueError(f"episode for {episode.driver_id} never reaches yellow onset")


def episodes_to_features(episodes: list[Episode]) -> tuple[np.ndarray, np.ndarray]:
    rows, labels = [], []
    for ep in episodes:
        if ep.decision is None:
            continue
        rows.append(logistic_features(ep))
        labels.append(1.0 if ep.decision == GO else 0.0)
    return np.array(rows), np.array(labels)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def nll_and_grad(w: np.ndarray, c: float, X: np.ndarray, y: np.ndarray,
                 l2: float) -> tuple[float, np.ndarray, float]:
    """Mean negative log-likelihood + L2 on weights, with analytic gradient."""
    n = len(y)
    p = np.clip(_sigmoid(X @ w + c), 1e-12, 1.0 - 1e-12)
    nll = -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)) + l2 * np.sum(w * w)
    resid = p - y
    grad_w = X.T @ resid / n + 2.0 * l2 * w
    grad_c = float(np.mean(resid))
    return float(nll), grad_w, grad_c


@dataclass
class LogisticModel:
    weights: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    intercept: float = 0.0
    # per-feature (mean, sd) pairs fit on the training features
    norm: list = field(default_factory=list)

    def _normalize(self, X: np.ndarray) -> np.ndarray:
        if not self.norm:
            return X
        means = np.array([p[0] for p in self.norm])
        sds = np.array([p[1] for p in self.norm])
        return (X - means) / sds

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self._normalize(np.atleast_2d(X)) @ self.weights + self.intercept)

    def to_dict(self) -> dict:
        return {"format_version": 1, "weights": self.weights.tolist(),
                "intercept": self.intercept, "norm": self.norm}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(weights=np.array(d["weights"]), intercept=d["intercept"],
                   norm=[tuple(p) for p in d["norm"]])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "LogisticModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def logistic_train(X: np.ndarray, y: np.ndarray, l2: float = 1e-4, lr: float = 0.5,
                   iterations: int = 4000) -> tuple[LogisticModel, list[float]]:
    """Gradient-descent maximum likelihood on standardized features."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    sds = np.where(sds > 1e-12, sds, 1.0)
    model = LogisticModel(weights=np.zeros(X.shape[1]), intercept=0.0,
                          norm=[(float(m), float(s)) for m, s in zip(means, sds)])
    Xn = (X - means) / sds
    history = []
    for _ in range(iterations):
        nll, gw, gc = nll_and_grad(model.weights, model.intercept, Xn, y, l2)
        model.weights -= lr * gw
        model.intercept -= lr * gc
        history.append(nll)
    return model, history


def logistic_train_episodes(episodes: list[Episode], **kw) -> tuple[LogisticModel, list[float]]:
    X, y = episodes_to_features(episodes)
    return logistic_train(X, y, **kw)


def logistic_predict(model: LogisticModel, features: np.ndarray) -> np.ndarray:
    return model.predict_proba(features)

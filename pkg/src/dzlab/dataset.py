"""Episodes -> model samples: windows, per-driver statistics, splits, JSONL.

A sample pairs a fixed-length post-yellow-onset window of the common
features (speed, distance to stop-line, elapsed yellow) with the driver's
5-element statistics vector and the latched stop/go label.  Statistics
and normalization are fit on the training split only.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .persona import Episode, GO
from .rng import Xoshiro256, derive_seed

log = logging.getLogger(__name__)

DEFAULT_W = 25  # ticks = 0.5 s at 50 Hz

LABEL_STOP, LABEL_GO = 0, 1


class WindowError(ValueError):
    """Episode too short to supply the requested window."""


class JsonlParseError(ValueError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class PersonalStats:
    """Per-driver behavior statistics at decision-making moments."""
    pof_go: float
    pof_rr: float
    avg_spd_mps: float
    avg_dts_m: float
    avg_yt_s: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.pof_go, self.pof_rr, self.avg_spd_mps,
                         self.avg_dts_m, self.avg_yt_s], dtype=np.float64)


@dataclass
class Sample:
    driver_id: str
    label: int
    personal: np.ndarray      # (5,)
    common_seq: np.ndarray    # (W, 3): speed, distance-to-line, elapsed yellow

    def to_json_line(self) -> str:
        return json.dumps({
            "driver_id": self.driver_id,
            "label": self.label,
            "personal": self.personal.tolist(),
            "common_seq": self.common_seq.tolist(),
        })


@dataclass
class DatasetMeta:
    W: int
    dt_s: float
    # per-feature (mean, sd); sd = 1 for constant features
    common_norm: list
    personal_norm: list
    split_seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetMeta":
        return cls(W=d["W"], dt_s=d["dt_s"], common_norm=[tuple(p) for p in d["common_norm"]],
                   personal_norm=[tuple(p) for p in d["personal_norm"]], split_seed=d["split_seed"])


def compute_personal_stats(episodes: list[Episode]) -> PersonalStats:
    """Statistics over one driver's decided episodes."""
    if not episodes:
        raise ValueError("cannot compute statistics over an empty episode list")
    driver_ids = {ep.driver_id for ep in episodes}
    if len(driver_ids) != 1:
        raise ValueError(f"episodes span multiple drivers: {sorted(driver_ids)}")
    decided = [ep for ep in episodes if ep.decision is not None]
    if not decided:
        raise ValueError("no decided episodes for statistics")
    n = len(decided)
    gos = sum(ep.decision == GO for ep in decided)
    reds = sum(ep.ran_red for ep in decided)
    spd = dts = yt = 0.0
    for ep in decided:
        idx = ep.decision_index()
        t, x, v, _, _ = ep.samples[idx]
        spd += v
        dts += x
        yt += ep.decision_t_s - ep.scenario.timing.yellow_onset_s
    return PersonalStats(pof_go=gos / n, pof_rr=reds / n,
                         avg_spd_mps=spd / n, avg_dts_m=dts / n, avg_yt_s=yt / n)


def extract_window(episode: Episode, W: int = DEFAULT_W, dt: float | None = None) -> np.ndarray:
    """First W ticks at/after yellow onset as a (W, 3) matrix.

    The window length is fixed regardless of when the decision lands; rows
    are causal in tick order.
    """
    onset = episode.scenario.timing.yellow_onset_s
    start = None
    for i, row in enumerate(episode.samples):
        if row[0] >= onset - 1e-12:
            start = i
            break
    if start is None or start + W > len(episode.samples):
        raise WindowError(
            f"episode for {episode.driver_id} has fewer than {W} ticks after yellow onset")
    out = np.empty((W, 3), dtype=np.float64)
    for r in range(W):
        t, x, v, _, _ = episode.samples[start + r]
        out[r, 0] = v
        out[r, 1] = x
        out[r, 2] = t - onset
    return out


def _fit_norm(columns: np.ndarray) -> list:
    """Per-column (mean, sd) pairs; constant columns get sd = 1."""
    means = columns.mean(axis=0)
    sds = columns.std(axis=0)
    pairs = []
    for m, s in zip(means, sds):
        pairs.append((float(m), float(s) if s > 1e-12 else 1.0))
    return pairs


def apply_norm(values: np.ndarray, pairs: list) -> np.ndarray:
    means = np.array([p[0] for p in pairs])
    sds = np.array([p[1] for p in pairs])
    return (values - means) / sds


def split_episodes(episodes_by_driver: dict[str, list[Episode]], split_seed: int,
                   holdout_fraction: float) -> tuple[dict, dict]:
    """Stratified-by-driver random split with exact per-driver counts."""
    if not (0.0 <= holdout_fraction < 1.0):
        raise ValueError(f"holdout_fraction must be in [0, 1), got {holdout_fraction}")
    train, test = {}, {}
    for d_idx, driver in enumerate(sorted(episodes_by_driver)):
        eps = episodes_by_driver[driver]
        rng = Xoshiro256(derive_seed(split_seed, d_idx))
        order = rng.permutation(len(eps))
        n_test = int(round(len(eps) * holdout_fraction))
        test_idx = set(order[:n_test])
        train[driver] = [eps[i] for i in range(len(eps)) if i not in test_idx]
        test[driver] = [eps[i] for i in range(len(eps)) if i in test_idx]
    return train, test


def build_dataset(episodes_by_driver: dict[str, list[Episode]], W: int = DEFAULT_W,
                  split_seed: int = 0, holdout_fraction: float = 0.25,
                  ) -> tuple[list[Sample], list[Sample], DatasetMeta]:
    """Split, compute train-only driver statistics, assemble raw samples.

    Normalization pairs in the returned meta are fit on the training split;
    samples carry raw physical values (normalize at model boundaries).
    """
    for driver, eps in episodes_by_driver.items():
        if len(eps) < 10:
            raise ValueError(f"driver {driver} contributes {len(eps)} episodes; need >= 10")
    train_eps, test_eps = split_episodes(episodes_by_driver, split_seed, holdout_fraction)

    stats = {}
    for driver in sorted(train_eps):
        stats[driver] = compute_personal_stats(train_eps[driver])
        labels = {ep.decision for ep in train_eps[driver] if ep.decision is not None}
        if len(labels) < 2:
            log.warning("driver %s has a single decision class in train; retained", driver)

    dt = None
    def to_samples(split: dict[str, list[Episode]]) -> list[Sample]:
        nonlocal dt
        out = []
        for driver in sorted(split):
            vec = stats[driver].as_vector()
            for ep in split[driver]:
                if ep.decision is None:
                    log.warning("skipping undecided episode for %s", driver)
                    continue
                try:
                    window = extract_window(ep, W)
                except WindowError as exc:
                    log.warning("skipping: %s", exc)
                    continue
                dt = ep.scenario.dt_s
                out.append(Sample(driver_id=driver,
                                  label=LABEL_GO if ep.decision == GO else LABEL_STOP,
                                  personal=vec.copy(), common_seq=window))
        return out

    train_samples = to_samples(train_eps)
    test_samples = to_samples(test_eps)
    if not train_samples:
        raise ValueError("no usable training samples")

    common_stack = np.concatenate([s.common_seq for s in train_samples], axis=0)
    personal_stack = np.stack([s.personal for s in train_samples], axis=0)
    meta = DatasetMeta(W=W, dt_s=dt, common_norm=_fit_norm(common_stack),
                       personal_norm=_fit_norm(personal_stack), split_seed=split_seed)
    return train_samples, test_samples, meta


def write_jsonl(path, samples: list[Sample]) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(s.to_json_line())
            fh.write("\n")


def read_jsonl(path) -> list[Sample]:
    samples = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            if not line.endswith("\n"):
                raise JsonlParseError(path, line_no, "truncated last line (missing newline)")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JsonlParseError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            try:
                samples.append(Sample(
                    driver_id=obj["driver_id"],
                    label=int(obj["label"]),
                    personal=np.array(obj["personal"], dtype=np.float64),
                    common_seq=np.array(obj["common_seq"], dtype=np.float64),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise JsonlParseError(path, line_no, f"bad sample record: {exc}") from exc
    return samples


def write_episodes_jsonl(path, episodes: list[Episode]) -> None:
    with open(path, "w") as fh:
        for ep in episodes:
            fh.write(json.dumps(ep.to_dict()))
            fh.write("\n")


def append_episode_jsonl(path, episode: Episode) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(episode.to_dict()))
        fh.write("\n")


def read_episodes_jsonl(path) -> list[Episode]:
    episodes = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip() == "":
                continue
            if not line.endswith("\n"):
                raise JsonlParseError(path, line_no, "truncated last line (missing newline)")
            try:
                episodes.append(Episode.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise JsonlParseError(path, line_no, f"bad episode record: {exc}") from exc
    return episodes


def export_episodes_csv(path, episodes: list[Episode]) -> None:
    """Tick-level flat export for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["driver_id", "episode_seed", "t_s", "position_m", "speed_mps",
                         "accel_mps2", "phase", "decision", "ran_red"])
        for ep in episodes:
            for (t, x, v, a, ph) in ep.samples:
                writer.writerow([ep.driver_id, ep.scenario.seed, repr(t), repr(x), repr(v),
                                 repr(a), ph, ep.decision or "", int(ep.ran_red)])

"""Perception providers standing in for the recognition and estimation networks.

A provider answers two questions about a :class:`Frame`: is the user pointing
(:meth:`classify`) and what are the finger position and direction
(:meth:`estimate`). :class:`OracleProvider` perturbs the frame's ground truth
with a calibrated :class:`NoiseProfile`; :class:`ReplayProvider` returns what a
recorded session log says.

Noise model of the oracle:

* recognition is correct with the per-tag success rate;
* certainty is Beta distributed, high on correct and low on wrong answers;
* yaw and pitch errors are zero-mean Gaussians with ``sigma = MAE * sqrt(pi/2)``
  so the mean absolute error matches the profile;
* position error is isotropic Gaussian with per-axis ``sigma = RMSE / sqrt(3)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Protocol

import numpy as np

from .geometry import PointingFeature, wrap_angle
from .rng import as_generator

SUPPORTED_YAW_DEG = 125.0
_MAX_PITCH = np.radians(89.9)


class Tag(str, Enum):
    NOMINAL = "nominal"
    GLOVES = "gloves"
    OUT_OF_FRAME = "out_of_frame"
    OCCLUSION = "occlusion"
    MULTI_USER = "multi_user"
    SITTING = "sitting"
    DUAL_ARM = "dual_arm"


class MissingGroundTruthError(LookupError):
    pass


class StreamExhausted(Exception):
    pass


class ReplayParseError(ValueError):
    def __init__(self, line: int, msg: str, path: str = "<log>"):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line
        self.path = path


@dataclass(frozen=True)
class GroundTruth:
    is_pointing: bool
    feature: PointingFeature | None = None


@dataclass(frozen=True)
class Frame:
    timestamp: float
    ground_truth: GroundTruth | None = None
    tags: frozenset = frozenset({Tag.NOMINAL})

    def __post_init__(self):
        object.__setattr__(self, "tags", frozenset(Tag(t) for t in self.tags))


@dataclass(frozen=True)
class Classification:
    is_pointing: bool
    certainty: float

    def __post_init__(self):
        if not 0.0 <= self.certainty <= 1.0:
            raise ValueError(f"certainty must lie in [0, 1], got {self.certainty}")


def yaw_supported(feature: PointingFeature) -> bool:
    """Whether the yaw lies in the range the estimator is trained for."""
    return abs(feature.gamma) <= np.radians(SUPPORTED_YAW_DEG) + 1e-12


@dataclass(frozen=True)
class TagNoise:
    success_rate: float
    pos_rmse_mm: float = 0.0
    pos_std_mm: float = 0.0
    yaw_mae_deg: float = 0.0
    yaw_std_deg: float = 0.0
    pitch_mae_deg: float = 0.0
    pitch_std_deg: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError("success rate must lie in [0, 1]")
        if min(self.pos_rmse_mm, self.yaw_mae_deg, self.pitch_mae_deg,
               self.pos_std_mm, self.yaw_std_deg, self.pitch_std_deg) < 0:
            raise ValueError("error magnitudes must be non-negative")

    @property
    def yaw_sigma_deg(self) -> float:
        return self.yaw_mae_deg * math.sqrt(math.pi / 2)

    @property
    def pitch_sigma_deg(self) -> float:
        return self.pitch_mae_deg * math.sqrt(math.pi / 2)

    @property
    def pos_sigma_mm(self) -> float:
        return self.pos_rmse_mm / math.sqrt(3)


# Recognition success rate, position RMSE and angle MAE (mean +- spread) per scenario.
# The *_std values are kept for reference; sampling uses only the means.
CALIBRATED_TAG_NOISE = {
    Tag.NOMINAL: TagNoise(0.972, 61.3, 30.0, 1.4, 1.3, 0.61, 0.63),
    Tag.GLOVES: TagNoise(0.949, 81.3, 44.0, 11.02, 3.2, 10.89, 6.9),
    Tag.OUT_OF_FRAME: TagNoise(0.955, 75.5, 35.8, 12.44, 6.1, 10.22, 3.7),
    Tag.OCCLUSION: TagNoise(0.895, 70.9, 29.6, 12.86, 3.7, 11.75, 5.9),
    Tag.MULTI_USER: TagNoise(0.905, 72.3, 34.1, 7.43, 4.54, 6.57, 2.98),
    Tag.SITTING: TagNoise(0.979, 68.8, 35.6, 5.08, 2.12, 3.87, 1.88),
    Tag.DUAL_ARM: TagNoise(0.878, 70.1, 38.8, 8.03, 2.94, 7.45, 2.61),
}


@dataclass(frozen=True)
class NoiseProfile:
    tags: dict = field(default_factory=lambda: dict(CALIBRATED_TAG_NOISE))
    certainty_correct_mean: float = 0.95
    certainty_incorrect_mean: float = 0.35
    certainty_concentration: float = 20.0

    def __post_init__(self):
        for m in (self.certainty_correct_mean, self.certainty_incorrect_mean):
            if not 0.0 < m < 1.0:
                raise ValueError("certainty means must lie strictly inside (0, 1)")
        if Tag.NOMINAL not in self.tags:
            raise ValueError("profile needs a nominal entry")

    @classmethod
    def calibrated(cls) -> "NoiseProfile":
        return cls()

    @classmethod
    def zero(cls) -> "NoiseProfile":
        return cls({t: TagNoise(1.0) for t in Tag})

    def scaled(self, estimation: float = 1.0, recognition_perfect: bool = False) -> "NoiseProfile":
        """Copy with estimation errors scaled; optionally perfect recognition."""
        tags = {}
        for t, n in self.tags.items():
            tags[t] = replace(
                n,
                success_rate=1.0 if recognition_perfect else n.success_rate,
                pos_rmse_mm=n.pos_rmse_mm * estimation,
                yaw_mae_deg=n.yaw_mae_deg * estimation,
                pitch_mae_deg=n.pitch_mae_deg * estimation,
            )
        return replace(self, tags=tags)

    def for_tags(self, tags: Iterable[Tag]) -> TagNoise:
        """Noise for a frame: the hardest (lowest success rate) known edge-case tag, else nominal."""
        known = [self.tags[t] for t in sorted(tags) if t is not Tag.NOMINAL and t in self.tags]
        if not known:
            return self.tags[Tag.NOMINAL]
        return min(known, key=lambda n: n.success_rate)


class PerceptionProvider(Protocol):
    def classify(self, frame: Frame) -> Classification: ...

    def estimate(self, frame: Frame) -> PointingFeature | None: ...


class OracleProvider:
    """Ground truth perturbed by a noise profile. One instance per frame stream."""

    def __init__(self, profile: NoiseProfile | None = None, seed=0):
        self.profile = profile or NoiseProfile.calibrated()
        self.rng = as_generator(seed)

    def _truth(self, frame: Frame) -> GroundTruth:
        if frame.ground_truth is None:
            raise MissingGroundTruthError(f"frame at t={frame.timestamp} has no ground truth")
        return frame.ground_truth

    def _certainty(self, mean: float) -> float:
        k = self.profile.certainty_concentration
        return float(self.rng.beta(mean * k, (1.0 - mean) * k))

    def classify(self, frame: Frame) -> Classification:
        gt = self._truth(frame)
        noise = self.profile.for_tags(frame.tags)
        label = gt.is_pointing
        if label and gt.feature is not None and not yaw_supported(gt.feature):
            label = False
        correct = bool(self.rng.random() < noise.success_rate)
        if correct:
            return Classification(label, self._certainty(self.profile.certainty_correct_mean))
        return Classification(not label, self._certainty(self.profile.certainty_incorrect_mean))

    def estimate(self, frame: Frame) -> PointingFeature | None:
        gt = self._truth(frame)
        if gt.feature is None:
            return None
        noise = self.profile.for_tags(frame.tags)
        d_yaw, d_pitch = self.rng.normal(0.0, 1.0, size=2) * np.radians(
            [noise.yaw_sigma_deg, noise.pitch_sigma_deg])
        d_p = self.rng.normal(0.0, noise.pos_sigma_mm, size=3)
        f = gt.feature
        beta = float(np.clip(f.beta + d_pitch, -_MAX_PITCH, _MAX_PITCH))
        return PointingFeature(f.p + d_p, beta, wrap_angle(f.gamma + d_yaw))


# -- debounce ---------------------------------------------------------------


@dataclass(frozen=True)
class DebounceConfig:
    k: int = 3
    threshold: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("certainty threshold must lie in [0, 1]")


@dataclass(frozen=True)
class DebounceState:
    consecutive: int = 0


@dataclass(frozen=True)
class TriggerDecision:
    fired: bool
    state: DebounceState


def debounce_update(state: DebounceState, c: Classification,
                    config: DebounceConfig = DebounceConfig()) -> TriggerDecision:
    """Fire after ``k`` consecutive confident positives; any other input resets."""
    if c.is_pointing and c.certainty >= config.threshold:
        n = state.consecutive + 1
        if n >= config.k:
            return TriggerDecision(True, DebounceState(0))
        return TriggerDecision(False, DebounceState(n))
    return TriggerDecision(False, DebounceState(0))


# -- replay logs ------------------------------------------------------------


@dataclass(frozen=True)
class ReplayRecord:
    frame: Frame
    classification: Classification | None
    estimate: PointingFeature | None


def _feature_json(f: PointingFeature | None) -> dict | None:
    if f is None:
        return None
    return {"p_mm": [float(x) for x in f.p], "beta_deg": f.beta_deg, "gamma_deg": f.gamma_deg}


def record_to_json(rec: ReplayRecord) -> dict:
    fr = rec.frame
    gt = None
    if fr.ground_truth is not None:
        gt = {"pointing": fr.ground_truth.is_pointing}
        fj = _feature_json(fr.ground_truth.feature)
        gt.update(fj if fj else {"p_mm": None, "beta_deg": None, "gamma_deg": None})
    cls = None
    if rec.classification is not None:
        cls = {"pointing": rec.classification.is_pointing, "certainty": rec.classification.certainty}
    return {
        "t": fr.timestamp,
        "tags": sorted(t.value for t in fr.tags),
        "gt": gt,
        "cls": cls,
        "est": _feature_json(rec.estimate),
    }


def _parse_feature(obj) -> PointingFeature | None:
    if obj is None or obj.get("p_mm") is None:
        return None
    return PointingFeature.from_degrees(obj["p_mm"], float(obj["beta_deg"]), float(obj["gamma_deg"]))


def record_from_json(obj: dict) -> ReplayRecord:
    gt = None
    if obj.get("gt") is not None:
        gt = GroundTruth(bool(obj["gt"]["pointing"]), _parse_feature(obj["gt"]))
    cls = None
    if obj.get("cls") is not None:
        cls = Classification(bool(obj["cls"]["pointing"]), float(obj["cls"]["certainty"]))
    tags = obj.get("tags") or [Tag.NOMINAL.value]
    frame = Frame(float(obj["t"]), gt, frozenset(Tag(t) for t in tags))
    return ReplayRecord(frame, cls, _parse_feature(obj.get("est")))


def write_replay_log(path, records: Iterable[ReplayRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec)) + "\n")


class ReplayLog:
    """Sequential reader over a JSON Lines session log."""

    def __init__(self, path):
        self.path = str(path)
        self._fh = open(path)
        self._line = 0
        self._last_t = None

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def replay_next(self) -> ReplayRecord:
        while True:
            raw = self._fh.readline()
            if raw == "":
                raise StreamExhausted(f"{self.path}: no more records")
            self._line += 1
            if raw.strip():
                break
        try:
            rec = record_from_json(json.loads(raw))
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise ReplayParseError(self._line, str(exc), self.path) from None
        if self._last_t is not None and rec.frame.timestamp <= self._last_t:
            raise ReplayParseError(self._line, "timestamps must strictly increase", self.path)
        self._last_t = rec.frame.timestamp
        return rec

    def __iter__(self) -> Iterator[ReplayRecord]:
        while True:
            try:
                yield self.replay_next()
            except StreamExhausted:
                return


def read_replay_log(path) -> list[ReplayRecord]:
    with ReplayLog(path) as log:
        return list(log)


class ReplayProvider:
    """Answers classify/estimate from recorded records, keyed by frame timestamp."""

    def __init__(self, records: Iterable[ReplayRecord]):
        self._by_t = {r.frame.timestamp: r for r in records}

    def _record(self, frame: Frame) -> ReplayRecord:
        try:
            return self._by_t[frame.timestamp]
        except KeyError:
            raise StreamExhausted(f"no recorded frame at t={frame.timestamp}") from None

    def classify(self, frame: Frame) -> Classification:
        c = self._record(frame).classification
        return c if c is not None else Classification(False, 0.0)

    def estimate(self, frame: Frame) -> PointingFeature | None:
        return self._record(frame).estimate


class RecordingProvider:
    """Wraps a provider and keeps what it answered per frame, for writing replay logs."""

    def __init__(self, inner: PerceptionProvider):
        self.inner = inner
        self._records: dict[float, list] = {}
        self._frames: dict[float, Frame] = {}

    def _slot(self, frame: Frame) -> list:
        self._frames[frame.timestamp] = frame
        return self._records.setdefault(frame.timestamp, [None, None])

    def classify(self, frame: Frame) -> Classification:
        c = self.inner.classify(frame)
        self._slot(frame)[0] = c
        return c

    def estimate(self, frame: Frame) -> PointingFeature | None:
        e = self.inner.estimate(frame)
        self._slot(frame)[1] = e
        return e

    def records(self, frames: Iterable[Frame] | None = None) -> list[ReplayRecord]:
        """Records in timestamp order; ``frames`` adds frames the pipeline never queried."""
        if frames is not None:
            for f in frames:
                self._frames.setdefault(f.timestamp, f)
        out = []
        for t in sorted(self._frames):
            c, e = self._records.get(t, (None, None))
            out.append(ReplayRecord(self._frames[t], c, e))
        return out

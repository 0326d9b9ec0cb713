"""Recognition-triggered pointing pipeline.

The state machine idles while classifying frames. ``k`` consecutive confident
positives trigger it; it then collects estimates over a settle window while the
arm comes to rest, fuses them, maps the result into the robot frame and
resolves a floor target. Exactly one event (a command or a dispatch failure)
follows each trigger. After a command the pipeline ignores frames for a
cooldown so one sustained gesture cannot dispatch twice.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .geometry import (
    GeometryError,
    PointingFeature,
    Ray,
    RigidTransform,
    direction_from_angles,
    project_to_floor_line,
    resolve_target,
    transform_direction,
    transform_point,
    wrap_angle,
)
from .perception import (
    DebounceConfig,
    DebounceState,
    Frame,
    PerceptionProvider,
    debounce_update,
    yaw_supported,
)


class Phase(str, Enum):
    IDLE = "idle"
    SETTLING = "settling"
    DISPATCHED = "dispatched"


class MotionMode(str, Enum):
    DIRECT_GOAL = "direct_goal"  # quadruped: walk straight to the floor target
    FLOOR_LINE = "floor_line"  # rover: follow the pointing heading along the floor


@dataclass(frozen=True)
class PipelineConfig:
    debounce: DebounceConfig = DebounceConfig()
    settle_frames: int = 5
    cooldown_s: float = 2.0
    mode: MotionMode = MotionMode.DIRECT_GOAL

    def __post_init__(self):
        if self.settle_frames < 1:
            raise ValueError("settle window needs at least one frame")
        if self.cooldown_s < 0:
            raise ValueError("cooldown must be non-negative")


@dataclass(frozen=True)
class PipelineState:
    phase: Phase = Phase.IDLE
    debounce: DebounceState = DebounceState()
    frames_remaining: int = 0
    estimates: tuple = ()
    dispatched_at: float | None = None
    last_timestamp: float | None = None
    triggers: int = 0


@dataclass(frozen=True, eq=False)
class TargetCommand:
    mode: MotionMode
    feature: PointingFeature
    transform: RigidTransform
    timestamp: float
    goal: np.ndarray | None = None
    line: Ray | None = None

    def to_json(self) -> dict:
        d = {
            "event": "command",
            "t": self.timestamp,
            "mode": self.mode.value,
            "feature": {"p_mm": [float(x) for x in self.feature.p],
                        "beta_deg": self.feature.beta_deg, "gamma_deg": self.feature.gamma_deg},
        }
        if self.goal is not None:
            d["goal_mm"] = [float(x) for x in self.goal]
        if self.line is not None:
            d["line"] = {"origin_mm": [float(x) for x in self.line.origin],
                         "direction": [float(x) for x in self.line.direction]}
        return d


@dataclass(frozen=True)
class DispatchFailure:
    timestamp: float
    reason: str

    def to_json(self) -> dict:
        return {"event": "dispatch_failure", "t": self.timestamp, "reason": self.reason}


def circular_median(angles) -> float:
    """Median of angles (radians) taken on the circle around their mean direction."""
    a = np.asarray(angles, dtype=float)
    s, c = np.sin(a).sum(), np.cos(a).sum()
    ref = float(np.arctan2(s, c)) if np.hypot(s, c) > 1e-12 else float(a[0])
    return wrap_angle(ref + float(np.median(wrap_angle(a - ref))))


def settle_and_fuse(estimates) -> PointingFeature:
    """Component-wise median of positions and pitch, circular median of yaw."""
    if len(estimates) == 0:
        raise ValueError("cannot fuse an empty set of estimates")
    p = np.median(np.stack([e.p for e in estimates]), axis=0)
    beta = float(np.median([e.beta for e in estimates]))
    gamma = circular_median([e.gamma for e in estimates])
    return PointingFeature(p, beta, gamma)


def dispatch_target(feature: PointingFeature, A_rc: RigidTransform, h: float,
                    mode: MotionMode, timestamp: float = 0.0) -> TargetCommand:
    """Map a camera-frame feature into the robot frame and resolve the target."""
    mode = MotionMode(mode)
    x_r = transform_direction(A_rc, direction_from_angles(feature.beta, feature.gamma))
    p_r = transform_point(A_rc, feature.p)
    if mode is MotionMode.DIRECT_GOAL:
        return TargetCommand(mode, feature, A_rc, timestamp, goal=resolve_target(p_r, x_r, h))
    return TargetCommand(mode, feature, A_rc, timestamp, line=project_to_floor_line(p_r, x_r, h))


def _idle_step(state: PipelineState, frame: Frame, provider: PerceptionProvider,
               config: PipelineConfig) -> PipelineState:
    decision = debounce_update(state.debounce, provider.classify(frame), config.debounce)
    if decision.fired:
        return replace(state, phase=Phase.SETTLING, debounce=decision.state,
                       frames_remaining=config.settle_frames, estimates=(),
                       triggers=state.triggers + 1)
    return replace(state, debounce=decision.state)


def pipeline_step(state: PipelineState, frame: Frame, provider: PerceptionProvider,
                  A_rc: RigidTransform, robot_height_h: float,
                  config: PipelineConfig = PipelineConfig()):
    """Advance the pipeline by one frame.

    Returns ``(new_state, event)`` where ``event`` is a :class:`TargetCommand`,
    a :class:`DispatchFailure` or None.
    """
    t = frame.timestamp
    if state.last_timestamp is not None and t <= state.last_timestamp:
        raise ValueError(f"frame timestamps must increase ({t} after {state.last_timestamp})")
    state = replace(state, last_timestamp=t)

    if state.phase is Phase.DISPATCHED:
        if t - state.dispatched_at < config.cooldown_s:
            return state, None
        state = replace(state, phase=Phase.IDLE, dispatched_at=None, estimates=())

    if state.phase is Phase.IDLE:
        return _idle_step(state, frame, provider, config), None

    # settling
    est = provider.estimate(frame)
    estimates = state.estimates
    if est is not None and yaw_supported(est):
        estimates = estimates + (est,)
    remaining = state.frames_remaining - 1
    if remaining > 0:
        return replace(state, estimates=estimates, frames_remaining=remaining), None

    idle = replace(state, phase=Phase.IDLE, frames_remaining=0, estimates=(),
                   debounce=DebounceState())
    if not estimates:
        return idle, DispatchFailure(t, "no usable estimates in the settle window")
    fused = settle_and_fuse(estimates)
    try:
        cmd = dispatch_target(fused, A_rc, robot_height_h, config.mode, t)
    except GeometryError as exc:
        return idle, DispatchFailure(t, str(exc))
    return replace(idle, phase=Phase.DISPATCHED, estimates=estimates, dispatched_at=t), cmd


@dataclass
class Pipeline:
    """Single-writer wrapper that feeds frames and queues emitted events."""

    provider: PerceptionProvider
    A_rc: RigidTransform = field(default_factory=RigidTransform.identity)
    robot_height_h: float = 500.0
    config: PipelineConfig = field(default_factory=PipelineConfig)
    state: PipelineState = field(default_factory=PipelineState)
    events: deque = field(default_factory=deque)

    def feed(self, frame: Frame):
        self.state, event = pipeline_step(self.state, frame, self.provider, self.A_rc,
                                          self.robot_height_h, self.config)
        if event is not None:
            self.events.append(event)
        return event

    def run(self, frames) -> list:
        out = []
        for f in frames:
            ev = self.feed(f)
            if ev is not None:
                out.append(ev)
        return out


def write_events_jsonl(path, events) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json()) + "\n")

"""Desk-scale robot reach experiments.

A trial places a robot, a user and a floor target, renders the user's gesture
as a frame stream, runs the pipeline on it with an oracle perception provider
and drives a point robot to the command:

* quadruped (direct goal): turn toward the resolved floor target and walk
  straight to it;
* rover (floor line): drive to the start of the pointing line, then follow it
  until an obstacle is detected ahead, stopping at a standoff. The target is a
  bench registered as a disc obstacle.

The robot controls against its *believed* position, which differs from the
true one by the localization model. Reach error is measured on the floor plane
between the true final position and the true target.

World frame: floor at ``z = 0``. Robot frame: origin at camera-mount height
``h`` above the robot center, x along the heading. The camera sits at the robot
frame origin unless ``camera_offset_mm``/``camera_yaw_deg`` say otherwise.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .geometry import (
    PointingFeature,
    RigidTransform,
    angles_from_direction,
    compose,
    invert,
    normalize,
    transform_direction,
    transform_point,
    wrap_angle,
)
from .perception import (
    Frame,
    GroundTruth,
    NoiseProfile,
    OracleProvider,
    RecordingProvider,
    Tag,
    write_replay_log,
)
from .pipeline import MotionMode, Pipeline, PipelineConfig, TargetCommand
from .rng import trial_seed_sequence


class SceneGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RtkDrift:
    """Bounded random-walk bias: Gaussian increments per step, reflected at ``bound_mm`` per axis."""

    step_sigma_mm: float = 20.0
    bound_mm: float = 400.0


@dataclass(frozen=True)
class LidarGaussian:
    """Independent Gaussian position error of ``sigma_mm`` per axis at every update."""

    sigma_mm: float = 30.0


def _reflect(b: np.ndarray, bound: float) -> np.ndarray:
    if bound <= 0:
        return np.zeros_like(b)
    # fold onto [-bound, bound] as a reflecting walk would
    period = 4.0 * bound
    m = np.mod(b + bound, period)
    return np.where(m <= 2 * bound, m, period - m) - bound


def localization_update(model, true_xy, dt: float, rng: np.random.Generator, bias=None):
    """Believed position for ``true_xy`` and the updated drift state.

    Returns ``(believed_xy, bias)``. ``bias`` carries the random-walk state for
    :class:`RtkDrift` and is ignored by the other models.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    true_xy = np.asarray(true_xy, dtype=float)
    bias = np.zeros(2) if bias is None else np.asarray(bias, dtype=float)
    if model is None:
        return true_xy.copy(), bias
    if isinstance(model, RtkDrift):
        if model.step_sigma_mm > 0:
            bias = _reflect(bias + rng.normal(0.0, model.step_sigma_mm, size=2), model.bound_mm)
        return true_xy + bias, bias
    if isinstance(model, LidarGaussian):
        if model.sigma_mm > 0:
            return true_xy + rng.normal(0.0, model.sigma_mm, size=2), bias
        return true_xy.copy(), bias
    raise TypeError(f"unknown localization model {model!r}")


@dataclass(frozen=True)
class MotionParams:
    speed_mm_s: float = 500.0
    turn_rate_deg_s: float = 90.0
    # beyond this heading error the robot turns in place
    turn_gate_deg: float = 30.0


@dataclass(frozen=True, eq=False)
class RobotState:
    position: np.ndarray
    heading: float
    believed_position: np.ndarray

    @classmethod
    def at(cls, xy, heading: float = 0.0) -> "RobotState":
        xy = np.asarray(xy, dtype=float)
        return cls(xy.copy(), float(heading), xy.copy())


def robot_step(state: RobotState, goal_xy, dt: float, params: MotionParams = MotionParams(),
               max_forward: float = math.inf) -> RobotState:
    """Unicycle step toward ``goal_xy`` computed from the believed position.

    The robot first turns by at most ``turn_rate * dt``; if its heading error
    was within the turn gate it then drives up to ``speed * dt`` (never past the
    goal, never more than ``max_forward``). The same displacement applies to
    the true and believed positions.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    delta = np.asarray(goal_xy, dtype=float) - state.believed_position
    dist = float(np.hypot(delta[0], delta[1]))
    if dist < 1e-9:
        return state
    err = wrap_angle(math.atan2(delta[1], delta[0]) - state.heading)
    max_turn = math.radians(params.turn_rate_deg_s) * dt
    heading = wrap_angle(state.heading + max(-max_turn, min(max_turn, err)))
    if abs(err) > math.radians(params.turn_gate_deg):
        return RobotState(state.position, heading, state.believed_position)
    move = max(0.0, min(params.speed_mm_s * dt, dist, max_forward))
    if abs(err) <= max_turn and move == dist:
        # aligned and arriving: land exactly on the goal in belief space
        step = delta
    else:
        step = move * np.array([math.cos(heading), math.sin(heading)])
    return RobotState(state.position + step, heading, state.believed_position + step)


@dataclass(frozen=True)
class DiscObstacle:
    x_mm: float
    y_mm: float
    radius_mm: float

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x_mm, self.y_mm])


def forward_clearance(position, heading: float, obstacles, corridor_half_width: float,
                      standoff: float) -> float:
    """How far the robot may drive straight ahead before coming within ``standoff`` of an obstacle."""
    u = np.array([math.cos(heading), math.sin(heading)])
    best = math.inf
    for ob in obstacles:
        rel = ob.center - position
        along = float(rel @ u)
        lateral = abs(float(rel[0] * u[1] - rel[1] * u[0]))
        if along > 0 and lateral <= ob.radius_mm + corridor_half_width:
            best = min(best, along - ob.radius_mm - standoff)
    return max(best, 0.0)


@dataclass
class WorldConfig:
    mode: MotionMode = MotionMode.DIRECT_GOAL
    camera_height_mm: float = 500.0
    camera_offset_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    camera_yaw_deg: float = 0.0
    robot_start_mm: tuple[float, float] = (0.0, 0.0)
    robot_heading_deg: float = 0.0
    # user placement relative to the robot
    user_distance_range_mm: tuple[float, float] = (1500.0, 3000.0)
    user_bearing_deg: float = 25.0
    finger_height_mm: float = 1350.0
    finger_reach_mm: float = 600.0
    # robot-to-target distance at pointing time ~ N(mean, std), clipped to +-2.5 std
    target_distance_mean_mm: float = 3800.0
    target_distance_std_mm: float = 950.0
    target_bearing_deg: float = 60.0
    min_user_target_mm: float = 1000.0
    max_scene_yaw_deg: float = 110.0
    min_scene_pitch_deg: float = 3.0
    user_tag: Tag = Tag.NOMINAL
    localization: RtkDrift | LidarGaussian | None = field(default_factory=RtkDrift)
    motion: MotionParams = field(default_factory=MotionParams)
    control_dt_s: float = 0.1
    frame_rate_hz: float = 30.0
    idle_frames: int = 10
    raise_frames: int = 6
    hold_frames: int = 40
    lower_frames: int = 10
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    # rover target and obstacle handling
    include_bench: bool = True
    bench_radius_mm: float = 150.0
    corridor_half_width_mm: float = 0.0
    standoff_mm: float = 300.0
    max_line_length_mm: float = 20000.0
    obstacles: tuple = ()
    success_radius_mm: float = 1000.0
    max_steps: int = 5000

    def __post_init__(self):
        self.mode = MotionMode(self.mode)
        self.user_tag = Tag(self.user_tag)
        if self.camera_height_mm <= 0:
            raise ValueError("camera height must be positive")
        lo, hi = self.user_distance_range_mm
        if not 500.0 <= lo <= hi <= 5000.0:
            raise ValueError("user must stand 0.5-5 m from the robot")
        if self.control_dt_s <= 0 or self.frame_rate_hz <= 0:
            raise ValueError("time steps must be positive")
        if self.pipeline.mode is not self.mode:
            self.pipeline = replace(self.pipeline, mode=self.mode)

    @classmethod
    def quadruped(cls, **kw) -> "WorldConfig":
        return cls(**{"mode": MotionMode.DIRECT_GOAL, "camera_height_mm": 500.0,
                      "target_distance_mean_mm": 3800.0, "target_distance_std_mm": 950.0,
                      "localization": RtkDrift(), **kw})

    @classmethod
    def rover(cls, **kw) -> "WorldConfig":
        return cls(**{"mode": MotionMode.FLOOR_LINE, "camera_height_mm": 700.0,
                      "target_distance_mean_mm": 7200.0, "target_distance_std_mm": 2500.0,
                      "localization": LidarGaussian(), **kw})

    def camera_to_robot(self) -> RigidTransform:
        return RigidTransform.from_yaw(math.radians(self.camera_yaw_deg), self.camera_offset_mm)

    def noise_free(self) -> "WorldConfig":
        loc = self.localization
        if isinstance(loc, RtkDrift):
            loc = RtkDrift(0.0, loc.bound_mm)
        elif isinstance(loc, LidarGaussian):
            loc = LidarGaussian(0.0)
        return replace(self, localization=loc)


@dataclass(frozen=True, eq=False)
class Scene:
    robot_xy: np.ndarray
    robot_heading: float
    user_xy: np.ndarray
    finger_world: np.ndarray
    target_xy: np.ndarray
    feature: PointingFeature
    distance_to_target: float


def robot_to_world(xy, heading: float, h: float) -> RigidTransform:
    return RigidTransform.from_yaw(heading, (xy[0], xy[1], h))


def generate_scene(world: WorldConfig, rng: np.random.Generator, max_attempts: int = 1000) -> Scene:
    robot_xy = np.asarray(world.robot_start_mm, dtype=float)
    heading = math.radians(world.robot_heading_deg)
    T_wc = compose(robot_to_world(robot_xy, heading, world.camera_height_mm), world.camera_to_robot())
    T_cw = invert(T_wc)
    lo_t = max(1000.0, world.target_distance_mean_mm - 2.5 * world.target_distance_std_mm)
    hi_t = world.target_distance_mean_mm + 2.5 * world.target_distance_std_mm
    for _ in range(max_attempts):
        ub = heading + math.radians(rng.uniform(-world.user_bearing_deg, world.user_bearing_deg))
        ur = rng.uniform(*world.user_distance_range_mm)
        user = robot_xy + ur * np.array([math.cos(ub), math.sin(ub)])
        td = float(np.clip(rng.normal(world.target_distance_mean_mm, world.target_distance_std_mm),
                           lo_t, hi_t))
        tb = heading + math.radians(rng.uniform(-world.target_bearing_deg, world.target_bearing_deg))
        target = robot_xy + td * np.array([math.cos(tb), math.sin(tb)])
        to_target = target - user
        if np.hypot(*to_target) < world.min_user_target_mm:
            continue
        finger = np.append(user + world.finger_reach_mm * to_target / np.hypot(*to_target),
                           world.finger_height_mm)
        dir_w = normalize(np.append(target, 0.0) - finger)
        beta, gamma = angles_from_direction(transform_direction(T_cw, dir_w))
        if abs(math.degrees(gamma)) > world.max_scene_yaw_deg:
            continue
        if math.degrees(beta) < world.min_scene_pitch_deg:
            continue
        feature = PointingFeature(transform_point(T_cw, finger), beta, gamma)
        return Scene(robot_xy, heading, user, finger, target, feature, td)
    raise SceneGenerationError("could not place user and target within the configured limits")


def gesture_frames(feature: PointingFeature, world: WorldConfig) -> list[Frame]:
    """Idle, arm raising, holding the point, lowering."""
    tags = frozenset({world.user_tag})
    phases = [
        (world.idle_frames, GroundTruth(False)),
        (world.raise_frames, GroundTruth(False)),
        (world.hold_frames, GroundTruth(True, feature)),
        (world.lower_frames, GroundTruth(False)),
    ]
    frames, i = [], 0
    for n, gt in phases:
        for _ in range(n):
            frames.append(Frame(i / world.frame_rate_hz, gt, tags))
            i += 1
    return frames


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    mode: MotionMode
    true_target: np.ndarray
    commanded_goal: np.ndarray
    final_position: np.ndarray
    reach_error_mm: float
    success: bool
    distance_to_target_mm: float
    dispatch_failed: bool = False
    obstacle_stop: bool = False
    steps: int = 0


class _Localizer:
    def __init__(self, model, dt, rng):
        self.model, self.dt, self.rng = model, dt, rng
        self.bias = np.zeros(2)

    def __call__(self, state: RobotState) -> RobotState:
        believed, self.bias = localization_update(self.model, state.position, self.dt, self.rng,
                                                  self.bias)
        return RobotState(state.position, state.heading, believed)


def _drive(state, goal, world, localize, obstacles=(), stop_on_obstacle=False):
    """Drive toward ``goal`` until arrival, an obstacle stop or the step cap."""
    params, dt = world.motion, world.control_dt_s
    steps = 0
    while steps < world.max_steps:
        clearance = math.inf
        if obstacles:
            clearance = forward_clearance(state.position, state.heading, obstacles,
                                          world.corridor_half_width_mm, world.standoff_mm)
        delta = goal - state.believed_position
        err = wrap_angle(math.atan2(delta[1], delta[0]) - state.heading)
        wants_forward = abs(err) <= math.radians(params.turn_gate_deg)
        nxt = robot_step(state, goal, dt, params, max_forward=clearance)
        steps += 1
        arrived = float(np.hypot(*(goal - nxt.believed_position))) < 1e-6
        blocked = not arrived and wants_forward and clearance <= 1e-9
        state = localize(nxt)
        if arrived:
            return state, steps, False
        if blocked:
            if stop_on_obstacle:
                return state, steps, True
            break
    return state, steps, False


def run_trial(world: WorldConfig, profile: NoiseProfile, seed, trial_id: int = 0,
              session_log=None) -> TrialRecord:
    """One pointing-and-reach trial. ``seed`` is an int or a SeedSequence.

    With ``session_log`` set, the frames and the provider's answers are written
    there as a replay log.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng_scene, rng_perc, rng_loc = (np.random.default_rng(s) for s in ss.spawn(3))
    scene = generate_scene(world, rng_scene)
    frames = gesture_frames(scene.feature, world)

    provider = OracleProvider(profile, rng_perc)
    if session_log is not None:
        provider = RecordingProvider(provider)
    pipe = Pipeline(provider, world.camera_to_robot(), world.camera_height_mm, world.pipeline)
    event = None
    for frame in frames:
        event = pipe.feed(frame)
        if event is not None:
            break
    if session_log is not None:
        write_replay_log(session_log, provider.records(frames))
    localize = _Localizer(world.localization, world.control_dt_s, rng_loc)
    state = localize(RobotState.at(scene.robot_xy, scene.robot_heading))
    # localization keeps running while the robot watches the gesture
    t_event = frame.timestamp if event is not None else frames[-1].timestamp
    for _ in range(int(t_event / world.control_dt_s)):
        state = localize(state)

    master = int(ss.entropy) if isinstance(ss.entropy, int) else 0
    record = TrialRecord(trial_id, master, world.mode, scene.target_xy.copy(),
                         np.full(2, np.nan), state.position.copy(), math.nan, False,
                         scene.distance_to_target)
    if not isinstance(event, TargetCommand):
        record.dispatch_failed = True
        record.reach_error_mm = float(np.hypot(*(state.position - scene.target_xy)))
        return record

    T_wr = robot_to_world(state.believed_position, state.heading, world.camera_height_mm)
    if world.mode is MotionMode.DIRECT_GOAL:
        goal = transform_point(T_wr, event.goal)[:2]
        state, steps, _ = _drive(state, goal, world, localize)
        stopped = False
    else:
        goal = transform_point(T_wr, event.line.origin)[:2]
        line_dir = transform_direction(T_wr, event.line.direction)[:2]
        obstacles = list(world.obstacles)
        if world.include_bench:
            obstacles.append(DiscObstacle(*scene.target_xy, world.bench_radius_mm))
        state, steps, stopped = _drive(state, goal, world, localize, obstacles, True)
        if not stopped:
            end = goal + world.max_line_length_mm * line_dir
            state, more, stopped = _drive(state, end, world, localize, obstacles, True)
            steps += more

    err = float(np.hypot(*(state.position - scene.target_xy)))
    record.commanded_goal = goal
    record.final_position = state.position.copy()
    record.reach_error_mm = err
    record.steps = steps
    record.obstacle_stop = stopped
    ok = err <= world.success_radius_mm
    record.success = ok and (stopped if world.mode is MotionMode.FLOOR_LINE else True)
    return record


@dataclass
class CampaignSummary:
    mode: str
    n_trials: int
    master_seed: int
    success_rate: float
    mean_reach_error_mm: float
    std_reach_error_mm: float
    mean_distance_to_target_mm: float
    std_distance_to_target_mm: float
    dispatch_failures: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize_trials(records: list[TrialRecord], master_seed: int) -> CampaignSummary:
    errs = np.array([r.reach_error_mm for r in records if not r.dispatch_failed])
    dist = np.array([r.distance_to_target_mm for r in records])
    return CampaignSummary(
        mode=records[0].mode.value,
        n_trials=len(records),
        master_seed=int(master_seed),
        success_rate=float(np.mean([r.success for r in records])),
        mean_reach_error_mm=float(errs.mean()) if errs.size else math.nan,
        std_reach_error_mm=float(errs.std()) if errs.size else math.nan,
        mean_distance_to_target_mm=float(dist.mean()),
        std_distance_to_target_mm=float(dist.std()),
        dispatch_failures=int(sum(r.dispatch_failed for r in records)),
    )


def run_campaign(world: WorldConfig, profile: NoiseProfile, n_trials: int, master_seed: int,
                 session_dir=None):
    """Run ``n_trials`` independent trials; returns ``(records, summary)``."""
    if n_trials < 1:
        raise ValueError("need at least one trial")
    records = []
    for i in range(n_trials):
        log = None if session_dir is None else f"{session_dir}/trial_{i:04d}.jsonl"
        rec = run_trial(world, profile, trial_seed_sequence(master_seed, i), trial_id=i,
                        session_log=log)
        rec.seed = int(master_seed)
        records.append(rec)
    return records, summarize_trials(records, master_seed)


TRIAL_COLUMNS = [
    "trial_id", "seed", "mode", "target_x_mm", "target_y_mm", "goal_x_mm", "goal_y_mm",
    "final_x_mm", "final_y_mm", "reach_error_mm", "success", "distance_to_target_mm",
    "dispatch_failed", "obstacle_stop", "steps",
]


def trial_row(r: TrialRecord) -> dict:
    return {
        "trial_id": r.trial_id, "seed": r.seed, "mode": r.mode.value,
        "target_x_mm": float(r.true_target[0]), "target_y_mm": float(r.true_target[1]),
        "goal_x_mm": float(r.commanded_goal[0]), "goal_y_mm": float(r.commanded_goal[1]),
        "final_x_mm": float(r.final_position[0]), "final_y_mm": float(r.final_position[1]),
        "reach_error_mm": float(r.reach_error_mm), "success": bool(r.success),
        "distance_to_target_mm": float(r.distance_to_target_mm),
        "dispatch_failed": bool(r.dispatch_failed), "obstacle_stop": bool(r.obstacle_stop),
        "steps": int(r.steps),
    }


def write_trials_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            row = trial_row(r)
            w.writerow([repr(v) if isinstance(v, float) else int(v) if isinstance(v, bool)
                        else v for v in (row[c] for c in TRIAL_COLUMNS)])


def write_trials_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(trial_row(r)) + "\n")


def read_trials_csv(path) -> list[TrialRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TrialRecord(
                trial_id=int(row["trial_id"]), seed=int(row["seed"]), mode=MotionMode(row["mode"]),
                true_target=np.array([float(row["target_x_mm"]), float(row["target_y_mm"])]),
                commanded_goal=np.array([float(row["goal_x_mm"]), float(row["goal_y_mm"])]),
                final_position=np.array([float(row["final_x_mm"]), float(row["final_y_mm"])]),
                reach_error_mm=float(row["reach_error_mm"]), success=row["success"] == "1",
                distance_to_target_mm=float(row["distance_to_target_mm"]),
                dispatch_failed=row["dispatch_failed"] == "1",
                obstacle_stop=row["obstacle_stop"] == "1", steps=int(row["steps"]),
            ))
    return out


def write_summary_json(path, summary: CampaignSummary) -> None:
    with open(path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

"""Synthetic comparison of three ways to measure a pointing direction.

* FA: forearm line, elbow to wrist, anchored at the wrist.
* IF: index finger line, wrist to fingertip, anchored at the fingertip.
* EF: eye-finger line, nose root to fingertip, anchored at the fingertip.

A simulated user stands at a random distance from a target and points at it
with a two-link arm plus hand. Three angular perturbations model how real
pointing departs from the ideal line:

1. the eye-finger alignment misses the target (``sigma_ef_deg``),
2. the finger axis deviates from that alignment (``sigma_if_deg``),
3. the forearm deviates from the finger axis at the wrist (``sigma_fa_deg``).

Each perturbation rotates a direction by an angle whose two perpendicular
components are independent zero-mean Gaussians of the given sigma. The
perturbations chain, so FA error includes IF error, which includes EF error.
The noise-free pose has shoulder-to-target geometry consistent with the arm
segment lengths and all three lines hit the target exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .geometry import cross, normalize, pointing_error
from .metrics import ErrorSeries, bin_by_distance
from .rng import as_generator, trial_rng


class Approach(str, Enum):
    FA = "FA"
    IF = "IF"
    EF = "EF"


APPROACHES = (Approach.FA, Approach.IF, Approach.EF)


class InfeasibleScenarioError(ValueError):
    """The arm model cannot reach a pose pointing at the requested target."""


@dataclass
class ScenarioConfig:
    # distance between the user's body and the target, horizontal
    distance_range_mm: tuple[float, float] = (1000.0, 5000.0)
    target_height_range_mm: tuple[float, float] = (0.0, 1500.0)
    target_bearing_deg: float = 60.0
    # shoulder heights for standing, sitting down and crouching
    shoulder_heights_mm: tuple[float, ...] = (1450.0, 1050.0, 850.0)
    upper_arm_mm: float = 300.0
    forearm_mm: float = 280.0
    hand_mm: float = 180.0
    shoulder_lateral_mm: float = 150.0
    nose_above_shoulder_mm: float = 180.0
    nose_forward_mm: float = 50.0
    # how far the shoulder may shrug toward the arm line to keep the pose reachable
    shoulder_slack_mm: float = 120.0
    # fitted by scripts/fit_measure_noise.py against the reported FA/IF/EF means
    sigma_fa_deg: float = 6.5
    sigma_if_deg: float = 5.55
    sigma_ef_deg: float = 2.35

    def __post_init__(self):
        lo, hi = self.distance_range_mm
        if not 0 < lo <= hi:
            raise ValueError("distance range must be positive and ordered")
        if min(self.upper_arm_mm, self.forearm_mm, self.hand_mm) <= 0:
            raise ValueError("segment lengths must be positive")
        if min(self.sigma_fa_deg, self.sigma_if_deg, self.sigma_ef_deg) < 0:
            raise ValueError("noise sigmas must be non-negative")

    def noise_free(self) -> "ScenarioConfig":
        return ScenarioConfig(**{**asdict(self), "sigma_fa_deg": 0.0, "sigma_if_deg": 0.0,
                                 "sigma_ef_deg": 0.0})


@dataclass(frozen=True, eq=False)
class ArmPose:
    shoulder: np.ndarray
    elbow: np.ndarray
    wrist: np.ndarray
    fingertip: np.ndarray
    nose_root: np.ndarray
    intended_target: np.ndarray
    user_distance: float

    def segment_lengths(self) -> tuple[float, float, float]:
        return (
            float(np.linalg.norm(self.elbow - self.shoulder)),
            float(np.linalg.norm(self.wrist - self.elbow)),
            float(np.linalg.norm(self.fingertip - self.wrist)),
        )


@dataclass(frozen=True, eq=False)
class MeasurementSample:
    approach: Approach
    p_k: np.ndarray
    v_k: np.ndarray
    g: np.ndarray
    user_distance: float
    error: float
    trial_id: int = 0


def _perpendicular_basis(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    a = cross(u, helper)
    a /= np.sqrt(a @ a)
    return a, cross(u, a)


def perturb_direction(u: np.ndarray, sigma_rad: float, rng: np.random.Generator) -> np.ndarray:
    """Tilt unit vector ``u`` by a 2D Gaussian angular offset of per-axis ``sigma_rad``."""
    xi = rng.normal(0.0, 1.0, size=2) * sigma_rad
    theta = float(np.hypot(xi[0], xi[1]))
    if theta == 0.0:
        return u.copy()
    a, b = _perpendicular_basis(u)
    axis = (xi[0] * a + xi[1] * b) / theta
    return np.cos(theta) * u + np.sin(theta) * axis


MAX_NOISE_DRAWS = 100


def _solve_reach(sc, nose, shoulder, g, w, u_finger, u_forearm):
    """Place the fingertip at ``nose + r*w`` with the elbow one upper arm from the shoulder.

    When the elbow line passes too far from the shoulder, the shoulder shifts
    toward it by up to ``shoulder_slack_mm``. Returns ``(r, shoulder)`` or None.
    """
    c = nose - sc.hand_mm * u_finger - sc.forearm_mm * u_forearm - shoulder
    cw = float(c @ w)
    perp = c - cw * w
    dperp = float(np.sqrt(perp @ perp))
    if dperp > sc.upper_arm_mm:
        shift = dperp - sc.upper_arm_mm
        if shift > sc.shoulder_slack_mm:
            return None
        shoulder = shoulder + perp * (shift / dperp)
        dperp = sc.upper_arm_mm
    r = -cw + np.sqrt(sc.upper_arm_mm**2 - dperp**2)
    if r <= 0 or r * r >= (g - nose) @ (g - nose):
        return None
    return r, shoulder


def generate_arm_pose(rng_seed, scenario: ScenarioConfig | None = None) -> ArmPose:
    """Draw one pointing pose. Accepts a seed, SeedSequence or Generator."""
    sc = scenario or ScenarioConfig()
    rng = as_generator(rng_seed)

    distance = rng.uniform(*sc.distance_range_mm)
    bearing = np.radians(rng.uniform(-sc.target_bearing_deg, sc.target_bearing_deg))
    target_z = rng.uniform(*sc.target_height_range_mm)
    shoulder_z = sc.shoulder_heights_mm[rng.integers(len(sc.shoulder_heights_mm))]

    # user at the origin facing +x, pointing with the right arm
    g = np.array([distance * np.cos(bearing), distance * np.sin(bearing), target_z])
    shoulder = np.array([0.0, -sc.shoulder_lateral_mm, shoulder_z])
    nose = np.array([sc.nose_forward_mm, 0.0, shoulder_z + sc.nose_above_shoulder_mm])

    w0 = normalize(g - nose)
    if _solve_reach(sc, nose, shoulder, g, w0, w0, w0) is None:
        raise InfeasibleScenarioError("target is out of the arm's reach")
    # large perturbations can make the chain unreachable; redraw those
    for _ in range(MAX_NOISE_DRAWS):
        w = perturb_direction(w0, np.radians(sc.sigma_ef_deg), rng)
        u_finger = perturb_direction(w, np.radians(sc.sigma_if_deg), rng)
        u_forearm = perturb_direction(u_finger, np.radians(sc.sigma_fa_deg), rng)
        solved = _solve_reach(sc, nose, shoulder, g, w, u_finger, u_forearm)
        if solved is not None:
            r, shoulder = solved
            break
    else:
        raise InfeasibleScenarioError("no reachable pose within the noise model")

    fingertip = nose + r * w
    wrist = fingertip - sc.hand_mm * u_finger
    elbow = wrist - sc.forearm_mm * u_forearm
    return ArmPose(shoulder, elbow, wrist, fingertip, nose, g, float(distance))


def extract_measurement(pose: ArmPose, approach: Approach | str, trial_id: int = 0) -> MeasurementSample:
    approach = Approach(approach)
    if approach is Approach.FA:
        p_k, v_k = pose.wrist, pose.wrist - pose.elbow
    elif approach is Approach.IF:
        p_k, v_k = pose.fingertip, pose.fingertip - pose.wrist
    else:
        p_k, v_k = pose.fingertip, pose.fingertip - pose.nose_root
    g = pose.intended_target
    return MeasurementSample(approach, p_k, v_k, g, pose.user_distance,
                             pointing_error(g, p_k, v_k), trial_id)


@dataclass
class ComparisonConfig:
    n_trials: int = 10_000
    seed: int = 0
    bin_mm: float = 500.0
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("trial count must be at least 1")
        if self.bin_mm <= 0:
            raise ValueError("bin width must be positive")


@dataclass
class ApproachStats:
    approach: Approach
    mean_error: float
    std_error: float
    n_trials: int
    # (bin_lo_mm, bin_hi_mm, count, mean, std)
    distance_bins: list[tuple[float, float, int, float, float]]

    def to_dict(self) -> dict:
        return {
            "approach": self.approach.value,
            "mean_error_mm": self.mean_error,
            "std_error_mm": self.std_error,
            "n_trials": self.n_trials,
            "distance_bins": [
                {"lo_mm": lo, "hi_mm": hi, "count": n, "mean_mm": m, "std_mm": s}
                for lo, hi, n, m, s in self.distance_bins
            ],
        }


def simulate_samples(config: ComparisonConfig) -> list[MeasurementSample]:
    """All per-approach samples, ordered by trial then approach."""
    samples = []
    for i in range(config.n_trials):
        pose = generate_arm_pose(trial_rng(config.seed, i), config.scenario)
        samples.extend(extract_measurement(pose, a, i) for a in APPROACHES)
    return samples


def summarize(samples: list[MeasurementSample], config: ComparisonConfig) -> list[ApproachStats]:
    lo, hi = config.scenario.distance_range_mm
    stats = []
    for a in APPROACHES:
        sel = [s for s in samples if s.approach is a]
        if not sel:
            continue
        err = np.array([s.error for s in sel])
        dist = np.array([s.user_distance for s in sel])
        bins = bin_by_distance(ErrorSeries(dist, err), config.bin_mm, start=lo, stop=hi)
        stats.append(ApproachStats(a, float(err.mean()), float(err.std()), len(sel),
                                   [(b.lo, b.hi, b.count, b.mean, b.std) for b in bins]))
    return stats


def run_comparison(config: ComparisonConfig | None = None) -> list[ApproachStats]:
    config = config or ComparisonConfig()
    return summarize(simulate_samples(config), config)


SAMPLE_COLUMNS = ["approach", "distance_mm", "error_mm", "trial_id"]


def sample_rows(samples):
    for s in samples:
        yield {"approach": s.approach.value, "distance_mm": s.user_distance,
               "error_mm": s.error, "trial_id": s.trial_id}


def write_samples_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SAMPLE_COLUMNS)
        for r in sample_rows(samples):
            w.writerow([r["approach"], repr(r["distance_mm"]), repr(r["error_mm"]), r["trial_id"]])


def write_samples_jsonl(path, samples) -> None:
    with open(path, "w") as fh:
        for r in sample_rows(samples):
            fh.write(json.dumps(r) + "\n")


def read_samples_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"approach": Approach(r["approach"]), "distance_mm": float(r["distance_mm"]),
             "error_mm": float(r["error_mm"]), "trial_id": int(r["trial_id"])}
            for r in csv.DictReader(fh)
        ]


def summary_dict(stats: list[ApproachStats], config: ComparisonConfig) -> dict:
    sc = config.scenario
    return {
        "n_trials": config.n_trials,
        "seed": config.seed,
        "sigma_deg": {"FA": sc.sigma_fa_deg, "IF": sc.sigma_if_deg, "EF": sc.sigma_ef_deg},
        "approaches": [s.to_dict() for s in stats],
    }

"""Acceptance criteria, each checked at its stated tolerance and time budget.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion.
"""

import filecmp
import math
import time

import numpy as np
import pytest

from pointsim.cli import main as cli_main
from pointsim.geometry import (
    PointingFeature,
    RigidTransform,
    direction_from_angles,
    pointing_error,
    resolve_target,
)
from pointsim.measure_compare import Approach, ComparisonConfig, run_comparison
from pointsim.metrics import Mask, mae, mask_iou, rmse, wrap_degrees
from pointsim.perception import (
    CALIBRATED_TAG_NOISE,
    Classification,
    DebounceConfig,
    Frame,
    GroundTruth,
    NoiseProfile,
    OracleProvider,
    Tag,
)
from pointsim.pipeline import PipelineConfig, PipelineState, TargetCommand, pipeline_step
from pointsim.simworld import WorldConfig, run_campaign, run_trial

criterion = pytest.mark.criterion


# -- 1 ------------------------------------------------------------------------


@criterion("AC1 floor target exactness")
def test_ac1_resolve_target_exactness():
    rng = np.random.default_rng(20240601)
    n = 100_000
    h = rng.uniform(100.0, 1500.0, n)
    p = np.column_stack([rng.uniform(-3000, 3000, n), rng.uniform(-3000, 3000, n),
                         rng.uniform(-h + 1.0, 2000.0)])
    # pitch strictly downward and clear of the level-pointing gate
    beta = np.radians(rng.uniform(0.01, 89.9, n))
    gamma = np.radians(rng.uniform(-180.0, 180.0, n))
    x = direction_from_angles(beta, gamma)

    t0 = time.perf_counter()
    g = resolve_target(p, x, h)
    elapsed = time.perf_counter() - t0

    assert np.max(np.abs(g[:, 2] + h)) < 1e-9
    assert np.max(np.linalg.norm(np.cross(g - p, x), axis=1)) < 1e-6
    assert elapsed < 1.0


# -- 2 ------------------------------------------------------------------------


def golden_section_line_distance(g, p, v, lo=-1e6, hi=1e6, iters=400):
    """Brute-force min over t in [lo, hi] of |g - (p + t v)|, vectorised over rows."""
    invphi = (math.sqrt(5) - 1) / 2
    f = lambda t: np.linalg.norm(g - (p + t[:, None] * v), axis=1)
    a = np.full(len(g), lo)
    b = np.full(len(g), hi)
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new, d_new = b - invphi * (b - a), a + invphi * (b - a)
        c, d = c_new, d_new
        fc, fd = f(c), f(d)
    return np.minimum(fc, fd)


@criterion("AC2 line-distance oracle")
def test_ac2_pointing_error_matches_brute_force():
    rng = np.random.default_rng(7)
    n = 10_000
    g = rng.uniform(-2000, 2000, (n, 3))
    p = rng.uniform(-2000, 2000, (n, 3))
    v = rng.normal(size=(n, 3))
    v *= rng.uniform(0.1, 10.0, (n, 1)) / np.linalg.norm(v, axis=1, keepdims=True)

    t0 = time.perf_counter()
    got = np.array([pointing_error(g[i], p[i], v[i]) for i in range(n)])
    elapsed = time.perf_counter() - t0

    oracle = golden_section_line_distance(g, p, v)
    assert np.max(np.abs(got - oracle)) < 1e-6
    assert elapsed < 1.0


# -- 3 ------------------------------------------------------------------------


@criterion("AC3 measurement approach comparison")
def test_ac3_compare_measures_reproduces_means():
    t0 = time.perf_counter()
    stats = {s.approach: s for s in run_comparison(ComparisonConfig(n_trials=10_000))}
    elapsed = time.perf_counter() - t0
    targets = {Approach.FA: 491.9, Approach.IF: 333.3, Approach.EF: 157.8}
    for a, target in targets.items():
        assert abs(stats[a].mean_error - target) <= 0.15 * target, (a, stats[a].mean_error)
    assert stats[Approach.EF].mean_error < stats[Approach.IF].mean_error < stats[Approach.FA].mean_error
    assert elapsed < 10.0


# -- 4 ------------------------------------------------------------------------


def _frames(n, tag, seed):
    rng = np.random.default_rng(seed)
    return [Frame(i / 30.0, GroundTruth(True, PointingFeature.from_degrees(
        rng.uniform(-400, 400, 3) + [0, 0, 1500], rng.uniform(5, 60), rng.uniform(-120, 120))),
        frozenset({tag})) for i in range(n)]


@criterion("AC4 perception oracle calibration")
def test_ac4_oracle_reproduces_profiles():
    prov = OracleProvider(NoiseProfile.calibrated(), seed=2024)
    yaw, pitch, pos = [], [], []
    for f in _frames(10_000, Tag.NOMINAL, 1):
        e, g = prov.estimate(f), f.ground_truth.feature
        yaw.append(wrap_degrees(e.gamma_deg - g.gamma_deg))
        pitch.append(e.beta_deg - g.beta_deg)
        pos.append(e.p - g.p)
    assert abs(mae(yaw) - 1.4) <= 0.2
    assert abs(mae(pitch) - 0.61) <= 0.1
    assert abs(rmse(pos) - 61.3) <= 5.0

    for i, tag in enumerate(Tag):
        prov = OracleProvider(NoiseProfile.calibrated(), seed=100 + i)
        acc = np.mean([prov.classify(f).is_pointing for f in _frames(10_000, tag, 50 + i)])
        assert abs(acc - CALIBRATED_TAG_NOISE[tag].success_rate) <= 0.015, (tag, acc)


# -- 5 ------------------------------------------------------------------------


@criterion("AC5 zero-noise end-to-end identity")
def test_ac5_zero_noise_trial_hits_target():
    rec = run_trial(WorldConfig.quadruped().noise_free(), NoiseProfile.zero(), 12345)
    assert not rec.dispatch_failed
    assert rec.reach_error_mm < 1.0


# -- 6 ------------------------------------------------------------------------


@criterion("AC6 robot campaign bands")
def test_ac6_campaign_bands():
    t0 = time.perf_counter()
    _, quad = run_campaign(WorldConfig.quadruped(), NoiseProfile.calibrated(), 200, 2024)
    _, rover = run_campaign(WorldConfig.rover(), NoiseProfile.calibrated(), 200, 2024)
    elapsed = time.perf_counter() - t0
    print(f"\nquadruped: success {quad.success_rate:.3f}, reach "
          f"{quad.mean_reach_error_mm:.0f}+-{quad.std_reach_error_mm:.0f} mm, distance "
          f"{quad.mean_distance_to_target_mm:.0f}+-{quad.std_distance_to_target_mm:.0f} mm")
    print(f"rover: success {rover.success_rate:.3f}, distance "
          f"{rover.mean_distance_to_target_mm:.0f}+-{rover.std_distance_to_target_mm:.0f} mm")
    assert abs(quad.mean_distance_to_target_mm - 3800) < 300
    assert 100.0 <= quad.mean_reach_error_mm <= 650.0
    assert quad.success_rate >= 0.90
    assert abs(rover.mean_distance_to_target_mm - 7200) < 600
    assert 0.75 <= rover.success_rate <= 0.95
    assert elapsed < 60.0


# -- 7 ------------------------------------------------------------------------


class _Scripted:
    def __init__(self, script):
        self.script = script

    def classify(self, frame):
        return self.script[frame.timestamp][0]

    def estimate(self, frame):
        return self.script[frame.timestamp][1]


def _random_stream(rng):
    n = int(rng.integers(0, 120))
    p_true = rng.uniform(0.2, 0.9)
    classes = [Classification(bool(rng.random() < p_true), float(rng.random())) for _ in range(n)]
    feats = [PointingFeature.from_degrees(rng.uniform(-300, 300, 3), rng.uniform(5, 80),
                                          rng.uniform(-179, 179)) for _ in range(n)]
    return classes, feats


@criterion("AC7 pipeline invariants")
def test_ac7_random_streams():
    rng = np.random.default_rng(77)
    A, h = RigidTransform.identity(), 500.0
    for _ in range(1000):
        k, n_settle = int(rng.integers(1, 5)), int(rng.integers(1, 7))
        cfg = PipelineConfig(DebounceConfig(k, float(rng.choice([0.0, 0.5, 0.8]))), n_settle,
                             float(rng.choice([0.0, 0.5, 2.0])))
        classes, feats = _random_stream(rng)
        # a clean gesture at the end checks that no state is a dead end
        tail = k + n_settle + int(cfg.cooldown_s * 10) + 2
        classes += [Classification(True, 1.0)] * tail
        feats += [PointingFeature.from_degrees((0, 0, 0), 30, 10)] * tail
        times = [round(0.1 * i, 6) for i in range(len(classes))]
        prov = _Scripted(dict(zip(times, zip(classes, feats))))

        state, triggers, events = PipelineState(), [], []
        for i, t in enumerate(times):
            before = state.triggers
            state, ev = pipeline_step(state, Frame(t), prov, A, h, cfg)
            if state.triggers > before:
                triggers.append(i)
            if ev is not None:
                events.append((i, ev))
            assert state.frames_remaining >= 0

        ok = [c.is_pointing and c.certainty >= cfg.debounce.threshold for c in classes]
        for j in triggers:
            assert j >= k - 1 and all(ok[j - k + 1:j + 1])
        completed = [j for j in triggers if j + n_settle < len(times)]
        assert [i for i, _ in events] == [j + n_settle for j in completed]
        n_random = len(times) - tail
        assert any(isinstance(e, TargetCommand) and i >= n_random for i, e in events)


# -- 8 ------------------------------------------------------------------------


def _cli_outputs(root, tag):
    out = root / tag
    assert cli_main(["compare-measures", "--trials", "500", "--seed", "3",
                     "--out-dir", str(out / "cmp")]) == 0
    assert cli_main(["compare-measures", "--trials", "200", "--seed", "3", "--format", "jsonl",
                     "--out-dir", str(out / "cmpj")]) == 0
    assert cli_main(["simulate", "--mode", "quadruped", "--trials", "15", "--seed", "7",
                     "--out-dir", str(out / "quad"), "--session-dir", str(out / "sess")]) == 0
    assert cli_main(["simulate", "--mode", "rover", "--trials", "10", "--seed", "7",
                     "--format", "jsonl", "--out-dir", str(out / "rover")]) == 0
    assert cli_main(["replay", str(out / "sess" / "trial_0000.jsonl"),
                     "--out-dir", str(out / "replay")]) == 0
    assert cli_main(["metrics", "--estimates", str(out / "replay" / "estimates.csv"),
                     "--out-dir", str(out / "metrics")]) == 0
    return out


@criterion("AC8 deterministic outputs")
def test_ac8_cli_outputs_byte_identical(tmp_path, capsys):
    a = _cli_outputs(tmp_path, "a")
    b = _cli_outputs(tmp_path, "b")
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b and len(files_a) >= 15
    for rel in files_a:
        assert filecmp.cmp(a / rel, b / rel, shallow=False), rel


# -- 9 ------------------------------------------------------------------------


def _m(*rows):
    return Mask.from_rows(rows)


METRIC_CASES = [
    ("iou identical", lambda: mask_iou(_m("0110", "0110"), _m("0110", "0110")), 1.0),
    ("iou disjoint", lambda: mask_iou(_m("1100", "0000"), _m("0011", "0000")), 0.0),
    ("iou shifted block", lambda: mask_iou(_m("1100", "1100", "0000", "0000"),
                                           _m("0110", "0110", "0000", "0000")), 2 / 6),
    ("iou both empty", lambda: mask_iou(Mask.empty(3, 2), Mask.empty(3, 2)), 1.0),
    ("iou one empty", lambda: mask_iou(Mask.empty(2, 2), _m("01", "00")), 0.0),
    ("iou subset", lambda: mask_iou(_m("111", "111"), _m("100", "000")), 1 / 6),
    ("rmse zero", lambda: rmse([[0, 0, 0], [0, 0, 0]]), 0.0),
    ("rmse 3-4-5", lambda: rmse([[3, 4, 0], [0, 0, 5]]), 5.0),
    ("rmse scalars", lambda: rmse([1.0, -1.0, 1.0, -1.0]), 1.0),
    ("rmse mixed", lambda: rmse([[1, 2, 2], [0, 0, 0]]), math.sqrt(4.5)),
    ("mae symmetric", lambda: mae([3.0, -3.0]), 3.0),
    ("mae wrap 179/-179", lambda: mae([179.0 - (-179.0)]), 2.0),
    ("mae wrap -350", lambda: mae([-350.0, 10.0]), 10.0),
    ("mae half turn", lambda: mae([180.0, -180.0]), 180.0),
    ("mae radians wrap", lambda: mae([2 * math.pi - 0.5], degrees=False), 0.5),
]


@criterion("AC9 metric oracles")
@pytest.mark.parametrize("name,fn,expected", METRIC_CASES, ids=[c[0] for c in METRIC_CASES])
def test_ac9_metric_fixed_cases(name, fn, expected):
    assert abs(fn() - expected) <= 1e-12

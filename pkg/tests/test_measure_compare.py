import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from pointsim.geometry import pointing_error
from pointsim.measure_compare import (
    APPROACHES,
    Approach,
    ArmPose,
    ComparisonConfig,
    InfeasibleScenarioError,
    ScenarioConfig,
    extract_measurement,
    generate_arm_pose,
    perturb_direction,
    read_samples_csv,
    run_comparison,
    simulate_samples,
    summarize,
    write_samples_csv,
)
from pointsim.rng import trial_rng


def _pose(**kw):
    base = dict(shoulder=np.array([0.0, -150, 1450]), elbow=np.zeros(3), wrist=np.zeros(3),
                fingertip=np.zeros(3), nose_root=np.zeros(3), intended_target=np.zeros(3),
                user_distance=3000.0)
    base.update({k: np.asarray(v, float) if k != "user_distance" else v for k, v in kw.items()})
    return ArmPose(**base)


def test_extract_forearm():
    pose = _pose(elbow=(0, 0, 0), wrist=(300, 0, 0), fingertip=(480, 0, 0),
                 intended_target=(3000, 0, 0))
    s = extract_measurement(pose, Approach.FA)
    np.testing.assert_array_equal(s.v_k, [300, 0, 0])
    np.testing.assert_array_equal(s.p_k, [300, 0, 0])


def test_extract_eyes_finger():
    pose = _pose(nose_root=(0, 0, 1600), fingertip=(400, 0, 1500), wrist=(220, 0, 1500),
                 intended_target=(4400, 0, 500))
    s = extract_measurement(pose, "EF")
    np.testing.assert_array_equal(s.v_k, [400, 0, -100])
    np.testing.assert_array_equal(s.p_k, [400, 0, 1500])
    assert s.error == pytest.approx(0.0, abs=1e-9)


def test_extract_index_finger_uses_fingertip():
    pose = _pose(wrist=(100, 0, 1000), fingertip=(280, 0, 1000), intended_target=(3000, 0, 1000))
    s = extract_measurement(pose, Approach.IF)
    np.testing.assert_array_equal(s.p_k, [280, 0, 1000])
    np.testing.assert_array_equal(s.v_k, [180, 0, 0])
    assert s.error == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_noise_free_pose_hits_target_for_if_and_ef(seed):
    pose = generate_arm_pose(seed, ScenarioConfig().noise_free())
    for a in (Approach.IF, Approach.EF):
        s = extract_measurement(pose, a)
        assert s.error < 1e-6
        assert pointing_error(s.g, s.p_k, s.v_k) < 1e-6


@pytest.mark.parametrize("seed", range(20))
def test_pose_segment_lengths_match_arm_model(seed):
    sc = ScenarioConfig()
    pose = generate_arm_pose(seed, sc)
    upper, fore, hand = pose.segment_lengths()
    assert upper <= sc.upper_arm_mm + 1e-6
    assert fore == pytest.approx(sc.forearm_mm, abs=1e-6)
    assert hand == pytest.approx(sc.hand_mm, abs=1e-6)
    assert sc.distance_range_mm[0] <= pose.user_distance <= sc.distance_range_mm[1]


def test_pose_deterministic_under_seed():
    a = generate_arm_pose(42)
    b = generate_arm_pose(42)
    for f in ("shoulder", "elbow", "wrist", "fingertip", "nose_root", "intended_target"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_unreachable_scenario_raises():
    sc = replace(ScenarioConfig(), upper_arm_mm=20.0, forearm_mm=20.0, hand_mm=20.0,
                 shoulder_slack_mm=0.0)
    with pytest.raises(InfeasibleScenarioError):
        generate_arm_pose(0, sc)


def rayleigh_mean_offset(lever_mm, sigma_rad):
    """Mean of lever * sin(theta) for theta Rayleigh-distributed with scale sigma."""
    pdf = lambda t: t / sigma_rad**2 * math.exp(-t * t / (2 * sigma_rad**2))
    val, _ = integrate.quad(lambda t: lever_mm * math.sin(t) * pdf(t), 0, math.pi / 2)
    return val


def test_angular_perturbation_mean_offset_at_three_metres():
    # A ray with a 3 m lever arm and 5 deg per-axis Gaussian tilt.
    sigma = math.radians(5.0)
    rng = np.random.default_rng(123)
    u = np.array([1.0, 0.0, 0.0])
    target = np.array([3000.0, 0.0, 0.0])
    errs = [pointing_error(target, np.zeros(3), perturb_direction(u, sigma, rng))
            for _ in range(10_000)]
    expected = rayleigh_mean_offset(3000.0, sigma)
    assert np.mean(errs) == pytest.approx(expected, rel=0.03)


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.5))
def test_perturb_direction_stays_unit(seed, sigma):
    u = np.array([0.3, -0.4, 0.866])
    u /= np.linalg.norm(u)
    w = perturb_direction(u, sigma, np.random.default_rng(seed))
    assert abs(np.linalg.norm(w) - 1) < 1e-12


def test_stored_error_matches_recomputation():
    for s in simulate_samples(ComparisonConfig(n_trials=200, seed=5)):
        assert s.error == pointing_error(s.g, s.p_k, s.v_k)


def test_zero_noise_means_are_zero_for_if_and_ef():
    cfg = ComparisonConfig(n_trials=200, seed=1, scenario=ScenarioConfig().noise_free())
    stats = {s.approach: s for s in run_comparison(cfg)}
    assert stats[Approach.IF].mean_error < 1e-6
    assert stats[Approach.EF].mean_error < 1e-6


def test_determinism_of_stats():
    cfg = ComparisonConfig(n_trials=300, seed=9)
    a, b = run_comparison(cfg), run_comparison(cfg)
    assert [s.to_dict() for s in a] == [s.to_dict() for s in b]


def test_trial_order_independent():
    cfg = ComparisonConfig(n_trials=50, seed=4)
    full = simulate_samples(cfg)
    pose = generate_arm_pose(trial_rng(4, 37), cfg.scenario)
    single = extract_measurement(pose, Approach.EF, 37)
    match = [s for s in full if s.trial_id == 37 and s.approach is Approach.EF][0]
    assert single.error == match.error


def test_error_grows_with_distance():
    sc = replace(ScenarioConfig(), sigma_fa_deg=0.0, sigma_if_deg=0.0)
    cfg = ComparisonConfig(n_trials=3000, seed=2, scenario=sc)
    ef = [s for s in summarize(simulate_samples(cfg), cfg) if s.approach is Approach.EF][0]
    means = np.array([b[3] for b in ef.distance_bins])
    assert np.all(np.isfinite(means))
    slope = np.polyfit(np.arange(len(means)), means, 1)[0]
    assert slope > 0
    assert means[-1] > 2 * means[0]
    # Tolerate Monte-Carlo wiggle between neighbours but not a real decrease.
    assert np.all(np.diff(means) > -0.15 * means[1:])


def test_bins_cover_one_to_five_metres():
    cfg = ComparisonConfig(n_trials=400, seed=3)
    for s in run_comparison(cfg):
        assert s.n_trials == 400
        assert s.std_error >= 0
        assert [b[0] for b in s.distance_bins] == [1000 + 500 * i for i in range(8)]
        assert sum(b[2] for b in s.distance_bins) == 400


def test_samples_csv_round_trip(tmp_path):
    samples = simulate_samples(ComparisonConfig(n_trials=20, seed=8))
    path = tmp_path / "s.csv"
    write_samples_csv(path, samples)
    rows = read_samples_csv(path)
    assert len(rows) == len(samples) == 20 * len(APPROACHES)
    for r, s in zip(rows, samples):
        assert r["approach"] is s.approach
        assert r["error_mm"] == s.error
        assert r["distance_mm"] == s.user_distance
        assert r["trial_id"] == s.trial_id


def test_config_rejects_zero_trials():
    with pytest.raises(ValueError):
        ComparisonConfig(n_trials=0)

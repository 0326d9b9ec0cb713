"""Regenerate the headline numbers: approach comparison, oracle calibration and robot campaigns.

    python scripts/reproduce_results.py --out results

Writes CSV/JSON files into ``--out`` and prints a short report.
"""

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from pointsim.geometry import PointingFeature
from pointsim.measure_compare import ComparisonConfig, run_comparison, summary_dict
from pointsim.metrics import mae, rmse, wrap_degrees
from pointsim.perception import Frame, GroundTruth, NoiseProfile, OracleProvider, Tag
from pointsim.simworld import WorldConfig, run_campaign, write_summary_json, write_trials_csv


def approach_comparison(out: Path, trials: int, seed: int):
    cfg = ComparisonConfig(n_trials=trials, seed=seed)
    stats = run_comparison(cfg)
    (out / "approach_summary.json").write_text(json.dumps(summary_dict(stats, cfg), indent=2))
    with open(out / "approach_distance_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["approach", "bin_lo_mm", "bin_hi_mm", "count", "mean_error_mm", "std_error_mm"])
        for s in stats:
            for lo, hi, n, mean, std in s.distance_bins:
                w.writerow([s.approach.value, lo, hi, n, mean, std])
    print("approach comparison")
    for s in stats:
        print(f"  {s.approach.value}: {s.mean_error:6.1f} +- {s.std_error:5.1f} mm")


def oracle_calibration(out: Path, frames: int, seed: int):
    rng = np.random.default_rng(seed)
    rows = []
    for i, tag in enumerate(Tag):
        prov = OracleProvider(NoiseProfile.calibrated(), seed=seed + i)
        hits, yaw, pitch, pos = 0, [], [], []
        for j in range(frames):
            f = PointingFeature.from_degrees(rng.uniform(-400, 400, 3) + [0, 0, 1500],
                                             rng.uniform(5, 60), rng.uniform(-120, 120))
            fr = Frame(j / 30.0, GroundTruth(True, f), frozenset({tag}))
            hits += prov.classify(fr).is_pointing
            e = prov.estimate(fr)
            yaw.append(wrap_degrees(e.gamma_deg - f.gamma_deg))
            pitch.append(e.beta_deg - f.beta_deg)
            pos.append(e.p - f.p)
        rows.append({"tag": tag.value, "success_rate": hits / frames,
                     "position_rmse_mm": rmse(pos), "yaw_mae_deg": mae(yaw),
                     "pitch_mae_deg": mae(pitch)})
    with open(out / "oracle_calibration.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print("oracle calibration")
    for r in rows:
        print(f"  {r['tag']:>12}: success {100 * r['success_rate']:5.1f} %, position "
              f"{r['position_rmse_mm']:5.1f} mm, yaw {r['yaw_mae_deg']:5.2f} deg, "
              f"pitch {r['pitch_mae_deg']:5.2f} deg")


def robot_campaigns(out: Path, trials: int, seed: int):
    print("robot campaigns")
    for name, world in (("quadruped", WorldConfig.quadruped()), ("rover", WorldConfig.rover())):
        records, summary = run_campaign(world, NoiseProfile.calibrated(), trials, seed)
        write_trials_csv(out / f"{name}_trials.csv", records)
        write_summary_json(out / f"{name}_summary.json", summary)
        print(f"  {name:>9}: success {100 * summary.success_rate:5.1f} %, reach error "
              f"{summary.mean_reach_error_mm / 1000:.2f} +- {summary.std_reach_error_mm / 1000:.2f} m, "
              f"distance {summary.mean_distance_to_target_mm / 1000:.2f} +- "
              f"{summary.std_distance_to_target_mm / 1000:.2f} m")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--compare-trials", type=int, default=10_000)
    ap.add_argument("--frames", type=int, default=10_000)
    ap.add_argument("--robot-trials", type=int, default=200)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    approach_comparison(out, args.compare_trials, args.seed)
    oracle_calibration(out, args.frames, args.seed)
    robot_campaigns(out, args.robot_trials, args.seed)


if __name__ == "__main__":
    main()

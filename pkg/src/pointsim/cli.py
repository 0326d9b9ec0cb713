"""Command-line interface: ``pointsim {compare-measures,simulate,replay,metrics}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import measure_compare as mc
from . import metrics as mt
from .config import ConfigError, apply_overrides, load_ini, section
from .geometry import RigidTransform
from .perception import (
    DebounceConfig,
    NoiseProfile,
    ReplayLog,
    ReplayParseError,
    ReplayProvider,
    StreamExhausted,
    Tag,
    yaw_supported,
)
from .pipeline import MotionMode, Pipeline, PipelineConfig, TargetCommand, write_events_jsonl
from .simworld import (
    DiscObstacle,
    LidarGaussian,
    RtkDrift,
    WorldConfig,
    run_campaign,
    write_summary_json,
    write_trials_csv,
    write_trials_jsonl,
)

MODES = {"quadruped": MotionMode.DIRECT_GOAL, "rover": MotionMode.FLOOR_LINE}


class UsageError(Exception):
    pass


@dataclass
class CompareSettings:
    trials: int = 10_000
    seed: int = 0
    bin_mm: float = 500.0


@dataclass
class SimulateSettings:
    mode: str = "quadruped"
    trials: int = 15
    seed: int = 0
    profile: str = "nominal"
    localization: str = "default"
    rtk_step_sigma_mm: float = RtkDrift().step_sigma_mm
    rtk_bound_mm: float = RtkDrift().bound_mm
    lidar_sigma_mm: float = LidarGaussian().sigma_mm
    zero_noise: bool = False


@dataclass
class PipelineSettings:
    k: int = 3
    threshold: float = 0.5
    settle_frames: int = 5
    cooldown_s: float = 2.0

    def build(self, mode: MotionMode) -> PipelineConfig:
        try:
            return PipelineConfig(DebounceConfig(self.k, self.threshold), self.settle_frames,
                                  self.cooldown_s, mode)
        except ValueError as exc:
            raise ConfigError(f"[pipeline] {exc}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _settings(obj, cp, name: str, args, flag_map: dict[str, str]):
    obj = apply_overrides(obj, section(cp, name), name)
    for field, attr in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            obj = dataclasses.replace(obj, **{field: value})
    return obj


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_jsonl(path, rows) -> None:
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")


def _check_positive(value, name):
    if value < 1:
        raise ConfigError(f"{name} must be at least 1, got {value}")


# -- compare-measures ---------------------------------------------------------


def cmd_compare_measures(args, cp) -> int:
    st = _settings(CompareSettings(), cp, "compare", args,
                   {"trials": "trials", "seed": "seed", "bin_mm": "bin_mm"})
    _check_positive(st.trials, "trials")
    scenario = apply_overrides(mc.ScenarioConfig(), section(cp, "scenario"), "scenario")
    flags = {k: getattr(args, k) for k in ("sigma_fa_deg", "sigma_if_deg", "sigma_ef_deg")
             if getattr(args, k) is not None}
    try:
        scenario = dataclasses.replace(scenario, **flags)
        config = mc.ComparisonConfig(st.trials, st.seed, st.bin_mm, scenario)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    samples = mc.simulate_samples(config)
    stats = mc.summarize(samples, config)
    out = _out_dir(args)
    if args.format == "csv":
        mc.write_samples_csv(out / "approach_errors.csv", samples)
    else:
        mc.write_samples_jsonl(out / "approach_errors.jsonl", samples)
    _dump_json(out / "summary.json", mc.summary_dict(stats, config))
    for s in stats:
        print(f"{s.approach.value}: mean {s.mean_error:.1f} mm, std {s.std_error:.1f} mm "
              f"over {s.n_trials} trials")
    return 0


# -- simulate -----------------------------------------------------------------


def _parse_obstacles(raw: str) -> tuple:
    obs = []
    for chunk in raw.split(";"):
        if not chunk.strip():
            continue
        try:
            x, y, r = (float(v) for v in chunk.split(","))
        except ValueError:
            raise ConfigError(f"[world] obstacles: expected 'x,y,r; ...', got {chunk!r}") from None
        obs.append(DiscObstacle(x, y, r))
    return tuple(obs)


def build_world(st: SimulateSettings, cp, pipeline: PipelineSettings) -> WorldConfig:
    if st.mode not in MODES:
        raise ConfigError(f"unknown mode {st.mode!r}; choose from {sorted(MODES)}")
    try:
        tag = Tag(st.profile)
    except ValueError:
        raise ConfigError(f"unknown profile {st.profile!r}; choose from "
                          f"{[t.value for t in Tag]}") from None
    base = WorldConfig.quadruped() if st.mode == "quadruped" else WorldConfig.rover()
    if st.localization == "rtk":
        loc = RtkDrift(st.rtk_step_sigma_mm, st.rtk_bound_mm)
    elif st.localization == "lidar":
        loc = LidarGaussian(st.lidar_sigma_mm)
    elif st.localization == "none":
        loc = None
    elif st.localization == "default":
        loc = base.localization
    else:
        raise ConfigError(f"unknown localization {st.localization!r}")
    world_values = section(cp, "world")
    obstacles = _parse_obstacles(world_values.pop("obstacles", ""))
    world = dataclasses.replace(base, localization=loc, user_tag=tag,
                                obstacles=obstacles or base.obstacles,
                                pipeline=pipeline.build(base.mode))
    world = apply_overrides(world, world_values, "world")
    return world.noise_free() if st.zero_noise else world


def cmd_simulate(args, cp) -> int:
    st = _settings(SimulateSettings(), cp, "simulate", args,
                   {"mode": "mode", "trials": "trials", "seed": "seed", "profile": "profile",
                    "localization": "localization", "zero_noise": "zero_noise"})
    _check_positive(st.trials, "trials")
    pipe = _settings(PipelineSettings(), cp, "pipeline", args, {})
    world = build_world(st, cp, pipe)
    if args.no_bench:
        world = dataclasses.replace(world, include_bench=False)
    profile = NoiseProfile.zero() if st.zero_noise else NoiseProfile.calibrated()

    out = _out_dir(args)
    session_dir = None
    if args.session_dir:
        session_dir = Path(args.session_dir)
        session_dir.mkdir(parents=True, exist_ok=True)
    records, summary = run_campaign(world, profile, st.trials, st.seed, session_dir)
    if args.format == "csv":
        write_trials_csv(out / "trials.csv", records)
    else:
        write_trials_jsonl(out / "trials.jsonl", records)
    write_summary_json(out / "summary.json", summary)
    print(f"{st.mode}: {summary.n_trials} trials, success {100 * summary.success_rate:.1f} %, "
          f"reach error {summary.mean_reach_error_mm / 1000:.2f} +- "
          f"{summary.std_reach_error_mm / 1000:.2f} m, distance to target "
          f"{summary.mean_distance_to_target_mm / 1000:.2f} +- "
          f"{summary.std_distance_to_target_mm / 1000:.2f} m")
    return 0


# -- replay -------------------------------------------------------------------


def cmd_replay(args, cp) -> int:
    pipe_settings = _settings(PipelineSettings(), cp, "pipeline", args,
                              {"k": "k", "threshold": "threshold",
                               "settle_frames": "settle_frames", "cooldown_s": "cooldown_s"})
    mode = MODES[args.mode]
    config = pipe_settings.build(mode)
    with ReplayLog(args.log) as log:
        records = list(log)

    pipeline = Pipeline(ReplayProvider(records), RigidTransform.identity(), args.height_mm, config)
    events = pipeline.run(r.frame for r in records)
    for ev in events:
        print(json.dumps(ev.to_json()))

    out = _out_dir(args)
    write_events_jsonl(out / "commands.jsonl", events)
    paired = [r for r in records
              if r.estimate is not None and r.frame.ground_truth is not None
              and r.frame.ground_truth.feature is not None and yaw_supported(r.estimate)]
    table = mt.EstimateTable(
        t=np.array([r.frame.timestamp for r in paired]),
        gt_p=np.array([r.frame.ground_truth.feature.p for r in paired]).reshape(-1, 3),
        est_p=np.array([r.estimate.p for r in paired]).reshape(-1, 3),
        gt_beta_deg=np.array([r.frame.ground_truth.feature.beta_deg for r in paired]),
        est_beta_deg=np.array([r.estimate.beta_deg for r in paired]),
        gt_gamma_deg=np.array([r.frame.ground_truth.feature.gamma_deg for r in paired]),
        est_gamma_deg=np.array([r.estimate.gamma_deg for r in paired]),
    )
    if args.format == "csv":
        mt.write_estimates_csv(out / "estimates.csv", table)
    else:
        _write_jsonl(out / "estimates.jsonl",
                     (dict(zip(mt.ESTIMATE_COLUMNS, map(float, row))) for row in table.rows()))
    n_cmd = sum(isinstance(e, TargetCommand) for e in events)
    print(f"{len(records)} frames, {n_cmd} command(s), {len(events) - n_cmd} dispatch failure(s)",
          file=sys.stderr)
    return 0


# -- metrics ------------------------------------------------------------------


def cmd_metrics(args, cp) -> int:
    if not args.iou and not args.estimates:
        raise UsageError("metrics needs --iou A B and/or --estimates FILE")
    out = _out_dir(args)
    result = {}
    if args.iou:
        a, b = (mt.read_pbm(p) for p in args.iou)
        result["iou"] = mt.mask_iou(a, b)
        print(f"iou: {result['iou']:.6f}")
    if args.estimates:
        table = mt.read_estimates_csv(args.estimates)
        summary, curves, hists = mt.evaluate_estimates(table, args.bin_mm, args.bin_deg)
        result.update(summary)
        print(f"position rmse: {summary['position_rmse_mm']:.2f} mm, yaw mae: "
              f"{summary['yaw_mae_deg']:.3f} deg, pitch mae: {summary['pitch_mae_deg']:.3f} deg "
              f"over {summary['n']} frames")
        if args.format == "csv":
            mt.write_distance_bins_csv(out / "distance_bins.csv", curves)
            mt.write_angle_histograms_csv(out / "angle_histograms.csv", hists)
        else:
            _write_jsonl(out / "distance_bins.jsonl", (
                {"quantity": q, "bin_lo_mm": b.lo, "bin_hi_mm": b.hi, "count": b.count,
                 "mean": b.mean, "std": b.std} for q, bins in curves.items() for b in bins))
            _write_jsonl(out / "angle_histograms.jsonl", (
                {"quantity": q, "bin_lo_deg": b.lo, "bin_hi_deg": b.hi, "count": b.count,
                 "mean_abs_error_deg": b.mean_abs_error} for q, bins in hists.items() for b in bins))
    _dump_json(out / "metrics.json", result)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="master seed for stochastic runs")
    shared.add_argument("--config", help="INI-style configuration file")
    shared.add_argument("--out-dir", default=".", help="directory for output files")
    shared.add_argument("--format", choices=("csv", "jsonl"), default="csv",
                        help="format of tabular outputs")

    parser = argparse.ArgumentParser(prog="pointsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare-measures", parents=[shared],
                       help="compare forearm, index-finger and eye-finger pointing measurements")
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--bin-mm", type=_positive_float)
    p.add_argument("--sigma-fa-deg", type=float)
    p.add_argument("--sigma-if-deg", type=float)
    p.add_argument("--sigma-ef-deg", type=float)
    p.set_defaults(func=cmd_compare_measures)

    p = sub.add_parser("simulate", parents=[shared], help="run a robot reach campaign")
    p.add_argument("--mode", choices=sorted(MODES))
    p.add_argument("--trials", type=_positive_int)
    p.add_argument("--profile", choices=[t.value for t in Tag],
                   help="scenario tag whose noise profile the user frames carry")
    p.add_argument("--localization", choices=("default", "rtk", "lidar", "none"))
    p.add_argument("--zero-noise", action="store_true", default=None,
                   help="disable perception and localization noise")
    p.add_argument("--no-bench", action="store_true", help="rover mode without the target bench")
    p.add_argument("--session-dir", help="write one replay log per trial into this directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", parents=[shared], help="drive the pipeline from a session log")
    p.add_argument("log", help="JSON Lines session log")
    p.add_argument("--mode", choices=sorted(MODES), default="quadruped")
    p.add_argument("--height-mm", type=_positive_float, default=WorldConfig.quadruped().camera_height_mm,
                   help="camera-mount height above the floor")
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--settle-frames", type=_positive_int)
    p.add_argument("--cooldown-s", type=float)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("metrics", parents=[shared], help="IoU, RMSE/MAE and binned error curves")
    p.add_argument("--iou", nargs=2, metavar=("A.pbm", "B.pbm"))
    p.add_argument("--estimates", help="estimates CSV as written by replay")
    p.add_argument("--bin-mm", type=_positive_float, default=500.0)
    p.add_argument("--bin-deg", type=_positive_float, default=15.0)
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cp = load_ini(args.config) if args.config else None
        return args.func(args, cp)
    except (ConfigError, UsageError) as exc:
        print(f"pointsim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ReplayParseError, StreamExhausted, ValueError, csv.Error) as exc:
        print(f"pointsim {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

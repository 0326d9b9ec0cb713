"""Fit the FA/IF/EF angular noise sigmas to the reported overall mean errors.

The noise chains (EF feeds IF feeds FA), so the fit is sequential: EF first,
then IF with EF fixed, then FA with both fixed. Each stage is a coarse grid
search followed by a finer grid around the best point.

    python scripts/fit_measure_noise.py --trials 4000
"""

import argparse
from dataclasses import replace

import numpy as np

from pointsim.measure_compare import ComparisonConfig, ScenarioConfig, run_comparison

TARGET_MM = {"FA": 491.9, "IF": 333.3, "EF": 157.8}


def mean_error(scenario, approach, trials, seed):
    stats = run_comparison(ComparisonConfig(n_trials=trials, seed=seed, scenario=scenario))
    return next(s.mean_error for s in stats if s.approach.value == approach)


def fit_one(scenario, field, approach, trials, seed):
    best = None
    for grid in (np.arange(0.5, 8.01, 0.5), None):
        if grid is None:
            grid = np.round(np.arange(best - 0.45, best + 0.451, 0.05), 3)
        errs = []
        for sigma in grid:
            sc = replace(scenario, **{field: float(sigma)})
            errs.append(abs(mean_error(sc, approach, trials, seed) - TARGET_MM[approach]))
        best = float(grid[int(np.argmin(errs))])
        print(f"  {field}: best {best:.2f} deg (|err| {min(errs):.1f} mm)")
    return replace(scenario, **{field: best})


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args()

    sc = ScenarioConfig(sigma_fa_deg=0.0, sigma_if_deg=0.0, sigma_ef_deg=0.0)
    for field, approach in (("sigma_ef_deg", "EF"), ("sigma_if_deg", "IF"), ("sigma_fa_deg", "FA")):
        print(f"fitting {approach}")
        sc = fit_one(sc, field, approach, args.trials, args.seed)

    stats = run_comparison(ComparisonConfig(n_trials=10_000, seed=0, scenario=sc))
    print(f"fitted sigmas: FA={sc.sigma_fa_deg} IF={sc.sigma_if_deg} EF={sc.sigma_ef_deg}")
    for s in stats:
        print(f"  {s.approach.value}: {s.mean_error:.1f} mm (target {TARGET_MM[s.approach.value]})")


if __name__ == "__main__":
    main()

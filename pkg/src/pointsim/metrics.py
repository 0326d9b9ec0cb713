"""Evaluation metrics: mask IoU, RMSE/MAE, distance-binned curves and polar error histograms.

File helpers read and write plain PBM (``P1``) masks and the CSV tables produced here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class EmptyInputError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mask:
    """Binary mask stored as a ``(height, width)`` boolean grid."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.size != self.width * self.height:
            raise ValueError(f"mask has {bits.size} cells, expected {self.width}x{self.height}")
        object.__setattr__(self, "bits", bits.reshape(self.height, self.width))

    @classmethod
    def from_rows(cls, rows) -> "Mask":
        arr = np.array([[bool(int(c)) for c in r] if isinstance(r, str) else r for r in rows], dtype=bool)
        if arr.ndim != 2:
            raise ValueError("mask rows must have equal length")
        return cls(arr.shape[1], arr.shape[0], arr)

    @classmethod
    def empty(cls, width: int, height: int) -> "Mask":
        return cls(width, height, np.zeros((height, width), dtype=bool))

    @property
    def area(self) -> int:
        return int(self.bits.sum())


def mask_iou(a: Mask, b: Mask) -> float:
    """Intersection over union; two empty masks score 1.0."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"mask sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    union = np.logical_or(a.bits, b.bits).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a.bits, b.bits).sum() / union)


def read_pbm(path) -> Mask:
    """Read a plain-text PBM (``P1``) file. ``1`` marks a masked pixel."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError(f"{path}: not a plain PBM file (missing P1 header)")
    try:
        width, height = int(tokens[1]), int(tokens[2])
    except (IndexError, ValueError):
        raise ValueError(f"{path}: malformed PBM dimensions") from None
    # P1 allows pixels without separating whitespace
    pixels = "".join(tokens[3:])
    if len(pixels) != width * height or set(pixels) - {"0", "1"}:
        raise ValueError(f"{path}: expected {width * height} pixels of 0/1, got {len(pixels)}")
    bits = np.frombuffer(pixels.encode(), dtype=np.uint8) == ord("1")
    return Mask(width, height, bits)


def write_pbm(path, mask: Mask) -> None:
    with open(path, "w") as fh:
        fh.write(f"P1\n{mask.width} {mask.height}\n")
        for row in mask.bits:
            fh.write(" ".join("1" if b else "0" for b in row) + "\n")


def wrap_degrees(a):
    """Wrap degrees into ``(-180, 180]``."""
    w = 180.0 - np.mod(180.0 - np.asarray(a, dtype=float), 360.0)
    return float(w) if np.ndim(w) == 0 else w


def rmse(deltas) -> float:
    """Root mean square of error magnitudes.

    ``deltas`` is either a sequence of scalars or of vectors; vectors contribute
    their Euclidean norm.
    """
    d = np.asarray(deltas, dtype=float)
    if d.size == 0:
        raise EmptyInputError("rmse of an empty sequence")
    sq = d**2 if d.ndim == 1 else np.sum(d**2, axis=-1)
    return float(np.sqrt(np.mean(sq)))


def mae(deltas, degrees: bool = True) -> float:
    """Mean absolute angle difference with wrap-around (179 vs -179 counts as 2)."""
    d = np.asarray(deltas, dtype=float)
    if d.size == 0:
        raise EmptyInputError("mae of an empty sequence")
    if degrees:
        w = wrap_degrees(d)
    else:
        w = np.pi - np.mod(np.pi - d, 2 * np.pi)
    return float(np.mean(np.abs(w)))


@dataclass
class ErrorSeries:
    distances: np.ndarray
    errors: np.ndarray
    unit: str = "mm"

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=float).ravel()
        self.errors = np.asarray(self.errors, dtype=float).ravel()
        if self.distances.shape != self.errors.shape:
            raise ValueError("distances and errors differ in length")
        if np.any(self.distances <= 0):
            raise ValueError("distances must be positive")
        if not np.all(np.isfinite(self.errors)):
            raise ValueError("errors must be finite")

    def __len__(self) -> int:
        return len(self.distances)


@dataclass(frozen=True)
class DistanceBin:
    lo: float
    hi: float
    count: int
    mean: float
    std: float


def _bin_edges(lo: float, hi: float, width: float) -> np.ndarray:
    n = max(1, math.ceil((hi - lo) / width - 1e-9))
    return lo + width * np.arange(n + 1)


def bin_by_distance(series: ErrorSeries, bin_mm: float, start=None, stop=None) -> list[DistanceBin]:
    """Mean and population std of errors in consecutive distance bins.

    Bins start at ``start`` (default: smallest distance) and extend until they
    cover ``stop`` (default: largest distance). Samples outside ``[start, stop]``
    are dropped; a sample exactly on the top edge lands in the last bin.
    """
    if bin_mm <= 0:
        raise ValueError("bin width must be positive")
    if len(series) == 0:
        raise EmptyInputError("no samples to bin")
    lo = float(series.distances.min()) if start is None else float(start)
    hi = float(series.distances.max()) if stop is None else float(stop)
    edges = _bin_edges(lo, hi, bin_mm)
    keep = (series.distances >= lo) & (series.distances <= hi)
    d, e = series.distances[keep], series.errors[keep]
    idx = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, len(edges) - 2)
    bins = []
    for i in range(len(edges) - 1):
        sel = e[idx == i]
        if sel.size:
            bins.append(DistanceBin(float(edges[i]), float(edges[i + 1]), int(sel.size),
                                    float(sel.mean()), float(sel.std())))
        else:
            bins.append(DistanceBin(float(edges[i]), float(edges[i + 1]), 0, math.nan, math.nan))
    return bins


@dataclass(frozen=True)
class AngleBin:
    lo: float
    hi: float
    count: int
    mean_abs_error: float


def angle_histogram(angles_deg, errors_deg, bin_deg: float) -> list[AngleBin]:
    """Polar histogram over the full circle ``[-180, 180)``.

    Each bin holds the number of samples whose angle falls in it and the mean
    absolute (wrapped) error of those samples.
    """
    if bin_deg <= 0:
        raise ValueError("bin width must be positive")
    a = wrap_degrees(np.atleast_1d(np.asarray(angles_deg, dtype=float)))
    err = np.abs(wrap_degrees(np.atleast_1d(np.asarray(errors_deg, dtype=float))))
    if a.size == 0:
        raise EmptyInputError("no samples for histogram")
    if a.shape != err.shape:
        raise ValueError("angles and errors differ in length")
    a = np.where(a >= 180.0, a - 360.0, a)  # fold +180 onto -180
    edges = _bin_edges(-180.0, 180.0, bin_deg)
    idx = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, len(edges) - 2)
    out = []
    for i in range(len(edges) - 1):
        sel = err[idx == i]
        mean = float(sel.mean()) if sel.size else math.nan
        out.append(AngleBin(float(edges[i]), float(min(edges[i + 1], 180.0)), int(sel.size), mean))
    return out


DISTANCE_BIN_COLUMNS = ["quantity", "bin_lo_mm", "bin_hi_mm", "count", "mean", "std"]
ANGLE_BIN_COLUMNS = ["quantity", "bin_lo_deg", "bin_hi_deg", "count", "mean_abs_error_deg"]


def write_distance_bins_csv(path, curves: dict[str, list[DistanceBin]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DISTANCE_BIN_COLUMNS)
        for name, bins in curves.items():
            for b in bins:
                w.writerow([name, repr(b.lo), repr(b.hi), b.count, repr(b.mean), repr(b.std)])


def read_distance_bins_csv(path) -> dict[str, list[DistanceBin]]:
    curves: dict[str, list[DistanceBin]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            curves.setdefault(row["quantity"], []).append(DistanceBin(
                float(row["bin_lo_mm"]), float(row["bin_hi_mm"]), int(row["count"]),
                float(row["mean"]), float(row["std"])))
    return curves


def write_angle_histograms_csv(path, hists: dict[str, list[AngleBin]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ANGLE_BIN_COLUMNS)
        for name, bins in hists.items():
            for b in bins:
                w.writerow([name, repr(b.lo), repr(b.hi), b.count, repr(b.mean_abs_error)])


def read_angle_histograms_csv(path) -> dict[str, list[AngleBin]]:
    hists: dict[str, list[AngleBin]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            hists.setdefault(row["quantity"], []).append(AngleBin(
                float(row["bin_lo_deg"]), float(row["bin_hi_deg"]), int(row["count"]),
                float(row["mean_abs_error_deg"])))
    return hists


ESTIMATE_COLUMNS = [
    "t", "distance_mm",
    "gt_x_mm", "gt_y_mm", "gt_z_mm", "est_x_mm", "est_y_mm", "est_z_mm",
    "gt_beta_deg", "est_beta_deg", "gt_gamma_deg", "est_gamma_deg",
]


@dataclass
class EstimateTable:
    """Paired ground-truth and estimated pointing features, one row per frame."""

    t: np.ndarray
    gt_p: np.ndarray
    est_p: np.ndarray
    gt_beta_deg: np.ndarray
    est_beta_deg: np.ndarray
    gt_gamma_deg: np.ndarray
    est_gamma_deg: np.ndarray

    @property
    def distance_mm(self) -> np.ndarray:
        return np.linalg.norm(self.gt_p, axis=-1)

    def __len__(self) -> int:
        return len(self.t)

    def rows(self):
        for i in range(len(self)):
            yield [self.t[i], self.distance_mm[i], *self.gt_p[i], *self.est_p[i],
                   self.gt_beta_deg[i], self.est_beta_deg[i],
                   self.gt_gamma_deg[i], self.est_gamma_deg[i]]


def read_estimates_csv(path) -> EstimateTable:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(ESTIMATE_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append([float(row[c]) for c in ESTIMATE_COLUMNS])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    a = np.array(rows, dtype=float).reshape(-1, len(ESTIMATE_COLUMNS))
    return EstimateTable(a[:, 0], a[:, 2:5], a[:, 5:8], a[:, 8], a[:, 9], a[:, 10], a[:, 11])


def write_estimates_csv(path, table: EstimateTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ESTIMATE_COLUMNS)
        for r in table.rows():
            w.writerow([repr(float(x)) for x in r])


def evaluate_estimates(table: EstimateTable, bin_mm: float = 500.0, bin_deg: float = 15.0):
    """Summary metrics, distance curves and angle histograms for an estimate table."""
    if len(table) == 0:
        raise EmptyInputError("estimate table is empty")
    pos_err = np.linalg.norm(table.est_p - table.gt_p, axis=-1)
    yaw_d = wrap_degrees(table.est_gamma_deg - table.gt_gamma_deg)
    pitch_d = wrap_degrees(table.est_beta_deg - table.gt_beta_deg)
    summary = {
        "n": len(table),
        "position_rmse_mm": rmse(table.est_p - table.gt_p),
        "yaw_mae_deg": mae(yaw_d),
        "pitch_mae_deg": mae(pitch_d),
    }
    dist = table.distance_mm
    curves = {
        "position_mm": bin_by_distance(ErrorSeries(dist, pos_err, "mm"), bin_mm),
        "yaw_deg": bin_by_distance(ErrorSeries(dist, np.abs(yaw_d), "deg"), bin_mm),
        "pitch_deg": bin_by_distance(ErrorSeries(dist, np.abs(pitch_d), "deg"), bin_mm),
    }
    hists = {
        "yaw": angle_histogram(table.gt_gamma_deg, yaw_d, bin_deg),
        "pitch": angle_histogram(table.gt_beta_deg, pitch_d, bin_deg),
    }
    return summary, curves, hists

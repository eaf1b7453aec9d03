"""Width validation against ground-truth profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WidthRecord:
    image_id: str
    profile_id: str
    u: np.ndarray
    v: np.ndarray
    width: float
    truth_width: float

    @property
    def error(self) -> float:
        return self.width - self.truth_width


@dataclass(frozen=True)
class WidthStats:
    n_truth: int
    n_matched: int
    success: float  # percentage of truth profiles with a measurement
    mean_width: float
    mean_truth: float
    mean_error: float
    sigma_chi: float  # sample standard deviation of the width errors
    slope: float
    intercept: float

    def to_json(self) -> dict:
        return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in self.__dict__.items()}


def match_profiles(truth_rows, measured_points, match_radius: float = 3.0) -> tuple[list[WidthRecord], list]:
    """Pair each truth profile with the measured cross-section whose center is nearest its midpoint.

    Returns the matched records and the truth rows without a measurement
    within ``match_radius`` pixels.
    """
    centers = np.array([p.c for p in measured_points]) if measured_points else np.zeros((0, 2))
    matched, failed = [], []
    for row in truth_rows:
        mid = (np.asarray(row["u"]) + np.asarray(row["v"])) / 2
        if len(centers) == 0:
            failed.append(row)
            continue
        d = np.linalg.norm(centers - mid, axis=1)
        k = int(np.argmin(d))
        if d[k] > match_radius:
            failed.append(row)
            continue
        p = measured_points[k]
        matched.append(WidthRecord(str(row["image_id"]), str(row["profile_id"]), np.asarray(p.u), np.asarray(p.v),
                                   float(np.linalg.norm(np.asarray(p.u) - np.asarray(p.v))), float(row["width"])))
    return matched, failed


def width_statistics(records, n_truth: int | None = None) -> WidthStats:
    """Success rate, mean width, error spread and the measured-vs-truth regression line."""
    n_truth = len(records) if n_truth is None else n_truth
    w = np.array([r.width for r in records], dtype=float)
    gt = np.array([r.truth_width for r in records], dtype=float)
    chi = w - gt
    nan = float("nan")
    if len(records) >= 2 and np.ptp(gt) > 0:
        slope, intercept = (float(c) for c in np.polyfit(gt, w, 1))
    else:
        slope, intercept = nan, nan
    return WidthStats(
        n_truth=int(n_truth),
        n_matched=len(records),
        success=100.0 * len(records) / n_truth if n_truth else 0.0,
        mean_width=float(w.mean()) if len(w) else nan,
        mean_truth=float(gt.mean()) if len(gt) else nan,
        mean_error=float(chi.mean()) if len(chi) else nan,
        sigma_chi=float(chi.std(ddof=1)) if len(chi) >= 2 else (0.0 if len(chi) == 1 else nan),
        slope=slope,
        intercept=intercept,
    )

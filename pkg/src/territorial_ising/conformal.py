"""Split-conformal prediction intervals for per-unit hub probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyCalibration

ZERO_WIDTH = "zero_width"
INTERMEDIATE = "intermediate"
FULL = "full"
CLASSES = (ZERO_WIDTH, INTERMEDIATE, FULL)


@dataclass(frozen=True)
class ConformalConfig:
    alpha: float = 0.05
    calibration_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.calibration_fraction < 1:
            raise ValueError("calibration_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class PredictionInterval:
    unit_id: object
    center: float
    lower_raw: float
    upper_raw: float
    lower: float
    upper: float
    covered: bool | None = None
    adaptivity_class: str = ZERO_WIDTH

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _same_length(*arrays):
    sizes = {np.asarray(a).size for a in arrays}
    if len(sizes) != 1:
        raise DimensionMismatch(f"inputs have differing lengths {sorted(sizes)}")


def nonconformity_scores(y, y_hat, sigma) -> np.ndarray:
    """|y - y_hat| / sigma; zero-difficulty units score 0 if exact, +inf otherwise."""
    _same_length(y, y_hat, sigma)
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    resid = np.abs(y - y_hat)
    out = np.empty_like(resid)
    pos = sigma > 0
    out[pos] = resid[pos] / sigma[pos]
    out[~pos] = np.where(resid[~pos] == 0, 0.0, np.inf)
    return out


def conformal_quantile(scores, alpha: float) -> float:
    """The ceil((1 - alpha)(n + 1))-th smallest score, or +inf when that exceeds n."""
    s = np.sort(np.asarray(scores, dtype=float).ravel())
    n = s.size
    if n == 0:
        raise EmptyCalibration("no calibration scores")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    # guard against (1 - alpha)(n + 1) landing a hair above an integer
    k = math.ceil(round((1 - alpha) * (n + 1), 9))
    if k > n:
        return math.inf
    return float(s[max(k, 1) - 1])


def adaptivity_class(lower: float, upper: float) -> str:
    if lower == upper:
        return ZERO_WIDTH
    if lower == 0.0 and upper == 1.0:
        return FULL
    return INTERMEDIATE


def prediction_intervals(y_hat, sigma, q_hat: float, unit_ids: Sequence | None = None,
                         y_true=None) -> list[PredictionInterval]:
    """y_hat +/- q_hat * sigma, clamped to [0, 1]; inf * 0 counts as 0."""
    _same_length(y_hat, sigma)
    y_hat = np.asarray(y_hat, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not (q_hat >= 0):
        raise ValueError("q_hat must be non-negative")
    ids = list(unit_ids) if unit_ids is not None else list(range(y_hat.size))
    if len(ids) != y_hat.size:
        raise DimensionMismatch(f"{len(ids)} unit ids for {y_hat.size} predictions")
    if y_true is not None:
        _same_length(y_hat, y_true)
        y_true = np.asarray(y_true, dtype=float)

    half = np.zeros_like(sigma)
    pos = sigma > 0
    half[pos] = q_hat * sigma[pos]
    lo_raw = y_hat - half
    hi_raw = y_hat + half
    lo = np.maximum(0.0, lo_raw)
    hi = np.minimum(1.0, hi_raw)

    out = []
    for k, uid in enumerate(ids):
        covered = None if y_true is None else bool(lo[k] <= y_true[k] <= hi[k])
        out.append(PredictionInterval(uid, float(y_hat[k]), float(lo_raw[k]), float(hi_raw[k]),
                                      float(lo[k]), float(hi[k]), covered,
                                      adaptivity_class(float(lo[k]), float(hi[k]))))
    return out


def coverage_report(intervals: Sequence[PredictionInterval], y_true) -> dict:
    """Empirical coverage, mean interval width, relative width and class shares."""
    y = np.asarray(y_true, dtype=float)
    if len(intervals) != y.size:
        raise DimensionMismatch(f"{len(intervals)} intervals for {y.size} truths")
    if y.size == 0:
        raise EmptyCalibration("no intervals to assess")
    lo = np.array([iv.lower for iv in intervals])
    hi = np.array([iv.upper for iv in intervals])
    covered = (lo <= y) & (y <= hi)
    miw = float(np.mean(hi - lo))
    span = float(y.max() - y.min())
    degenerate = span == 0.0
    classes = [iv.adaptivity_class for iv in intervals]
    counts = {c: classes.count(c) for c in CLASSES}
    n = len(classes)
    return {
        "coverage": float(covered.mean()),
        "miw": miw,
        "riw": miw if degenerate else miw / span,
        "riw_degenerate_range": degenerate,
        "class_counts": counts,
        "class_shares": {c: counts[c] / n for c in CLASSES},
        "n": n,
        "uncovered": [iv.unit_id for iv, c in zip(intervals, covered) if not c],
    }


def split_units(n: int, calibration_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded partition of range(n) into sorted calibration and test index arrays."""
    n_cal = int(round(calibration_fraction * n))
    if n_cal < 1 or n_cal >= n:
        raise EmptyCalibration(f"split of {n} units leaves an empty calibration or test part")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_cal]), np.sort(perm[n_cal:])


def split_conformal(y, y_hat, sigma, config: ConformalConfig, unit_ids: Sequence | None = None):
    """Calibrate on a seeded subset of units and build intervals for every unit.

    Returns (intervals for all units in input order, per-unit split labels,
    summary dict). Coverage in the summary is computed on the test units;
    ``coverage_all_units`` also counts the calibration units.
    """
    _same_length(y, y_hat, sigma)
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ids = list(unit_ids) if unit_ids is not None else list(range(y.size))
    cal, test = split_units(y.size, config.calibration_fraction, config.seed)
    scores = nonconformity_scores(y[cal], y_hat[cal], sigma[cal])
    q_hat = conformal_quantile(scores, config.alpha)
    intervals = prediction_intervals(y_hat, sigma, q_hat, ids, y_true=y)
    labels = np.array(["test"] * y.size, dtype=object)
    labels[cal] = "calibration"
    test_report = coverage_report([intervals[k] for k in test], y[test])
    all_report = coverage_report(intervals, y)
    summary = {
        "alpha": config.alpha,
        "calibration_fraction": config.calibration_fraction,
        "n_calibration": int(cal.size),
        "n_test": int(test.size),
        "q_hat": q_hat if math.isfinite(q_hat) else "inf",
        **{k: test_report[k] for k in ("coverage", "miw", "riw", "riw_degenerate_range",
                                       "class_counts", "class_shares")},
        "out_of_interval_units": test_report["uncovered"],
        "coverage_all_units": all_report["coverage"],
        "miw_all_units": all_report["miw"],
        "class_shares_all_units": all_report["class_shares"],
        "out_of_interval_units_all": all_report["uncovered"],
    }
    return intervals, labels.tolist(), summary

"""Error measures used to score a detection against ground truth."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrialMetrics:
    coef_error: float
    misclass_ratio: float
    wall_time: float
    status: str


def coef_error(theta, theta_hat) -> float:
    """``||theta - theta_hat|| / (||theta|| + ||theta_hat||)``, 0 when both vanish."""
    a = np.asarray(theta, dtype=float)
    b = np.asarray(theta_hat, dtype=float)
    den = np.linalg.norm(a) + np.linalg.norm(b)
    if den == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / den)


def misclass_ratio(true_inliers, labels) -> float:
    """Mislabelled coordinates divided by the number of true inliers.

    Both arguments are boolean masks with True meaning inlier. The ratio can
    exceed 1. NaN is returned when there are no true inliers.
    """
    t = np.asarray(true_inliers, dtype=bool)
    lab = np.asarray(labels, dtype=bool)
    if t.shape != lab.shape:
        raise ValueError("masks must have equal length")
    n_in = int(t.sum())
    if n_in == 0:
        return math.nan
    return float(np.count_nonzero(t != lab) / n_in)

"""Two-stage detector: greedy erasure, then big-M branch and bound on the survivors.

A fit on at least ``r + 1`` stage-2 inliers determines the coefficient
vector, after which every one of the ``d`` coordinates is relabelled by its
residual. Coordinates the greedy stage threw away get a second chance there.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, RankDeficientError
from .greedy import GreedyConfig, GreedyTrace, erase_until_consistent, greedy_erase
from .linalg import as_matrix, as_vector, least_squares
from .milp import (NOISELESS, MilpProblem, MilpSolution, choose_big_m, solve_escalating,
                   warm_start_feasible)


@dataclass(frozen=True)
class GlimpsConfig:
    removal_fraction: float = 0.40
    lam: float = NOISELESS
    time_limit: float = 60.0
    tau: float | None = None
    big_m_safety: float = 4.0
    sigma: float | None = None
    max_escalations: int = 3
    node_limit: int | None = None

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.lam)

    def resolve_tau(self, x: np.ndarray) -> float:
        """Explicit ``tau``, else 3 sigma for a known positive sigma, else 1e-6 (1 + ||x||_inf)."""
        if self.tau is not None:
            if not self.tau > 0:
                raise ConfigError("tau must be positive")
            return float(self.tau)
        if self.sigma is None and not self.noiseless:
            raise ConfigError("noisy mode needs tau or a known sigma")
        if self.sigma:
            return 3.0 * self.sigma
        return 1e-6 * (1.0 + float(np.max(np.abs(x))))


@dataclass
class DetectionResult:
    inliers: np.ndarray          # 0-based, over all d coordinates
    theta_hat: np.ndarray
    residuals: np.ndarray
    labels: np.ndarray           # True = inlier
    recovered: bool
    tau: float
    stage1_trace: GreedyTrace = field(default_factory=GreedyTrace)
    stage2: MilpSolution | None = None
    stage2_labels: np.ndarray | None = None
    survivors: np.ndarray | None = None
    wall_time: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "residual", "label"])
            for i, (res, lab) in enumerate(zip(self.residuals, self.labels), start=1):
                w.writerow([i, repr(float(res)), "inlier" if lab else "outlier"])


def classify_all(u, x, theta_hat, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Label every coordinate inlier iff ``|x_i - u_i theta_hat| <= tau``.

    Returns ``(labels, residuals)``.
    """
    if not tau > 0:
        raise ConfigError("tau must be positive")
    u = as_matrix(u)
    x = as_vector(x)
    residuals = np.abs(x - u @ np.asarray(theta_hat, dtype=float))
    return residuals <= tau, residuals


def greedy_fit(us: np.ndarray, xs: np.ndarray, tau: float) -> np.ndarray:
    """LS fit after continuing greedy erasure on the survivors until they agree.

    Equals the plain survivor fit when the survivors already fit to ``tau``.
    """
    kept, _ = erase_until_consistent(us, xs, tau)
    return least_squares(us[kept], xs[kept])


def warm_start(us: np.ndarray, xs: np.ndarray, theta0: np.ndarray, big_m: float, tau: float,
               lam: float):
    """Initial ``(z, theta)``: outliers are survivors whose residual exceeds tau."""
    z0 = (np.abs(xs - us @ theta0) > tau).astype(np.int8)
    if not warm_start_feasible(us, xs, big_m, z0, theta0, lam):
        z0 = np.ones(xs.size, dtype=np.int8)
    return z0, theta0


def finish(u, x, survivors: np.ndarray, sol: MilpSolution, tau: float, **extra) -> DetectionResult:
    """Refit on the stage-2 inliers and classify all coordinates."""
    d, r = u.shape
    stage2_inl = survivors[sol.z == 0]
    stage2_labels = np.zeros(d, dtype=bool)
    stage2_labels[stage2_inl] = True
    theta_hat = None
    if stage2_inl.size >= r + 1:
        try:
            theta_hat = least_squares(u[stage2_inl], x[stage2_inl])
        except RankDeficientError:
            theta_hat = None
    if theta_hat is not None:
        labels, residuals = classify_all(u, x, theta_hat, tau)
        recovered = True
    else:
        theta_hat = np.asarray(sol.theta, dtype=float)
        residuals = np.abs(x - u @ theta_hat)
        labels = stage2_labels.copy()
        recovered = False
    return DetectionResult(np.flatnonzero(labels), theta_hat, residuals, labels, recovered, tau,
                           stage2=sol, stage2_labels=stage2_labels, survivors=survivors, **extra)


def glimps_detect(u, x, cfg: GlimpsConfig | None = None) -> DetectionResult:
    """Greedy erasure of a fixed fraction, then warm-started branch and bound."""
    t0 = time.perf_counter()
    cfg = cfg or GlimpsConfig()
    u = as_matrix(u)
    x = as_vector(x)
    d, r = u.shape
    if x.size != d:
        raise ConfigError(f"basis has {d} rows but observation has {x.size} entries")
    if d < r + 2:
        raise ConfigError("need d >= r + 2")
    tau = cfg.resolve_tau(x)
    survivors, trace = greedy_erase(u, x, GreedyConfig(cfg.removal_fraction, r + 1))
    us, xs = u[survivors], x[survivors]
    theta0 = greedy_fit(us, xs, tau)
    big_m = choose_big_m(us, xs, theta0, cfg.big_m_safety)
    z0, theta0 = warm_start(us, xs, theta0, big_m, tau, cfg.lam)
    budget = max(cfg.time_limit - (time.perf_counter() - t0), 0.0)
    prob = MilpProblem(us, xs, big_m, cfg.lam, budget, warm_start=(z0, theta0),
                       node_limit=cfg.node_limit)
    sol = solve_escalating(prob, cfg.max_escalations)
    return finish(u, x, survivors, sol, tau, stage1_trace=trace,
                  wall_time=time.perf_counter() - t0)

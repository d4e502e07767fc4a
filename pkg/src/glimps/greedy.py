"""First stage: greedy erasure of the coordinates that least fit the subspace.

At every step each active coordinate is tentatively dropped, the remaining
entries of ``x`` are projected onto the correspondingly restricted basis, and
the coordinate whose removal gives the largest ratio ``||x_hat|| / ||x||`` is
erased for good.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import floor

import numpy as np

from .errors import ConfigError, DegenerateActiveSetError, RankDeficientError, ZeroVectorError
from .linalg import as_matrix, as_vector, least_squares, projection_ratio

# Ratios closer than this to the step maximum count as tied.
TIE_TOL = 1e-12
# Leave-one-out leverage above 1 - LEVERAGE_TOL means the removal drops rank.
LEVERAGE_TOL = 1e-10


@dataclass(frozen=True)
class GreedyStep:
    removed_index: int
    ratio: float
    active_count_before: int


@dataclass
class GreedyTrace:
    steps: list[GreedyStep] = field(default_factory=list)
    projection_calls: int = 0

    @property
    def removed(self) -> np.ndarray:
        return np.asarray([s.removed_index for s in self.steps], dtype=np.intp)

    def to_csv(self, path) -> None:
        """Write ``step, removed_index, ratio`` rows (1-based step and index)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "removed_index", "ratio"])
            for k, s in enumerate(self.steps, start=1):
                w.writerow([k, s.removed_index + 1, repr(s.ratio)])


@dataclass(frozen=True)
class GreedyConfig:
    removal_fraction: float = 0.4
    min_survivors: int = 0

    def removal_count(self, d: int) -> int:
        # tiny epsilon keeps e.g. 0.29 * 100 from flooring to 28
        return int(floor(self.removal_fraction * d + 1e-9))


def _pick(candidates: np.ndarray, ratios: np.ndarray) -> tuple[int, float]:
    ok = np.isfinite(ratios)
    if not np.any(ok):
        raise DegenerateActiveSetError("every single removal leaves a rank-deficient basis")
    best = ratios[ok].max()
    tied = candidates[ok & (ratios >= best - TIE_TOL)]
    i = int(tied.min())
    return i, float(ratios[candidates == i][0])


def candidate_ratios_naive(u: np.ndarray, x: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Projection ratio after dropping each active coordinate, one QR solve each.

    Entries are NaN where the reduced basis is rank deficient.
    """
    out = np.full(active.size, np.nan)
    keep = np.ones(active.size, dtype=bool)
    for k in range(active.size):
        keep[k] = False
        rows = active[keep]
        try:
            out[k] = projection_ratio(u[rows], x[rows])
        except ZeroVectorError:
            out[k] = 1.0
        except RankDeficientError:
            pass
        keep[k] = True
    return out


def candidate_ratios_fast(u: np.ndarray, x: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Same quantity as :func:`candidate_ratios_naive` via leave-one-out downdating.

    With ``h_i`` the leverage and ``e_i`` the residual of the full active fit,
    removing row ``i`` leaves a residual sum of squares ``RSS - e_i^2 / (1 - h_i)``.
    """
    ua, xa = u[active], x[active]
    q, rr = np.linalg.qr(ua)
    d = np.abs(np.diag(rr))
    if d.size == 0 or d.min() <= 1e-10 * d.max():
        return np.full(active.size, np.nan)
    h = np.einsum("ij,ij->i", q, q)
    e = xa - q @ (q.T @ xa)
    rss = float(e @ e)
    xx = float(xa @ xa)
    out = np.full(active.size, np.nan)
    valid = 1.0 - h > LEVERAGE_TOL
    rss_i = np.maximum(rss - e[valid] ** 2 / (1.0 - h[valid]), 0.0)
    nx_i = xx - xa[valid] ** 2
    zero = nx_i <= 1e-28 * max(xx, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.sqrt(np.clip(1.0 - rss_i / nx_i, 0.0, None))
    ratio[zero] = 1.0
    out[valid] = ratio
    return out


def best_removal(u, x, active, fast: bool = True) -> tuple[int, float]:
    """Coordinate in ``active`` whose removal maximizes the projection ratio.

    Returns ``(index, ratio)`` with a 0-based index; ties within ``TIE_TOL``
    go to the smallest index.
    """
    u = as_matrix(u)
    x = as_vector(x)
    active = np.asarray(active, dtype=np.intp)
    if active.size < u.shape[1] + 2:
        raise ConfigError(f"need at least r+2={u.shape[1] + 2} active coordinates, have {active.size}")
    ratios = (candidate_ratios_fast if fast else candidate_ratios_naive)(u, x, active)
    return _pick(active, ratios)


def greedy_erase(u, x, cfg: GreedyConfig | None = None, *, count: int | None = None,
                 fast: bool = True) -> tuple[np.ndarray, GreedyTrace]:
    """Remove ``floor(removal_fraction * d)`` coordinates greedily.

    ``count`` overrides the fraction when given. Returns the 0-based survivor
    set and the trace of removals.
    """
    u = as_matrix(u)
    x = as_vector(x)
    d, r = u.shape
    if x.size != d:
        raise ConfigError(f"basis has {d} rows but observation has {x.size} entries")
    cfg = cfg or GreedyConfig()
    if not 0.0 <= cfg.removal_fraction < 1.0:
        raise ConfigError("removal_fraction must lie in [0, 1)")
    c = cfg.removal_count(d) if count is None else int(count)
    floor_ = max(cfg.min_survivors, r + 1)
    if c < 0 or c > d - floor_:
        raise ConfigError(f"cannot remove {c} of {d} coordinates and keep {floor_}")
    active = np.arange(d)
    trace = GreedyTrace()
    for _ in range(c):
        i, ratio = best_removal(u, x, active, fast=fast)
        trace.projection_calls += active.size
        trace.steps.append(GreedyStep(i, ratio, active.size))
        active = active[active != i]
    return active, trace


def erase_until_consistent(u, x, tau: float, *, min_survivors: int = 0, active=None,
                           fast: bool = True) -> tuple[np.ndarray, GreedyTrace]:
    """Greedy erasure run until the survivors fit the subspace.

    Stops as soon as the least-squares fit on the survivors has every residual
    at most ``tau``, or when only ``max(min_survivors, r + 1)`` remain.
    ``active`` resumes erasure from an existing survivor set.
    """
    u = as_matrix(u)
    x = as_vector(x)
    d, r = u.shape
    floor_ = max(min_survivors, r + 1)
    active = np.arange(d) if active is None else np.asarray(active, dtype=np.intp)
    trace = GreedyTrace()
    while True:
        try:
            theta = least_squares(u[active], x[active])
            if np.max(np.abs(x[active] - u[active] @ theta)) <= tau:
                break
        except RankDeficientError:
            pass
        if active.size <= floor_:
            break
        i, ratio = best_removal(u, x, active, fast=fast)
        trace.projection_calls += active.size
        trace.steps.append(GreedyStep(i, ratio, active.size))
        active = active[active != i]
    return active, trace

"""Comparison methods and the brute-force consensus oracle."""
from __future__ import annotations

import enum
import itertools
import math
import time

import numpy as np

from .errors import BudgetError, ConfigError, RankDeficientError
from .greedy import GreedyConfig, erase_until_consistent, greedy_erase
from .linalg import as_matrix, as_vector, least_squares
from .lp import solve_lp
from .milp import MilpProblem, choose_big_m, solve_escalating
from .pipeline import DetectionResult, GlimpsConfig, classify_all, finish, glimps_detect


class BaselineKind(str, enum.Enum):
    GREEDY = "greedy"
    MILP = "milp"
    GLIMPS = "glimps"
    L1 = "l1"
    GREEDY_L1 = "greedy-l1"
    ORACLE = "oracle"


def l1_fit(u, x) -> np.ndarray:
    """Least absolute deviations fit as an LP over ``theta`` and split residuals.

    ``u theta + e_plus - e_minus = x`` with ``e_plus, e_minus >= 0``, minimizing
    ``sum(e_plus + e_minus)``.
    """
    u = as_matrix(u)
    x = as_vector(x)
    d, r = u.shape
    s = np.linalg.svd(u, compute_uv=False)
    if d < r or s[-1] <= 1e-10 * s[0]:
        raise RankDeficientError(int(np.count_nonzero(s > 1e-10 * s[0])), r)
    eye = np.eye(d)
    a_eq = np.hstack([u, eye, -eye])
    c = np.concatenate([np.zeros(r), np.ones(2 * d)])
    bounds = [(None, None)] * r + [(0.0, None)] * (2 * d)
    res = solve_lp(c, A_eq=a_eq, b_eq=x, bounds=bounds)
    if res.status != "optimal":
        raise RuntimeError(f"l1 LP ended with status {res.status}")
    return res.x[:r]


def _result(u, x, theta, tau, t0, survivors=None, trace=None) -> DetectionResult:
    labels, residuals = classify_all(u, x, theta, tau)
    kw = {} if trace is None else {"stage1_trace": trace}
    return DetectionResult(np.flatnonzero(labels), np.asarray(theta), residuals, labels, True,
                           tau, survivors=survivors, stage2_labels=None,
                           wall_time=time.perf_counter() - t0, **kw)


def l1_detect(u, x, tau: float) -> DetectionResult:
    t0 = time.perf_counter()
    return _result(u, x, l1_fit(u, x), tau, t0)


def greedy_plus_l1(u, x, removal_count: int, tau: float) -> DetectionResult:
    """Greedy erasure of ``removal_count`` coordinates, l1 fit on the rest."""
    t0 = time.perf_counter()
    u = as_matrix(u)
    x = as_vector(x)
    d, r = u.shape
    if d - removal_count < r + 1:
        raise ConfigError("removal leaves fewer than r+1 coordinates")
    survivors, trace = greedy_erase(u, x, GreedyConfig(0.0, r + 1), count=removal_count)
    theta = l1_fit(u[survivors], x[survivors])
    return _result(u, x, theta, tau, t0, survivors, trace)


def greedy_only(u, x, tau: float, removal_count: int | None = None) -> DetectionResult:
    """Greedy erasure alone.

    Without ``removal_count`` coordinates are erased until the survivors fit
    the subspace to within ``tau``; the survivor fit then labels everything.
    """
    t0 = time.perf_counter()
    u = as_matrix(u)
    x = as_vector(x)
    r = u.shape[1]
    if removal_count is None:
        survivors, trace = erase_until_consistent(u, x, tau)
    else:
        survivors, trace = greedy_erase(u, x, GreedyConfig(0.0, r + 1), count=removal_count)
    theta = least_squares(u[survivors], x[survivors])
    return _result(u, x, theta, tau, t0, survivors, trace)


def milp_only(u, x, cfg: GlimpsConfig | None = None) -> DetectionResult:
    """Branch and bound on all coordinates, no greedy stage and no warm start."""
    t0 = time.perf_counter()
    cfg = cfg or GlimpsConfig()
    u = as_matrix(u)
    x = as_vector(x)
    tau = cfg.resolve_tau(x)
    theta0 = least_squares(u, x)
    big_m = choose_big_m(u, x, theta0, cfg.big_m_safety)
    prob = MilpProblem(u, x, big_m, cfg.lam, cfg.time_limit, node_limit=cfg.node_limit)
    sol = solve_escalating(prob, cfg.max_escalations)
    return finish(u, x, np.arange(x.size), sol, tau, wall_time=time.perf_counter() - t0)


def brute_force_consensus(u, x, tol: float, max_d: int = 25, override: bool = False,
                          cond_max: float = 1e10) -> tuple[np.ndarray, np.ndarray]:
    """Largest set of coordinates fit exactly by a theta through some r-subset.

    Every r-subset with a well-conditioned restriction (condition number at
    most ``cond_max``) proposes a theta; its consensus is every coordinate
    with residual at most ``tol``. Returns the largest consensus (ties to the
    lexicographically smallest set, 0-based) and the least-squares refit on it.
    """
    u = as_matrix(u)
    x = as_vector(x)
    d, r = u.shape
    if d > max_d and not override:
        raise BudgetError(f"C({d}, {r}) = {math.comb(d, r)} subsets exceeds the d <= {max_d} guard")
    best: tuple[int, ...] = ()
    best_theta = np.zeros(r)
    for subset in itertools.combinations(range(d), r):
        a = u[list(subset)]
        if np.linalg.cond(a) > cond_max:
            continue
        theta = np.linalg.solve(a, x[list(subset)])
        cons = tuple(np.flatnonzero(np.abs(x - u @ theta) <= tol))
        if len(cons) > len(best) or (len(cons) == len(best) and cons < best):
            best, best_theta = cons, theta
    idx = np.asarray(best, dtype=np.intp)
    if idx.size >= r:
        try:
            best_theta = least_squares(u[idx], x[idx])
        except RankDeficientError:
            pass
    return idx, best_theta


def run_method(kind, u, x, cfg: GlimpsConfig, *, greedy_l1_count: int | None = None) -> DetectionResult:
    """Dispatch one method by its tag."""
    kind = BaselineKind(kind)
    tau = cfg.resolve_tau(as_vector(x))
    if kind is BaselineKind.GLIMPS:
        return glimps_detect(u, x, cfg)
    if kind is BaselineKind.MILP:
        return milp_only(u, x, cfg)
    if kind is BaselineKind.GREEDY:
        return greedy_only(u, x, tau)
    if kind is BaselineKind.L1:
        return l1_detect(u, x, tau)
    if kind is BaselineKind.GREEDY_L1:
        if greedy_l1_count is None:
            greedy_l1_count = GreedyConfig(cfg.removal_fraction).removal_count(len(x))
        return greedy_plus_l1(u, x, greedy_l1_count, tau)
    t0 = time.perf_counter()
    idx, theta = brute_force_consensus(u, x, tau)
    return _result(u, x, theta, tau, t0)

"""Second stage: big-M inlier selection solved by branch and bound.

Noiseless model, over the survivor coordinates::

    min  sum(z)   s.t.  |x - U theta| <= M z,   z binary, theta free

Noisy model::

    min  sum(z) + lam * ||w||^2   s.t.  |x - U theta - w| <= M z

``z_i = 1`` flags coordinate ``i`` as an outlier. ``||z||^2`` equals ``sum(z)``
for binary ``z`` so the noiseless objective is linear.

Node relaxations fix each coordinate to inlier (0), outlier (1) or leave it
free (-1). Noiseless nodes are bounded by the LP relaxation; once the fixed
inliers pin down ``theta`` the node is evaluated exactly. Noisy nodes are
bounded by ``#outliers fixed + lam * RSS(fixed inliers)``.
"""
from __future__ import annotations

import functools
import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, RankDeficientError
from .linalg import as_matrix, as_vector, least_squares
from .lp import BigMRelaxation, LPTimeout

log = logging.getLogger(__name__)

NOISELESS = math.inf
FEAS_TOL = 1e-7
BIG_M_FLOOR = 1e-6

OPTIMAL = "Optimal"
TIME_LIMIT = "FeasibleTimeLimit"
INFEASIBLE = "Infeasible"

LOG_EVERY = 500
# Extra rows (beyond r) in the pool searched by the subset heuristic, at the
# root and at every other node.
POOL_EXTRA_ROOT = 10
POOL_EXTRA = 5


def choose_big_m(u, x, theta_init, safety: float = 2.0) -> float:
    """``safety * max_i |x_i - u_i theta_init|``, floored at ``BIG_M_FLOOR``."""
    if safety < 1:
        raise ConfigError("big-M safety factor must be >= 1")
    u = as_matrix(u)
    x = as_vector(x)
    theta_init = as_vector(theta_init)
    return max(float(safety * np.max(np.abs(x - u @ theta_init))), BIG_M_FLOOR)


@dataclass(frozen=True)
class MilpProblem:
    basis: np.ndarray
    obs: np.ndarray
    big_m: float
    lam: float = NOISELESS
    time_limit: float = 60.0
    gap_tol: float | None = None
    warm_start: tuple[np.ndarray, np.ndarray] | None = None
    node_limit: int | None = None

    def __post_init__(self):
        u = as_matrix(self.basis)
        x = as_vector(self.obs)
        object.__setattr__(self, "basis", u)
        object.__setattr__(self, "obs", x)
        if u.shape[0] != x.size:
            raise ConfigError(f"basis has {u.shape[0]} rows, observation {x.size} entries")
        if not self.big_m > 0:
            raise ConfigError("big_m must be positive")
        if not self.lam >= 0:
            raise ConfigError("lambda must be nonnegative")
        if self.warm_start is not None:
            z0, th0 = self.warm_start
            z0 = np.asarray(z0).astype(np.int8)
            th0 = as_vector(th0)
            if z0.shape != (x.size,) or th0.shape != (u.shape[1],):
                raise ConfigError("warm start has wrong shape")
            if not warm_start_feasible(u, x, self.big_m, z0, th0, self.lam):
                raise ConfigError("warm start violates the big-M constraints")
            object.__setattr__(self, "warm_start", (z0, th0))

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.lam)

    @property
    def gap(self) -> float:
        if self.gap_tol is not None:
            return self.gap_tol
        return 0.0 if self.noiseless else 1e-6


@dataclass
class MilpSolution:
    z: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    objective: float
    status: str
    nodes_explored: int = 0
    wall_time: float = 0.0
    best_bound: float = -math.inf
    big_m: float = math.nan
    escalations: int = 0

    @property
    def inliers(self) -> np.ndarray:
        """0-based positions (within the problem's rows) with ``z == 0``."""
        return np.flatnonzero(self.z == 0)


def warm_start_feasible(u, x, big_m, z, theta, lam=NOISELESS) -> bool:
    z = np.asarray(z)
    if not np.all((z == 0) | (z == 1)):
        return False
    if not math.isinf(lam):
        # w absorbs any residual in the noisy model
        return True
    res = np.abs(x - u @ theta)
    return bool(np.all(res[z == 0] <= FEAS_TOL) and np.all(res <= big_m + FEAS_TOL))


def _ls_or_none(a, b):
    try:
        return least_squares(a, b)
    except RankDeficientError:
        return None


@functools.lru_cache(maxsize=64)
def _combinations(n: int, k: int) -> np.ndarray:
    out = np.array(list(itertools.combinations(range(n), k)), dtype=np.intp).reshape(-1, k)
    out.flags.writeable = False
    return out


def _full_rank(a: np.ndarray) -> bool:
    if a.shape[0] < a.shape[1]:
        return False
    s = np.linalg.svd(a, compute_uv=False)
    return bool(s[-1] > 1e-10 * s[0])


@dataclass(order=True)
class _Node:
    bound: float
    neg_depth: int
    seq: int
    fix: np.ndarray = field(compare=False)


class _Search:
    """Best-bound branch and bound with depth-first dives."""

    def __init__(self, p: MilpProblem, record: list | None = None):
        self.p = p
        self.U = p.basis
        self.x = p.obs
        self.n, self.r = self.U.shape
        self.M = float(p.big_m)
        self.lam = float(p.lam)
        self.record = record
        self.best: tuple[float, np.ndarray, np.ndarray] | None = None
        self.seq = 0
        self.nodes = 0
        self._relax: BigMRelaxation | None = None
        self._deadline: float | None = None
        if p.warm_start is not None:
            z0, th0 = p.warm_start
            self._offer(*self._score(z0.astype(bool), th0))

    # -- incumbent bookkeeping ------------------------------------------------
    @property
    def incumbent(self) -> float:
        return self.best[0] if self.best is not None else math.inf

    def _offer(self, obj, z, theta):
        if obj < self.incumbent:
            self.best = (obj, z.astype(np.int8), theta.copy())

    def _score(self, zmask: np.ndarray, theta: np.ndarray):
        """Objective and ``(z, theta)`` of a feasible assignment."""
        if self.p.noiseless:
            return float(zmask.sum()), zmask, theta
        w = self._slack(zmask, theta)
        return float(zmask.sum() + self.lam * (w @ w)), zmask, theta

    def _slack(self, zmask, theta):
        res = self.x - self.U @ theta
        return np.where(zmask, res - np.clip(res, -self.M, self.M), res)

    def _pruned(self, bound: float) -> bool:
        inc = self.incumbent
        if inc == math.inf or bound == -math.inf:
            return False
        if bound == math.inf:
            return True
        if self.p.noiseless:
            return math.ceil(bound - 1e-6) >= inc - self.p.gap
        return bound >= inc - self.p.gap * max(1.0, abs(inc))

    # -- node relaxations -------------------------------------------------
    def _lp(self, fix):
        """Big-M LP relaxation with the node's fixings; returns (value, theta, z_free).

        ``value`` excludes the constant contributed by coordinates fixed to 1.
        """
        if self._relax is None:
            self._relax = BigMRelaxation(self.U, self.x, self.M)
        res = self._relax.solve(fix, self._deadline)
        if res.status != "optimal":
            return None
        free = fix < 0
        z = res.x[self.r:]
        return res.fun - np.count_nonzero(fix == 1), res.x[:self.r], z[free]

    def _complete_noiseless(self, fix, theta):
        """Cheapest completion of the node given ``theta`` (None if infeasible)."""
        a = np.abs(self.x - self.U @ theta)
        if np.any(a[fix == 0] > FEAS_TOL) or np.any(a > self.M + FEAS_TOL):
            return None
        z = np.where(fix == 1, True, np.where(fix == 0, False, a > FEAS_TOL))
        return float(z.sum()), z, theta

    def _eval_noiseless(self, fix):
        """Returns ``(bound, branch_var, prefer_one)``; branch_var None closes the node."""
        zeros = np.flatnonzero(fix == 0)
        n_ones = int(np.count_nonzero(fix == 1))
        if zeros.size >= self.r and _full_rank(self.U[zeros]):
            theta = least_squares(self.U[zeros], self.x[zeros])
            cand = self._complete_noiseless(fix, theta)
            if cand is None:
                return math.inf, None, False
            self._offer(*cand)
            return cand[0], None, False

        out = self._lp(fix)
        if out is None:
            return math.inf, None, False
        val, theta, zf = out
        bound = n_ones + max(val, 0.0)
        free = np.flatnonzero(fix < 0)

        for cand in self._lp_heuristics(fix, theta):
            self._offer(*cand)

        frac = (zf > 1e-9) & (zf < 1 - 1e-9)
        if not np.any(frac):
            return bound, None, False
        res = np.abs(self.x[free] - self.U[free] @ theta)
        dist = np.abs(zf - 0.5)
        dist[~frac] = np.inf
        best = dist.min()
        tied = np.flatnonzero(dist <= best + 1e-12)
        j = tied[np.argmax(res[tied])]
        return bound, int(free[j]), True

    def _lp_heuristics(self, fix, theta):
        cand = self._complete_noiseless(fix, theta)
        if cand is not None:
            yield cand
        a = np.abs(self.x - self.U @ theta)
        scale = 1e-6 * (1.0 + np.max(np.abs(self.x)))
        support = np.flatnonzero((fix == 0) | ((fix < 0) & (a <= scale)))
        if support.size >= self.r:
            th = _ls_or_none(self.U[support], self.x[support])
            if th is not None:
                cand = self._complete_noiseless(fix, th)
                if cand is not None:
                    yield cand
        cand = self._subset_heuristic(fix, a)
        if cand is not None:
            yield cand

    def _subset_heuristic(self, fix, a):
        """Exact fits through every r-subset of a small pool of likely inliers.

        The pool holds the rows fixed to zero plus the free rows with the
        smallest residuals under the node's LP solution.
        """
        r = self.r
        zeros = np.flatnonzero(fix == 0)
        if zeros.size >= r:
            return None
        free = np.flatnonzero(fix < 0)
        need = r - zeros.size
        extra = POOL_EXTRA_ROOT if free.size == self.n else POOL_EXTRA
        k = min(free.size, need + extra)
        if k < need:
            return None
        pool = free[np.argsort(a[free], kind="stable")[:k]]
        picks = pool[_combinations(k, need)]
        combos = np.hstack([np.broadcast_to(zeros, (picks.shape[0], zeros.size)), picks])
        mats = self.U[combos]
        norms = np.prod(np.linalg.norm(mats, axis=2), axis=1)
        ok = np.abs(np.linalg.det(mats)) > 1e-10 * norms
        if not np.any(ok):
            return None
        combos, mats = combos[ok], mats[ok]
        thetas = np.linalg.solve(mats, self.x[combos][:, :, None])[:, :, 0]
        res = np.abs(self.x[None, :] - thetas @ self.U.T)
        feas = np.all(res <= self.M + FEAS_TOL, axis=1)
        if zeros.size:
            feas &= np.all(res[:, zeros] <= FEAS_TOL, axis=1)
        if not np.any(feas):
            return None
        flagged = (res > FEAS_TOL) | (fix == 1)[None, :]
        cost = np.where(feas, flagged.sum(axis=1), np.iinfo(np.int64).max)
        j = int(np.argmin(cost))
        if cost[j] >= self.incumbent:
            return None
        # polish through the whole consistent set, then re-check feasibility
        keep = np.flatnonzero(~flagged[j])
        th = _ls_or_none(self.U[keep], self.x[keep])
        cand = self._complete_noiseless(fix, th) if th is not None else None
        if cand is None or cand[0] > cost[j]:
            cand = self._complete_noiseless(fix, thetas[j])
        return cand

    def _rss(self, rows):
        if rows.size == 0:
            return 0.0, None
        a, b = self.U[rows], self.x[rows]
        th, *_ = np.linalg.lstsq(a, b, rcond=None)
        e = b - a @ th
        return float(e @ e), th

    def _refit_noisy(self, fix, theta):
        """Alternate between labelling by ``lam * res^2 < 1`` and refitting."""
        zmask = None
        for _ in range(10):
            res = self.x - self.U @ theta
            new = np.where(fix == 1, True, np.where(fix == 0, False, self.lam * res * res >= 1.0))
            if zmask is not None and np.array_equal(new, zmask):
                break
            zmask = new
            inl = np.flatnonzero(~zmask)
            if inl.size < self.r:
                break
            th = _ls_or_none(self.U[inl], self.x[inl])
            if th is None:
                break
            theta = th
        return zmask, theta

    def _fit_for(self, zmask, fallback):
        inl = np.flatnonzero(~zmask)
        th = _ls_or_none(self.U[inl], self.x[inl]) if inl.size >= self.r else None
        if th is None:
            if inl.size:
                th, *_ = np.linalg.lstsq(self.U[inl], self.x[inl], rcond=None)
            else:
                th = fallback
        return th

    def _eval_noisy(self, fix):
        zeros = np.flatnonzero(fix == 0)
        n_ones = int(np.count_nonzero(fix == 1))
        rss, th0 = self._rss(zeros)
        bound = n_ones + self.lam * rss
        free = np.flatnonzero(fix < 0)
        if free.size == 0:
            zmask = fix == 1
            theta = self._fit_for(zmask, th0 if th0 is not None else np.zeros(self.r))
            self._offer(*self._score(zmask, theta))
            return bound, None, False

        if zeros.size >= self.r and _full_rank(self.U[zeros]):
            theta = th0
        else:
            out = self._lp(fix)
            if out is None:
                theta = th0 if th0 is not None else np.zeros(self.r)
            else:
                theta = out[1]
        zmask, th = self._refit_noisy(fix, theta)
        th = self._fit_for(zmask, th)
        self._offer(*self._score(zmask, th))

        res = np.abs(self.x[free] - self.U[free] @ theta)
        j = int(np.argmax(res))
        return bound, int(free[j]), bool(self.lam * res[j] ** 2 >= 1.0)

    # -- driver -------------------------------------------------------------
    def run(self) -> MilpSolution:
        t0 = time.perf_counter()
        deadline = t0 + self.p.time_limit
        self._deadline = deadline
        evaluate = self._eval_noiseless if self.p.noiseless else self._eval_noisy
        heap: list[_Node] = []
        dive: _Node | None = _Node(-math.inf, 0, 0, np.full(self.n, -1, dtype=np.int8))
        status = OPTIMAL
        while dive is not None or heap:
            if time.perf_counter() >= deadline or (
                    self.p.node_limit is not None and self.nodes >= self.p.node_limit):
                status = TIME_LIMIT
                break
            node = dive if dive is not None else heapq.heappop(heap)
            dive = None
            if self._pruned(node.bound):
                continue
            try:
                bound, var, prefer_one = evaluate(node.fix)
            except LPTimeout:
                dive = node  # unexplored, still counts toward the best bound
                status = TIME_LIMIT
                break
            self.nodes += 1
            bound = max(bound, node.bound)
            if self.record is not None:
                self.record.append((node.fix.copy(), bound, self.incumbent))
            if self.nodes % LOG_EVERY == 0:
                self._log(heap, node.bound, t0)
            if var is None or self._pruned(bound):
                continue
            kids = []
            for val in (1, 0) if prefer_one else (0, 1):
                fix = node.fix.copy()
                fix[var] = val
                self.seq += 1
                kids.append(_Node(bound, node.neg_depth - 1, self.seq, fix))
            dive = kids[0]
            heapq.heappush(heap, kids[1])

        wall = time.perf_counter() - t0
        if status == OPTIMAL:
            best_bound = self.incumbent
        else:
            pending = [n.bound for n in heap if not self._pruned(n.bound)]
            if dive is not None:
                pending.append(dive.bound)
            best_bound = min([self.incumbent] + pending)
        self._log(heap, best_bound, t0)
        if self.best is None:
            return MilpSolution(np.ones(self.n, dtype=np.int8), np.zeros(self.r), np.zeros(self.n),
                                math.inf, INFEASIBLE, self.nodes, wall, best_bound, self.M)
        obj, z, theta = self.best
        if self.p.noiseless:
            w = np.zeros(self.n)
        else:
            w = self._slack(z.astype(bool), theta)
        return MilpSolution(z, theta, w, obj, status, self.nodes, wall, best_bound, self.M)

    def _log(self, heap, bound, t0):
        inc = self.incumbent
        gap = inc - bound if math.isfinite(inc) and math.isfinite(bound) else math.inf
        log.debug("node=%d bound=%.6g incumbent=%.6g gap=%.6g t=%.3f",
                  self.nodes, bound, inc, gap, time.perf_counter() - t0)


def solve_noiseless(p: MilpProblem, record: list | None = None) -> MilpSolution:
    """Minimum number of outlier flags for the exact-fit big-M model."""
    if not p.noiseless:
        raise ConfigError("solve_noiseless needs the noiseless lambda sentinel")
    if p.obs.size < p.basis.shape[1] + 1:
        raise ConfigError("need at least r+1 coordinates")
    sol = _Search(p, record).run()
    assert sol.status == INFEASIBLE or np.all(
        np.abs(p.obs - p.basis @ sol.theta)[sol.z == 0] <= FEAS_TOL)
    return sol


def solve_noisy(p: MilpProblem, record: list | None = None) -> MilpSolution:
    """Minimize ``sum(z) + lam * ||w||^2`` by branch and bound."""
    if p.noiseless:
        raise ConfigError("solve_noisy needs a finite lambda")
    return _Search(p, record).run()


def solve(p: MilpProblem, record: list | None = None) -> MilpSolution:
    return solve_noiseless(p, record) if p.noiseless else solve_noisy(p, record)


def solve_escalating(p: MilpProblem, max_escalations: int = 3) -> MilpSolution:
    """Solve, then double M and re-solve until the objective stops improving.

    All solves share ``p.time_limit``. Stability can only be checked after a
    certified optimum (or a proof of infeasibility, which a small M can cause),
    so a time-limited solve ends the loop.
    """
    t0 = time.perf_counter()
    sol = solve(p)
    k = 0
    while k < max_escalations and sol.status in (OPTIMAL, INFEASIBLE):
        left = p.time_limit - (time.perf_counter() - t0)
        if left <= 0:
            break
        warm = (sol.z, sol.theta) if sol.status == OPTIMAL else None
        bigger = replace(p, big_m=2 * p.big_m, warm_start=warm, time_limit=left)
        nxt = solve(bigger)
        improved = sol.status == INFEASIBLE or (
            nxt.objective < sol.objective - max(1e-9, bigger.gap * max(1.0, abs(sol.objective))))
        if not improved:
            break
        k += 1
        p, sol = bigger, nxt
    sol.escalations = k
    sol.wall_time = time.perf_counter() - t0
    return sol

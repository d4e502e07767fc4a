"""Linear programming backend used by the relaxations and the l1 fit.

The contract is ``minimize c @ v subject to A_ub v <= b_ub, A_eq v = b_eq,
lo <= v <= hi``. HiGHS does the work: one-off problems go through
:func:`scipy.optimize.linprog`, branch-and-bound nodes through a persistent
``highspy`` model that is re-solved from the previous basis.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import highspy
import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import SolverError

# wall-clock cap on a single node LP; guards against rare simplex stalls
NODE_LP_CAP = 5.0


class LPTimeout(Exception):
    """A node LP ran past the caller's deadline."""


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    fun: float


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None,
             presolve: bool = True) -> LPResult:
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs",
                  options={"presolve": presolve})
    if res.status == 0:
        return LPResult("optimal", np.asarray(res.x, dtype=float), float(res.fun))
    if res.status == 2:
        return LPResult("infeasible", None, np.inf)
    if res.status == 3:
        return LPResult("unbounded", None, -np.inf)
    raise SolverError(f"LP backend failed: {res.message}")


class BigMRelaxation:
    """Persistent LP relaxation of the noiseless big-M model.

    Variables are ``theta`` (free) followed by ``z`` in ``[0, 1]``; rows are
    ``U theta - M z <= x`` and ``-U theta - M z <= -x``. A node only changes
    the bounds on ``z`` (``[0, 0]`` pins an exact fit, ``[1, 1]`` an outlier),
    so each solve restarts the dual simplex from the previous basis.
    """

    def __init__(self, u: np.ndarray, x: np.ndarray, big_m: float):
        n, r = u.shape
        self.n, self.r = n, r
        inf = highspy.kHighsInf
        a = np.zeros((2 * n, r + n))
        a[:n, :r] = u
        a[n:, :r] = -u
        a[np.arange(n), r + np.arange(n)] = -big_m
        a[n + np.arange(n), r + np.arange(n)] = -big_m
        mat = sparse.csc_matrix(a)
        self._dense = (np.concatenate([np.zeros(r), np.ones(n)]), mat, np.concatenate([x, -x]))
        lp = highspy.HighsLp()
        lp.num_col_ = r + n
        lp.num_row_ = 2 * n
        lp.col_cost_ = np.concatenate([np.zeros(r), np.ones(n)])
        lp.col_lower_ = np.concatenate([np.full(r, -inf), np.zeros(n)])
        lp.col_upper_ = np.concatenate([np.full(r, inf), np.ones(n)])
        lp.row_lower_ = np.full(2 * n, -inf)
        lp.row_upper_ = np.concatenate([x, -x])
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = mat.indptr
        lp.a_matrix_.index_ = mat.indices
        lp.a_matrix_.value_ = mat.data
        self._h = highspy.Highs()
        self._h.setOptionValue("output_flag", False)
        self._h.passModel(lp)
        self._cols = np.arange(r, r + n, dtype=np.int32)

    def solve(self, fix: np.ndarray, deadline: float | None = None) -> LPResult:
        """Solve with ``fix`` in {-1 free, 0 inlier, 1 outlier} per coordinate.

        Each attempt is capped at ``NODE_LP_CAP`` seconds and at ``deadline``
        (a ``time.perf_counter`` value). A failed warm solve is retried once
        from scratch without presolve, then handed to :func:`solve_lp`.
        Raises :class:`LPTimeout` when the deadline passes.
        """
        lo = (fix == 1).astype(float)
        hi = (fix != 0).astype(float)
        h = self._h
        h.changeColsBounds(self.n, self._cols, lo, hi)
        ok = (highspy.HighsModelStatus.kOptimal, highspy.HighsModelStatus.kInfeasible)
        for attempt in range(2):
            cap = NODE_LP_CAP
            if deadline is not None:
                cap = min(cap, deadline - time.perf_counter())
                if cap <= 0:
                    raise LPTimeout
            # the HiGHS clock accumulates over runs, so the limit is relative to it
            h.setOptionValue("time_limit", h.getRunTime() + cap)
            h.run()
            st = h.getModelStatus()
            if st in ok:
                break
            # presolve occasionally ends in status Unknown; the cold retry skips it
            h.clearSolver()
            h.setOptionValue("presolve", "off")
        h.setOptionValue("presolve", "choose")
        if st == highspy.HighsModelStatus.kOptimal:
            v = np.asarray(h.getSolution().col_value, dtype=float)
            return LPResult("optimal", v, float(h.getInfo().objective_function_value))
        if st == highspy.HighsModelStatus.kInfeasible:
            return LPResult("infeasible", None, np.inf)
        if deadline is not None and time.perf_counter() >= deadline:
            raise LPTimeout
        # numerical trouble in the persistent model: fall back to a one-off solve
        c, a, b = self._dense
        bounds = [(None, None)] * self.r + list(zip(lo, hi))
        return solve_lp(c, a, b, bounds=bounds, presolve=False)

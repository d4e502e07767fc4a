"""Independent reference computations shared by the unit and acceptance tests."""
import itertools

import numpy as np
from scipy.optimize import linprog, minimize

from glimps.baselines import brute_force_consensus
from glimps.linalg import least_squares
from glimps.milp import MilpProblem, choose_big_m, solve, solve_escalating, solve_noiseless
from glimps.synth import InstanceSpec, derive_seed, generate


def feasible_zero_sets(u, x, big_m):
    """Every z in {0,1}^d for which some theta satisfies the big-M constraints exactly.

    Checked with one LP feasibility problem per z, independent of the solver.
    """
    d, r = u.shape
    out = {}
    for z in itertools.product((0, 1), repeat=d):
        z = np.array(z)
        zero = z == 0
        a_ub = np.vstack([u[~zero], -u[~zero]])
        b_ub = np.concatenate([x[~zero] + big_m, big_m - x[~zero]])
        res = linprog(np.zeros(r), A_ub=a_ub if a_ub.size else None, b_ub=b_ub if a_ub.size else None,
                      A_eq=u[zero] if zero.any() else None, b_eq=x[zero] if zero.any() else None,
                      bounds=[(None, None)] * r, method="highs")
        out[tuple(z)] = res.status == 0
    return out


def noisy_objective(u, x, big_m, lam, z):
    """min over theta of sum(z) + lam * ||w||^2 for a fixed z (convex in theta)."""
    z = np.asarray(z, dtype=bool)

    def f(th):
        res = x - u @ th
        w = np.where(z, res - np.clip(res, -big_m, big_m), res)
        return lam * (w @ w)

    th0 = np.linalg.lstsq(u[~z], x[~z], rcond=None)[0] if (~z).sum() else np.zeros(u.shape[1])
    best = min(minimize(f, t, method="BFGS", options={"gtol": 1e-10}).fun
               for t in (th0, np.linalg.lstsq(u, x, rcond=None)[0]))
    return float(z.sum() + best)


def consistent(z, fix):
    z = np.asarray(z)
    return np.all((fix < 0) | (z == fix))


def sandwich_violations(u, x, big_m, lam=np.inf, record=None):
    """Solve once with a node record; return (violations, solution).

    A violation is a node whose bound exceeds the best objective reachable in
    its subtree, or an incumbent that increased between nodes.
    """
    record = [] if record is None else record
    p = MilpProblem(u, x, big_m, lam, time_limit=60.0)
    sol = solve(p, record)
    bad = []
    if np.isinf(lam):
        feas = feasible_zero_sets(u, x, big_m)
        best_in = lambda fix: min((sum(z) for z, ok in feas.items() if ok and consistent(z, fix)),
                                  default=np.inf)
    else:
        cache = {}

        def best_in(fix):
            vals = []
            for z in itertools.product((0, 1), repeat=len(x)):
                if consistent(z, fix):
                    if z not in cache:
                        cache[z] = noisy_objective(u, x, big_m, lam, z)
                    vals.append(cache[z])
            return min(vals)
    prev = np.inf
    for fix, bound, inc in record:
        if bound > best_in(fix) + 1e-6:
            bad.append(("bound", fix.tolist(), bound))
        if inc > prev + 1e-12:
            bad.append(("incumbent", inc, prev))
        prev = inc
    root_best = best_in(np.full(len(x), -1))
    if sol.status == "Optimal" and abs(sol.objective - root_best) > 1e-6 * max(1.0, root_best):
        bad.append(("optimum", sol.objective, root_best))
    return bad, sol


def sandwich_instance(k):
    """Small seeded instance for the bound checks (noiseless for even k)."""
    seed = derive_seed("sandwich", k)
    noisy = k % 2 == 1
    d = 6 if noisy else 8
    inst = generate(InstanceSpec(d=d, r=2, p=0.4, sigma=0.01 if noisy else 0.0, seed=seed))
    theta0 = least_squares(inst.u, inst.x)
    big_m = 4.0 * np.max(np.abs(inst.x - inst.u @ theta0))
    lam = 100.0 if noisy else np.inf
    return inst.u, inst.x, big_m, lam


def warm_start_pair(k, node_limit=None):
    """Same node-limited solve with and without a feasible warm start."""
    seed = derive_seed("warm", k)
    node_limit = node_limit or 1 + k % 6
    inst = generate(InstanceSpec(d=30, r=3, p=0.5, seed=seed))
    u, x = inst.u, inst.x
    theta0 = least_squares(u, x)
    big_m = 4.0 * np.max(np.abs(x - u @ theta0))
    # even k: the generating coefficients; odd k: an exact fit through r rows
    th = inst.theta_true if k % 2 == 0 else least_squares(u[:3], x[:3])
    res = np.abs(x - u @ th)
    if np.max(res) > big_m:
        big_m = 2.0 * np.max(res)
    z0 = (res > 1e-9).astype(np.int8)
    cold = solve_noiseless(MilpProblem(u, x, big_m, node_limit=node_limit))
    warm = solve_noiseless(MilpProblem(u, x, big_m, warm_start=(z0, th), node_limit=node_limit))
    return cold, warm, float(z0.sum())


def oracle_case(k):
    """Seeded d=15, r=2 instance: returns (solver objective, 15 - oracle size)."""
    p = (0.2, 0.4, 0.6)[k % 3]
    inst = generate(InstanceSpec(d=15, r=2, p=p, seed=derive_seed("oracle", k)))
    idx, _ = brute_force_consensus(inst.u, inst.x, 1e-9)
    theta0 = least_squares(inst.u, inst.x)
    prob = MilpProblem(inst.u, inst.x, choose_big_m(inst.u, inst.x, theta0, 4.0), time_limit=60.0)
    sol = solve_escalating(prob)
    return sol, 15 - idx.size

"""Seeded benchmark sweeps with CSV output.

Each (grid point, trial) draws one instance from a seed derived from
``(base_seed, d, r, p, sigma, trial)``. The method list and the removal
fraction never enter the seed, so every method sees the same instances.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .baselines import BaselineKind, run_method
from .greedy import GreedyConfig
from .metrics import coef_error, misclass_ratio
from .milp import NOISELESS
from .pipeline import GlimpsConfig
from .synth import InstanceSpec, derive_seed, generate

log = logging.getLogger(__name__)

COLUMNS = [
    "experiment_id", "method", "d", "r", "p", "sigma", "lambda", "removal_fraction", "trial",
    "seed", "coef_error", "misclass_ratio", "misclass_ratio_stage2", "wall_time_s",
    "solver_status", "nodes_explored",
]
SUMMARY_COLUMNS = [
    "method", "d", "r", "p", "sigma", "lambda", "removal_fraction", "n",
    "coef_error_mean", "coef_error_std", "misclass_ratio_mean", "misclass_ratio_std",
    "misclass_ratio_stage2_mean", "wall_time_mean", "wall_time_std", "success_rate",
]
SWEEPS = ("outliers", "removal", "noise", "timing")
DEFAULT_P = tuple(round(0.10 + 0.05 * k, 2) for k in range(17))


def fmt(v) -> str:
    """Canonical text for CSV cells (stable across runs and platforms)."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "none"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class SweepSpec:
    sweep_kind: str = "outliers"
    d: int = 100
    r: int = 5
    p_grid: tuple[float, ...] = DEFAULT_P
    removal_grid: tuple[float, ...] = (0.4,)
    sigma_grid: tuple[float, ...] = (0.0,)
    lam: float = NOISELESS
    trials: int = 50
    time_limit: float = 60.0
    base_seed: int = 0
    methods: tuple[str, ...] = ("greedy", "milp", "glimps")
    # "truth" removes the true outlier count; a float is a fraction of d
    greedy_l1_removal: str | float = "truth"
    node_limit: int | None = None
    experiment_id: str = ""

    def __post_init__(self):
        if self.sweep_kind not in SWEEPS:
            raise ValueError(f"unknown sweep kind {self.sweep_kind!r}")
        if not (self.p_grid and self.removal_grid and self.sigma_grid):
            raise ValueError("grids must be nonempty")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        for m in self.methods:
            BaselineKind(m)

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> "SweepSpec":
        """Defaults mirroring the four studies, then ``overrides``."""
        base: dict = {"sweep_kind": kind}
        if kind == "removal":
            base.update(removal_grid=(0.3, 0.4, 0.5), methods=("glimps",))
        elif kind == "noise":
            base.update(sigma_grid=(1e-9, 1e-3, 1e-1), lam=1000.0, removal_grid=(0.3,),
                        methods=("glimps",))
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    @property
    def exp_id(self) -> str:
        return self.experiment_id or self.sweep_kind

    def cells(self):
        """``(p, sigma, removal, trial)`` for every unit of work."""
        return product(self.p_grid, self.sigma_grid, self.removal_grid, range(self.trials))

    def trial_seed(self, p: float, sigma: float, trial: int) -> int:
        return derive_seed(self.base_seed, self.d, self.r, float(p), float(sigma), int(trial))


def row_key(row: dict) -> tuple:
    return tuple(row[c] for c in ("method", "d", "r", "p", "sigma", "lambda", "removal_fraction", "trial"))


def sort_key(row: dict) -> tuple:
    return (row["method"], int(row["d"]), int(row["r"]), float(row["p"]), float(row["sigma"]),
            float(row["removal_fraction"]), int(row["trial"]))


def _greedy_l1_count(spec: SweepSpec, inst, d: int, r: int) -> int:
    if spec.greedy_l1_removal == "truth":
        c = int(inst.outlier_mask.sum())
    else:
        c = GreedyConfig(float(spec.greedy_l1_removal)).removal_count(d)
    return min(c, d - (r + 1))


def run_cell(spec: SweepSpec, p: float, sigma: float, removal: float, trial: int,
             methods=None) -> list[dict]:
    """All requested methods on one seeded instance; never raises."""
    methods = spec.methods if methods is None else methods
    seed = spec.trial_seed(p, sigma, trial)
    inst = generate(InstanceSpec(spec.d, spec.r, p, sigma, seed))
    cfg = GlimpsConfig(removal_fraction=removal, lam=spec.lam, time_limit=spec.time_limit,
                       sigma=sigma, node_limit=spec.node_limit)
    truth = inst.inlier_mask
    rows = []
    for m in methods:
        t0 = time.perf_counter()
        try:
            res = run_method(m, inst.u, inst.x, cfg,
                             greedy_l1_count=_greedy_l1_count(spec, inst, spec.d, spec.r))
            wall = time.perf_counter() - t0
            ce = coef_error(inst.theta_true, res.theta_hat)
            mr = misclass_ratio(truth, res.labels)
            mr2 = misclass_ratio(truth, res.stage2_labels) if res.stage2_labels is not None else math.nan
            status = res.stage2.status if res.stage2 is not None else "NA"
            nodes = res.stage2.nodes_explored if res.stage2 is not None else 0
        except Exception as exc:  # recorded, never fatal
            log.warning("method %s failed at p=%s trial=%s: %s", m, p, trial, exc)
            wall = time.perf_counter() - t0
            ce = mr = mr2 = math.nan
            status, nodes = f"Error:{type(exc).__name__}", 0
        rows.append({
            "experiment_id": spec.exp_id, "method": m, "d": fmt(spec.d), "r": fmt(spec.r),
            "p": fmt(float(p)), "sigma": fmt(float(sigma)), "lambda": fmt(float(spec.lam)),
            "removal_fraction": fmt(float(removal)), "trial": fmt(trial), "seed": fmt(seed),
            "coef_error": fmt(ce), "misclass_ratio": fmt(mr), "misclass_ratio_stage2": fmt(mr2),
            "wall_time_s": fmt(wall), "solver_status": status, "nodes_explored": fmt(nodes),
        })
    return rows


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_rows(path, rows, columns=COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("GLIMPS_WORKERS", "1")))
    except ValueError:
        return 1


def run_sweep(spec: SweepSpec, out=None, summary=None, workers: int | None = None) -> list[dict]:
    """Run every (grid point, trial, method) not already present in ``out``.

    Rows are appended to ``out`` as they finish, then the file is rewritten in
    canonical order. Returns the full, sorted row list.
    """
    done: dict[tuple, dict] = {}
    if out is not None and Path(out).exists() and Path(out).stat().st_size:
        for row in read_rows(out):
            done[row_key(row)] = row
    todo = []
    for p, sigma, removal, trial in spec.cells():
        probe = {"d": fmt(spec.d), "r": fmt(spec.r), "p": fmt(float(p)), "sigma": fmt(float(sigma)),
                 "lambda": fmt(float(spec.lam)), "removal_fraction": fmt(float(removal)),
                 "trial": fmt(trial)}
        missing = tuple(m for m in spec.methods if row_key({**probe, "method": m}) not in done)
        if missing:
            todo.append((p, sigma, removal, trial, missing))

    sink = None
    if out is not None:
        fresh = not (Path(out).exists() and Path(out).stat().st_size)
        sink = open(out, "a", newline="")
        writer = csv.DictWriter(sink, fieldnames=COLUMNS, lineterminator="\n")
        if fresh:
            writer.writeheader()

    def accept(rows):
        for row in rows:
            done[row_key(row)] = row
        if sink is not None:
            writer.writerows(rows)
            sink.flush()

    n = workers or _workers()
    try:
        if n == 1:
            for k, (p, sigma, removal, trial, missing) in enumerate(todo, 1):
                accept(run_cell(spec, p, sigma, removal, trial, missing))
                log.info("cell %d/%d done (p=%s sigma=%s removal=%s trial=%s)",
                         k, len(todo), p, sigma, removal, trial)
        else:
            with ProcessPoolExecutor(max_workers=n) as pool:
                futs = [pool.submit(run_cell, spec, *job) for job in todo]
                for fut in as_completed(futs):
                    accept(fut.result())
    finally:
        if sink is not None:
            sink.close()

    rows = sorted(done.values(), key=sort_key)
    if out is not None:
        write_rows(out, rows)
    if summary is not None:
        write_rows(summary, summarize(rows), SUMMARY_COLUMNS)
    return rows


def _success(row: dict) -> float:
    ce = float(row["coef_error"])
    if math.isnan(ce):
        return 0.0
    sigma = float(row["sigma"])
    return float(ce < (10 * sigma if sigma > 0 else 1e-6))


def _mean_std(vals):
    a = np.asarray([v for v in vals if not math.isnan(v)], dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


def summarize(rows) -> list[dict]:
    """Mean and sample standard deviation per (method, grid point)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = tuple(row[c] for c in ("method", "d", "r", "p", "sigma", "lambda", "removal_fraction"))
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], int(k[1]), int(k[2]), float(k[3]), float(k[4]),
                                             float(k[6]))):
        g = groups[key]
        ce = _mean_std(float(r["coef_error"]) for r in g)
        mr = _mean_std(float(r["misclass_ratio"]) for r in g)
        mr2 = _mean_std(float(r["misclass_ratio_stage2"]) for r in g)
        wt = _mean_std(float(r["wall_time_s"]) for r in g)
        out.append(dict(zip(SUMMARY_COLUMNS[:7], key)) | {
            "n": fmt(len(g)),
            "coef_error_mean": fmt(ce[0]), "coef_error_std": fmt(ce[1]),
            "misclass_ratio_mean": fmt(mr[0]), "misclass_ratio_std": fmt(mr[1]),
            "misclass_ratio_stage2_mean": fmt(mr2[0]),
            "wall_time_mean": fmt(wt[0]), "wall_time_std": fmt(wt[1]),
            "success_rate": fmt(float(np.mean([_success(r) for r in g]))),
        })
    return out


def expected_rows(spec: SweepSpec) -> int:
    return len(spec.methods) * len(spec.p_grid) * len(spec.sigma_grid) * len(spec.removal_grid) * spec.trials

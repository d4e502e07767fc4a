"""Command line entry point: ``glimps gen | detect | bench | export-mps``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench
from .errors import GlimpsError
from .linalg import (least_squares, read_csv_matrix, read_csv_vector, write_csv_matrix,
                     write_csv_vector)
from .milp import NOISELESS, MilpProblem, choose_big_m
from .mps import export_mps
from .pipeline import GlimpsConfig, glimps_detect
from .synth import InstanceSpec, generate

log = logging.getLogger("glimps")


def _lam(text: str) -> float:
    if text.lower() in ("none", "inf"):
        return NOISELESS
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("lambda must be nonnegative or 'none'")
    return v


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _methods(text: str) -> tuple[str, ...]:
    out = tuple(t.strip() for t in text.split(",") if t.strip())
    for m in out:
        try:
            bench.BaselineKind(m)
        except ValueError:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}") from None
    return out


def cmd_gen(a) -> int:
    inst = generate(InstanceSpec(a.d, a.r, a.p, a.sigma, a.seed))
    write_csv_matrix(a.out_basis, inst.u)
    write_csv_vector(a.out_obs, inst.x)
    if a.out_truth:
        inst.write_truth(a.out_truth)
    return 0


def cmd_detect(a) -> int:
    u = read_csv_matrix(a.basis)
    x = read_csv_vector(a.obs)
    cfg = GlimpsConfig(removal_fraction=a.removal, lam=a.lam, time_limit=a.time_limit,
                       tau=a.tau, sigma=a.sigma)
    res = glimps_detect(u, x, cfg)
    res.to_csv(a.out)
    if a.trace:
        res.stage1_trace.to_csv(a.trace)
    sol = res.stage2
    log.info("status=%s inliers=%d nodes=%d wall=%.3fs", sol.status, res.inliers.size,
             sol.nodes_explored, res.wall_time)
    return 0


def cmd_bench(a) -> int:
    over = dict(d=a.d, r=a.r, trials=a.trials, time_limit=a.time_limit, lam=a.lam,
                base_seed=a.seed, methods=a.methods, p_grid=a.p_grid, sigma_grid=a.sigma_grid,
                experiment_id=a.experiment_id, node_limit=a.node_limit)
    if a.removal is not None:
        over["removal_grid"] = a.removal
    spec = bench.SweepSpec.for_kind(a.sweep, **over)
    rows = bench.run_sweep(spec, a.out, a.summary, a.workers)
    missing = bench.expected_rows(spec) - len([r for r in rows if r["experiment_id"] == spec.exp_id])
    failed = sum(r["solver_status"].startswith("Error") for r in rows)
    if failed:
        log.warning("%d trials ended with an error status", failed)
    if missing > 0:
        log.error("%d expected rows are missing", missing)
        return 1
    return 0


def cmd_export(a) -> int:
    u = read_csv_matrix(a.basis)
    x = read_csv_vector(a.obs)
    big_m = a.big_m if a.big_m else choose_big_m(u, x, least_squares(u, x))
    export_mps(MilpProblem(u, x, big_m), a.out, a.name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glimps", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="draw a seeded synthetic instance")
    g.add_argument("--d", type=int, default=100)
    g.add_argument("--r", type=int, default=5)
    g.add_argument("--p", type=float, default=0.5)
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-basis", required=True)
    g.add_argument("--out-obs", required=True)
    g.add_argument("--out-truth")
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("detect", help="run the two-stage detector on CSV inputs")
    d.add_argument("--basis", required=True)
    d.add_argument("--obs", required=True)
    d.add_argument("--removal", type=float, default=0.4)
    d.add_argument("--lambda", dest="lam", type=_lam, default=NOISELESS)
    d.add_argument("--time-limit", type=float, default=60.0)
    d.add_argument("--tau", type=float)
    d.add_argument("--sigma", type=float)
    d.add_argument("--out", required=True)
    d.add_argument("--trace", help="also write the greedy trace CSV here")
    d.set_defaults(func=cmd_detect)

    b = sub.add_parser("bench", help="seeded benchmark sweep")
    b.add_argument("--sweep", choices=bench.SWEEPS, default="outliers")
    b.add_argument("--d", type=int, default=100)
    b.add_argument("--r", type=int, default=5)
    b.add_argument("--trials", type=int, default=50)
    b.add_argument("--time-limit", type=float, default=60.0)
    b.add_argument("--removal", type=_floats, help="comma-separated removal fractions")
    b.add_argument("--lambda", dest="lam", type=_lam)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--methods", type=_methods)
    b.add_argument("--p-grid", type=_floats)
    b.add_argument("--sigma-grid", type=_floats)
    b.add_argument("--node-limit", type=int)
    b.add_argument("--experiment-id")
    b.add_argument("--workers", type=int)
    b.add_argument("--out", required=True)
    b.add_argument("--summary")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export-mps", help="write the noiseless big-M model in MPS format")
    e.add_argument("--basis", required=True)
    e.add_argument("--obs", required=True)
    e.add_argument("--big-m", type=float)
    e.add_argument("--name", default="GLIMPS")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(a.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except (GlimpsError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())

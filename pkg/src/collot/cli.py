"""Command-line entry point.

Subcommands: ``gen`` (synthetic CSV samples), ``solve`` (collision or ISA
run with JSON report, CSV trace and paired samples), ``compare`` (two
marginals against the exact and Sinkhorn baselines), ``pairwise`` (distance
matrix over a directory of PGM images) and ``bench`` (sweep-time scaling and
peak allocation).

Exit codes: 0 success, 2 usage error, 3 data error, 4 size-guard violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from collot import diagnostics, ingest, oracles
from collot.core import SolverConfig, new_problem
from collot.cost import PairwiseLp, pair_estimate
from collot.errors import CollotError, DegenerateTrace, TooLarge
from collot.solvers import RunReport, collision_solve, isa_solve

SCHEMA_VERSION = 1
EXIT_USAGE, EXIT_DATA, EXIT_SIZE = 2, 3, 4
TRACE_HEADER = ("sweep", "mean_cost", "accepted", "cumulative_candidates", "wall_ms")

log = logging.getLogger("collot")


def _add_cost_flags(p):
    p.add_argument("--p", type=float, default=2.0, help="exponent of the pairwise L^p cost")
    p.add_argument("--weight", type=float, default=1.0, help="pair weight (0.5 gives the Gangbo-Swiech cost)")


def _add_config_flags(p, max_sweeps=1000):
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--window", type=int, default=50)
    p.add_argument("--max-sweeps", type=int, default=max_sweeps)
    p.add_argument("--recompute-interval", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("identity", "random-shuffle"), default="identity")
    p.add_argument("--workers", type=int, default=1)


def _config(args, **overrides) -> SolverConfig:
    kw = dict(tolerance=args.tolerance, window=args.window, max_sweeps=args.max_sweeps,
              recompute_interval=args.recompute_interval, seed=args.seed, init=args.init, workers=args.workers)
    kw.update(overrides)
    return SolverConfig(**kw)


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n")


def write_trace(path, report: RunReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in report.trace:
            w.writerow([row.sweep, repr(row.mean_cost), row.accepted, row.cumulative_candidates,
                        f"{row.wall_ms:.6f}"])


def _decay(report: RunReport):
    costs = report.costs
    try:
        fit = diagnostics.fit_exponential_decay(costs, stationary=costs[-1])
    except DegenerateTrace:
        return None, None
    return fit.alpha_hat, fit.r_squared


def run_report_json(report: RunReport, problem, cost: PairwiseLp) -> dict:
    alpha, r2 = _decay(report)
    dims = sorted({m.n for m in problem.marginals})
    return {
        "schema_version": SCHEMA_VERSION,
        "method": report.method,
        "seed": report.seed,
        "np": problem.num_points,
        "k": problem.K,
        "n": dims[0] if len(dims) == 1 else dims,
        "p": cost.p,
        "weight": cost.weight,
        "mean_cost": report.final_mean_cost,
        "initial_mean_cost": report.initial_mean_cost,
        "converged": report.converged,
        "sweeps": report.sweeps_run,
        "accepted": report.accepted_total,
        "wall_ms": report.wall_ms,
        "alpha_hat": alpha,
        "r_squared": r2,
        "decay_stationary": report.costs[-1],
    }


def cmd_gen(args) -> int:
    spec = ingest.SyntheticSpec(args.family, args.np, args.n, args.seed)
    ingest.save_csv(args.out, ingest.sample_synthetic(spec).data)
    return 0


def cmd_solve(args) -> int:
    if len(args.inputs) < 2:
        args.parser.error("solve needs at least two input files")
    marginals = [ingest.load_csv(path) for path in args.inputs]
    cost = PairwiseLp(args.p, args.weight)
    problem = new_problem(marginals, cost)
    solve = collision_solve if args.method == "collision" else isa_solve
    state, report = solve(problem, _config(args))
    _write_json(args.out_report, run_report_json(report, problem, cost))
    if args.out_trace:
        write_trace(args.out_trace, report)
    if args.out_pairs:
        ingest.save_csv(args.out_pairs, state.paired_samples(problem))
    return 0


def _relative_error(value, ref):
    if ref == 0:
        return abs(value - ref), "absolute"
    return abs(value - ref) / abs(ref), "relative"


def cmd_compare(args) -> int:
    if len(args.inputs) != 2:
        args.parser.error("compare needs exactly two input files")
    x1, x2 = (ingest.load_csv(path) for path in args.inputs)
    cost = PairwiseLp(args.p, args.weight)
    problem = new_problem([x1, x2], cost)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = set(methods) - {"collision", "isa", "hungarian", "sinkhorn"}
    if unknown:
        args.parser.error(f"unknown methods: {', '.join(sorted(unknown))}")
    results = {}
    for method in methods:
        t0 = time.perf_counter()
        if method in ("collision", "isa"):
            solve = collision_solve if method == "collision" else isa_solve
            _, report = solve(problem, _config(args))
            entry = {"mean_cost": report.final_mean_cost, "sweeps": report.sweeps_run,
                     "converged": report.converged}
        elif method == "hungarian":
            entry = {"mean_cost": oracles.exact_assignment_2m(x1, x2, cost).mean_cost, "exact": True}
        else:
            for lam in args.lam:
                res = oracles.sinkhorn_2m(x1, x2, lam, max_iter=args.sinkhorn_max_iter,
                                          threshold=args.sinkhorn_threshold, cost=cost)
                results[f"sinkhorn_lam{lam:g}"] = {
                    "mean_cost": res.reg_cost, "lam": lam, "iterations": res.iterations,
                    "converged": res.converged, "wall_ms": (time.perf_counter() - t0) * 1e3}
                t0 = time.perf_counter()
            continue
        entry["wall_ms"] = (time.perf_counter() - t0) * 1e3
        results[method] = entry
    ref = results.get("hungarian", {}).get("mean_cost")
    for entry in results.values():
        if ref is None:
            entry["rel_error"], entry["error_kind"] = None, None
        else:
            entry["rel_error"], entry["error_kind"] = _relative_error(entry["mean_cost"], ref)
    _write_json(args.out_report, {
        "schema_version": SCHEMA_VERSION, "np": problem.num_points, "n": problem.n, "p": cost.p,
        "weight": cost.weight, "seed": args.seed, "reference": "hungarian" if ref is not None else None,
        "methods": results})
    return 0


def _image_marginals(args):
    paths = sorted(p for p in Path(args.dataset_dir).iterdir() if p.suffix.lower() == ".pgm")
    if len(paths) < 2:
        raise CollotError(f"{args.dataset_dir}: need at least two .pgm images, found {len(paths)}")
    marginals = []
    for path in paths:
        img = ingest.load_pgm(path)
        # one seed for every image: identical images give identical samples
        m = ingest.image_to_samples(img, None if args.image_mode == "grid" else args.np, args.image_mode,
                                    seed=args.seed)
        m.id = path.stem
        marginals.append(m)
    return marginals


def cmd_pairwise(args) -> int:
    marginals = _image_marginals(args)
    cost = PairwiseLp(args.p, 1.0)
    K = len(marginals)
    D = np.zeros((K, K))
    t0 = time.perf_counter()
    if args.mode == "mmot":
        problem = new_problem(marginals, cost)
        state, report = collision_solve(problem, _config(args))
        for j in range(K):
            for k in range(j + 1, K):
                D[j, k] = D[k, j] = pair_estimate(problem, state, j, k, args.p)
        runs = [report]
    else:
        runs = []
        for j in range(K):
            for k in range(j + 1, K):
                problem = new_problem([marginals[j], marginals[k]], cost)
                _, report = collision_solve(problem, _config(args))
                D[j, k] = D[k, j] = report.final_mean_cost
                runs.append(report)
    names = [m.id for m in marginals]
    with open(args.out_matrix, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in D:
            w.writerow([repr(float(v)) for v in row])
    neighbors = {names[j]: [{"name": names[k], "distance": float(D[j, k])}
                            for k in sorted((k for k in range(K) if k != j), key=lambda k: (D[j, k], k))]
                 for j in range(K)}
    _write_json(args.out_neighbors, {"schema_version": SCHEMA_VERSION, "from_mmot": args.mode == "mmot",
                                     "neighbors": neighbors})
    if args.out_report:
        _write_json(args.out_report, {
            "schema_version": SCHEMA_VERSION, "mode": args.mode, "k": K, "np": marginals[0].num_points,
            "n": marginals[0].n, "p": args.p, "seed": args.seed, "from_mmot": args.mode == "mmot",
            "sweeps": sum(r.sweeps_run for r in runs), "converged": all(r.converged for r in runs),
            "ms_per_sweep": float(np.median([r.ms_per_sweep for r in runs])),
            "wall_ms": (time.perf_counter() - t0) * 1e3})
    return 0


def cmd_bench(args) -> int:
    if not args.sizes and not args.memory_np:
        args.parser.print_usage(sys.stderr)
        print("bench: give --sizes and/or --memory-np", file=sys.stderr)
        return EXIT_USAGE
    out = {"schema_version": SCHEMA_VERSION, "method": args.method, "family": args.family, "k": args.k,
           "seed": args.seed}
    cost = PairwiseLp(args.p, args.weight)
    if args.sizes:
        sizes = sorted(args.sizes)
        spec = ingest.SyntheticSpec(args.family, sizes[0], args.n, args.seed)
        rows = diagnostics.measure_sweep_scaling(spec, sizes, sweeps=args.sweeps, method=args.method, K=args.k,
                                                 repeats=args.repeats, cost=cost, seed=args.seed)
        out["scaling"] = [{"np": n, "ms_per_sweep": ms} for n, ms in rows]
        out["ratios"] = [b[1] / a[1] for a, b in zip(rows, rows[1:])]
    if args.memory_np:
        N = args.memory_np
        marg = [ingest.sample_synthetic(ingest.SyntheticSpec(args.family, N, args.n, args.seed + i))
                for i in range(args.k)]
        problem = new_problem(marg, cost)
        peak = diagnostics.peak_solve_allocation(problem, args.memory_sweeps, seed=args.seed)
        out["memory"] = {"np": N, "sweeps": args.memory_sweeps, "peak_bytes": peak,
                         "bytes_per_point": peak / N, "input_bytes": int(problem.points.nbytes)}
    _write_json(args.out_report, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collot", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write synthetic samples to CSV")
    p.add_argument("--family", required=True)
    p.add_argument("--np", type=int, required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve a K-marginal problem from CSV files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--method", choices=("collision", "isa"), default="collision")
    _add_cost_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-report", default="-")
    p.add_argument("--out-trace")
    p.add_argument("--out-pairs")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="compare solvers on two marginals")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--methods", default="collision,isa,hungarian,sinkhorn")
    p.add_argument("--lam", type=float, nargs="+", default=[1.0, 0.5])
    p.add_argument("--sinkhorn-max-iter", type=int, default=100_000)
    p.add_argument("--sinkhorn-threshold", type=float, default=1e-9)
    _add_cost_flags(p)
    _add_config_flags(p)
    p.add_argument("--out-report", default="-")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("pairwise", help="pairwise distance matrix over PGM images")
    p.add_argument("dataset_dir")
    p.add_argument("--np", type=int, default=1000)
    p.add_argument("--mode", choices=("mmot", "pairwise2"), default="mmot")
    p.add_argument("--image-mode", choices=("intensity_sampled", "grid"), default="intensity_sampled")
    p.add_argument("--p", type=float, default=2.0)
    _add_config_flags(p)
    p.add_argument("--out-matrix", required=True)
    p.add_argument("--out-neighbors", required=True)
    p.add_argument("--out-report")
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("bench", help="sweep-time scaling and peak allocation")
    p.add_argument("--method", choices=("collision", "isa"), default="collision")
    p.add_argument("--family", default="normal")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--sweeps", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--memory-np", type=int)
    p.add_argument("--memory-sweeps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_cost_flags(p)
    p.add_argument("--out-report", default="-")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser = parser
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TooLarge as exc:
        print(f"collot: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (CollotError, OSError) as exc:
        print(f"collot: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

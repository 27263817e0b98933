"""Command-line interface.

Subcommands: gen (write a test graph), sparsify (run the barrier loop on
a graph), verify (judge a sparsifier against its source graph), bench
(timing/quality table across graph families), sdp-selftest (measure the
packing solver against an exact LP reference).

Exit codes: 0 success, 1 quality/certification failure, 2 bad input or
configuration, 3 internal invariant violation.  Failures print one JSON
object {"error": ..., "message": ...} to stderr.  All output files are
free of wall-clock data except the bench CSV, so reruns with the same
arguments are byte identical.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time

from . import __version__
from .errors import (
    BarrierViolationError,
    ConfigError,
    FactorValidationError,
    GraphParseError,
    GraphValidationError,
    OracleContractError,
    PotentialOverflowError,
    PreconditionError,
    RejectionLoopError,
    SdpDomainError,
    SolverConvergenceError,
)
from .generators import barbell, complete, cycle, expander_like, gnp, grid, path
from .graph import export_sparsifier, isotropize, load_graph, save_graph
from .sdp import SOLVER_KAPPA, lp_optimum, random_diagonal_instance, solve_packing_sdp
from .sparsify import SparsifyConfig, sparsify_with_restarts
from .verify import check_cuts, check_quadratic_form, effective_resistance_baseline

EXIT_OK = 0
EXIT_QUALITY = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

_INPUT_ERRORS = (
    GraphParseError,
    GraphValidationError,
    FactorValidationError,
    ConfigError,
    PreconditionError,
    SdpDomainError,
    OSError,
    ValueError,
)
_INTERNAL_ERRORS = (
    BarrierViolationError,
    PotentialOverflowError,
    OracleContractError,
    RejectionLoopError,
)


def _emit(payload, stream=None):
    (stream or sys.stdout).write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


_FAMILY_PARAMS = {
    "complete": ("k",),
    "path": ("k",),
    "cycle": ("k",),
    "barbell": ("k",),
    "grid": ("rows", "cols"),
    "gnp": ("n", "p"),
    "expander": ("n",),
}


def _make_graph(family, args):
    required = _FAMILY_PARAMS.get(family)
    if required is None:
        raise ConfigError(f"unknown family {family!r}")
    missing = [name for name in required if args.get(name) is None]
    if missing:
        raise ConfigError(f"family {family!r} needs --{' --'.join(missing)}")
    if family == "complete":
        return complete(args["k"])
    if family == "path":
        return path(args["k"])
    if family == "cycle":
        return cycle(args["k"])
    if family == "barbell":
        return barbell(args["k"])
    if family == "grid":
        return grid(args["rows"], args["cols"])
    if family == "gnp":
        return gnp(args["n"], args["p"], seed=args["seed"])
    return expander_like(args["n"], degree=args["degree"], seed=args["seed"])


def _cmd_gen(args):
    spec = {
        "k": args.k,
        "rows": args.rows,
        "cols": args.cols,
        "n": args.n,
        "p": args.p,
        "degree": args.degree,
        "seed": args.seed,
    }
    g = _make_graph(args.family, spec)
    save_graph(g, args.out)
    _emit({"family": args.family, "n": g.n, "m": g.m, "out": args.out})
    return EXIT_OK


def _cmd_sparsify(args):
    g = load_graph(args.graph)
    factors = isotropize(g)
    config = SparsifyConfig(
        epsilon=args.epsilon,
        oracle=args.oracle,
        seed=args.seed,
        delta_sdp=args.delta_sdp,
        max_iterations=args.max_iterations,
        taylor_degree=args.taylor_degree,
        certify_tolerance=args.tolerance,
        restarts=args.restarts,
    )
    result, report, attempt = sparsify_with_restarts(factors, config)
    sparsifier = export_sparsifier(g, result)
    if args.out:
        save_graph(sparsifier, args.out)
    if args.trace:
        result.trace.to_jsonl(args.trace)
    sidecar = {
        "schema": 1,
        "n": g.n,
        "m_in": g.m,
        "m_out": sparsifier.m,
        "epsilon": args.epsilon,
        "oracle": args.oracle,
        "seed": args.seed,
        "restarts_used": attempt + 1,
        "nnz": report.nnz,
        "eps_actual": report.eps_actual,
        "lam_min": report.lam_min,
        "lam_max": report.lam_max,
        "tolerance": report.tolerance,
        "u_final": result.u_final,
        "ell_final": result.ell_final,
        "iterations": result.iterations,
        "dead_steps": result.dead_steps,
    }
    if args.sidecar:
        with open(args.sidecar, "w") as fh:
            fh.write(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    _emit(sidecar)
    return EXIT_OK


def _cmd_verify(args):
    g = load_graph(args.graph)
    h = load_graph(args.sparsifier)
    quad = check_quadratic_form(g, h, n_probes=args.probes, seed=args.seed)
    cuts = check_cuts(g, h, n_cuts=args.cuts, seed=args.seed)
    payload = {
        "eps_actual": quad.eps_actual,
        "lam_min": quad.lam_min,
        "lam_max": quad.lam_max,
        "rayleigh_max_dev": quad.rayleigh_max_dev,
        "cut_max_dev": cuts.max_dev,
        "n_cuts": cuts.n_cuts,
        "epsilon": args.epsilon,
        "ok": quad.eps_actual <= args.epsilon,
    }
    _emit(payload)
    return EXIT_OK if payload["ok"] else EXIT_QUALITY


def _parse_family_spec(spec):
    """name:arg[:arg] -> (family, params dict); e.g. grid:4x6, gnp:24:0.3."""
    parts = spec.split(":")
    name = parts[0]
    out = {"k": None, "rows": None, "cols": None, "n": None, "p": None, "degree": 6, "seed": 0}
    try:
        if name in ("complete", "path", "cycle", "barbell"):
            out["k"] = int(parts[1])
        elif name == "grid":
            r, c = parts[1].split("x")
            out["rows"], out["cols"] = int(r), int(c)
        elif name == "gnp":
            out["n"], out["p"] = int(parts[1]), float(parts[2])
        elif name == "expander":
            out["n"] = int(parts[1])
            if len(parts) > 2:
                out["degree"] = int(parts[2])
        else:
            raise ConfigError(f"unknown family {name!r}")
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad family spec {spec!r}: {exc}") from exc
    return name, out


def _bench_one(spec, epsilon, oracle, seed):
    family, params = _parse_family_spec(spec)
    params["seed"] = seed
    t0 = time.perf_counter()
    g = _make_graph(family, params)
    factors = isotropize(g)
    t1 = time.perf_counter()
    config = SparsifyConfig(epsilon=epsilon, oracle=oracle, seed=seed)
    result, report, _ = sparsify_with_restarts(factors, config)
    t2 = time.perf_counter()
    baseline = effective_resistance_baseline(g, epsilon, seed=seed)
    base_quality = check_quadratic_form(g, baseline, n_probes=8, seed=seed)
    t3 = time.perf_counter()
    return {
        "family": spec,
        "n": g.n,
        "m": g.m,
        "epsilon": epsilon,
        "oracle": oracle,
        "seed": seed,
        "setup_s": round(t1 - t0, 4),
        "loop_s": round(t2 - t1, 4),
        "baseline_s": round(t3 - t2, 4),
        "iterations": result.iterations,
        "nnz": report.nnz,
        "eps_actual": report.eps_actual,
        "baseline_m": baseline.m,
        "baseline_eps": base_quality.eps_actual,
    }


_BENCH_FIELDS = [
    "family",
    "n",
    "m",
    "epsilon",
    "oracle",
    "seed",
    "setup_s",
    "loop_s",
    "baseline_s",
    "iterations",
    "nnz",
    "eps_actual",
    "baseline_m",
    "baseline_eps",
]


def _cmd_bench(args):
    specs = args.family or ["complete:16", "path:24", "grid:4x6", "gnp:24:0.35", "barbell:8"]
    rows = []
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [
                pool.submit(_bench_one, spec, args.epsilon, args.oracle, args.seed)
                for spec in specs
            ]
            rows = [f.result() for f in futures]
    else:
        rows = [_bench_one(spec, args.epsilon, args.oracle, args.seed) for spec in specs]
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    _emit({"out": args.out, "rows": len(rows)})
    return EXIT_OK


def _cmd_sdp_selftest(args):
    worst = 0.0
    ratios = []
    for i in range(args.instances):
        inst = random_diagonal_instance(args.seed + i, args.dim, args.m)
        opt = lp_optimum(inst)
        got = solve_packing_sdp(inst).objective
        if got <= 0.0:
            ratio = float("inf") if opt > 0 else 1.0
        else:
            ratio = opt / got
        ratios.append(ratio)
        worst = max(worst, ratio)
    payload = {
        "instances": args.instances,
        "dim": args.dim,
        "m": args.m,
        "kappa_max": worst,
        "kappa_mean": sum(ratios) / len(ratios),
        "kappa_documented": SOLVER_KAPPA,
    }
    _emit(payload)
    return EXIT_OK if worst <= SOLVER_KAPPA else EXIT_INTERNAL


def build_parser():
    p = argparse.ArgumentParser(prog="sparsekit", description=__doc__)
    p.add_argument("--version", action="version", version=f"sparsekit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a test graph")
    g.add_argument("--family", required=True,
                   choices=["complete", "path", "cycle", "grid", "barbell", "gnp", "expander"])
    g.add_argument("--k", type=int, help="size for complete/path/cycle/barbell")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=float)
    g.add_argument("--degree", type=int, default=6)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    s = sub.add_parser("sparsify", help="sparsify a graph")
    s.add_argument("--graph", required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--oracle", choices=["sampling", "sdp"], default="sampling")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=5)
    s.add_argument("--tolerance", type=float, default=None,
                   help="certification bound (default 10*epsilon)")
    s.add_argument("--delta-sdp", type=float, default=None)
    s.add_argument("--max-iterations", type=int, default=None)
    s.add_argument("--taylor-degree", type=int, default=None)
    s.add_argument("--out", help="sparsifier edge list path")
    s.add_argument("--sidecar", help="run summary JSON path")
    s.add_argument("--trace", help="per-iteration JSONL path")
    s.set_defaults(func=_cmd_sparsify)

    v = sub.add_parser("verify", help="judge a sparsifier against its source")
    v.add_argument("--graph", required=True)
    v.add_argument("--sparsifier", required=True)
    v.add_argument("--epsilon", type=float, required=True)
    v.add_argument("--cuts", type=int, default=200)
    v.add_argument("--probes", type=int, default=64)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)

    b = sub.add_parser("bench", help="size/quality/timing table")
    b.add_argument("--family", action="append",
                   help="family spec like complete:16, grid:4x6, gnp:24:0.3 (repeatable)")
    b.add_argument("--epsilon", type=float, default=0.2)
    b.add_argument("--oracle", choices=["sampling", "sdp"], default="sampling")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=_cmd_bench)

    t = sub.add_parser("sdp-selftest", help="measure the packing solver vs an LP reference")
    t.add_argument("--instances", type=int, default=20)
    t.add_argument("--dim", type=int, default=6)
    t.add_argument("--m", type=int, default=10)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=_cmd_sdp_selftest)
    return p


def main(argv=None):
    level = os.environ.get("SPARSEKIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverConvergenceError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        return EXIT_QUALITY
    except _INTERNAL_ERRORS as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        return EXIT_INTERNAL
    except _INPUT_ERRORS as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

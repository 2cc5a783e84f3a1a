"""volembed command line.

Exit codes: 0 success, 1 failed verification, 2 usage/parse/I-O error,
3 degenerate input. All logarithms are natural logarithms.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bounds import (
    DomainError,
    InfeasibleError,
    analytic_bound_checks,
    distance_distortion_bound,
    search_thresholds,
    volume_distortion_bound,
)
from .distortion import SubsetPlan, SubsetStrategy, embed
from .io import ParseError, points_to_csv, read_points_csv, rows_to_csv, to_json, write_atomic
from .linalg import DegenerateInputError, InvalidInputError, LinearMap, PointSet, apply_map
from .randgen import RandomSeed, synthetic_points
from .stats import verify_gordon, verify_stability

SEED_ENV = "VOLEMBED_SEED"

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"master seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--deterministic", action="store_true",
                        help="omit the timestamp so repeated runs are byte-identical")
    common.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo and subset scoring")

    strategy = argparse.ArgumentParser(add_help=False)
    strategy.add_argument("--strategy", choices=["exhaustive", "sampled"], default="exhaustive")
    strategy.add_argument("--sample-count", type=int, default=10_000, help="subsets per size when sampling")
    strategy.add_argument("--enumeration-cap", type=int, default=1_000_000,
                          help="max total subsets before exhaustive mode falls back to sampling")

    parser = argparse.ArgumentParser(
        prog="volembed",
        description="Random Gaussian embeddings into R^d with measured volume distortion. "
                    "All logarithms are natural.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="write a synthetic point set CSV")
    p.add_argument("--mode", choices=["gaussian", "simplex", "sphere"], default="gaussian")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--output", "-o", default="-", help="CSV path, '-' for stdout")

    p = sub.add_parser("embed", parents=[common, strategy], help="embed a point set into R^d")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="max simplex dimension (subset size minus 1)")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--target", type=float, default=None, help="stop at the first map with distortion <= target")
    p.add_argument("--output", "-o", default=None, help="embedded points CSV")
    p.add_argument("--map-output", default=None, help="CSV of the rescaled d x N matrix")
    p.add_argument("--report", default="-", help="JSON report path, '-' for stdout")

    p = sub.add_parser("report", parents=[common, strategy], help="measure distortion of a given embedding")
    p.add_argument("--input", "-i", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--embedded", help="CSV of embedded points, row-aligned with --input")
    src.add_argument("--map", help="CSV of a d x N matrix")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--report", default="-", help="JSON report path, '-' for stdout")

    p = sub.add_parser("bounds", parents=[common], help="certified thresholds from the union bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--split", type=float, default=0.5, help="failure budget for contraction; rest goes to expansion")

    p = sub.add_parser("verify", parents=[common], help="Monte Carlo and grid checks of the distributional facts behind the bounds")
    p.add_argument("target", choices=["stability", "gordon", "gamma-bounds"])
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--s", type=int, default=4, help="number of chi-square factors (gordon)")
    p.add_argument("--subset-size", type=int, default=4, help="points per subset (stability)")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=0.01, help="CDF slack (gordon)")
    p.add_argument("--threshold", type=float, default=0.02, help="KS threshold (stability)")

    p = sub.add_parser("bench", parents=[common, strategy], help="distortion sweep over (n, d) grids")
    p.add_argument("--n-values", type=_int_list, default=[64])
    p.add_argument("--d-values", type=_int_list, default=[4, 6, 8, 10])
    p.add_argument("--k", type=int, default=None, help="default: floor(d/2) per row")
    p.add_argument("--dim", type=int, default=16, help="ambient dimension of the generated clouds")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--output", "-o", default="-")
    return parser


def _strategy(args) -> SubsetStrategy:
    try:
        return SubsetStrategy(args.strategy, args.sample_count, args.enumeration_cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _emit(path: Optional[str], text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        write_atomic(path, text)


def _envelope(args, params: dict, results, warns) -> dict:
    doc = {
        "command": args.command,
        "params": params,
        "seed": args.seed,
        "results": results,
        "warnings": [str(w.message) for w in warns],
    }
    if not args.deterministic:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat()
    return doc


def cmd_gen(args, warns) -> int:
    try:
        pts = synthetic_points(args.mode, args.n, args.dim, RandomSeed(args.seed), args.scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(args.output, points_to_csv(pts, header=f"volembed gen mode={args.mode} n={args.n} dim={args.dim} seed={args.seed}"))
    return EXIT_OK


def _bound_or_none(fn, *a):
    try:
        return fn(*a)
    except DomainError:
        return None


def cmd_embed(args, warns) -> int:
    P = read_points_csv(args.input)
    strat = _strategy(args)
    result = embed(P, args.d, args.k, args.trials, args.target, strat, RandomSeed(args.seed), args.workers)
    image = apply_map(result.map, P).points
    if args.output:
        write_atomic(args.output, points_to_csv(image))
    if args.map_output:
        write_atomic(args.map_output, points_to_csv(result.map.effective_matrix()))
    params = {"input": args.input, "n": P.n, "N": P.N, "d": args.d, "k": args.k,
              "trials": args.trials, "target": args.target}
    results = {
        "report": result.report.to_dict(),
        "scale": result.map.scale,
        "trials_used": result.trials_used,
        "volume_distortion_bound_c1": _bound_or_none(volume_distortion_bound, P.n, args.d, 1.0),
    }
    _emit(args.report, to_json(_envelope(args, params, results, warns)))
    return EXIT_OK


def cmd_report(args, warns) -> int:
    P = read_points_csv(args.input)
    if args.embedded:
        image = read_points_csv(args.embedded).points
        if image.shape[0] != P.n:
            raise ParseError(f"{args.embedded} has {image.shape[0]} rows, {args.input} has {P.n}")
        d = image.shape[1]
    else:
        f = LinearMap(read_points_csv(args.map).points)
        image, d = apply_map(f, P).points, f.d
    if args.k > d // 2:
        warnings.warn(f"k={args.k} exceeds floor(d/2)={d // 2}; no distortion guarantee applies")
    report = SubsetPlan(P, args.k, _strategy(args), RandomSeed(args.seed)).evaluate(image, args.workers)
    params = {"input": args.input, "embedded": args.embedded, "map": args.map, "n": P.n, "d": d, "k": args.k}
    _emit(args.report, to_json(_envelope(args, params, {"report": report.to_dict()}, warns)))
    return EXIT_OK


def _search_result(n, d, k, mode, split) -> dict:
    try:
        bp = search_thresholds(n, d, k, mode, split)
    except InfeasibleError as exc:
        return {"mode": mode, "k": k if mode == "volume" else 1, "feasible": False, "reason": str(exc)}
    return {
        "mode": mode,
        "k": bp.k,
        "feasible": bp.failure_bound < 1,
        "a": bp.a,
        "b": bp.b,
        "distortion": bp.distortion,
        "contraction_failure": bp.contraction,
        "expansion_failure": bp.expansion,
        "failure_bound": bp.failure_bound,
        "implied_constant": bp.implied_constant(),
    }


def cmd_bounds(args, warns) -> int:
    n, d, k = args.n, args.d, args.k
    if n < 2 or d < 3 or k < 1:
        raise UsageError("bounds needs n >= 2, d >= 3, k >= 1")
    if not 0 < args.split < 1:
        raise UsageError("--split must lie in (0, 1)")
    if k > d // 2:
        warnings.warn(f"k={k} exceeds floor(d/2)={d // 2}; volume certificates are refused")
    results = {
        "distance": _search_result(n, d, 1, "distance", args.split),
        "volume": _search_result(n, d, k, "volume", args.split) if k <= n - 1 else
        {"mode": "volume", "k": k, "feasible": False, "reason": "k must be <= n-1"},
        "formulas": {
            "distance_distortion_bound_c1": distance_distortion_bound(n, d, 1.0),
            "volume_distortion_bound_c1": _bound_or_none(volume_distortion_bound, n, d, 1.0),
        },
    }
    _emit("-", to_json(_envelope(args, {"n": n, "d": d, "k": k, "split": args.split}, results, warns)))
    return EXIT_OK


def _check(name, statistic, threshold, passed) -> dict:
    return {"check": name, "statistic": statistic, "threshold": threshold, "pass": bool(passed)}


def cmd_verify(args, warns) -> int:
    seed = RandomSeed(args.seed)
    if args.target == "stability":
        d = args.d or 9
        reps = args.reps or 10_000
        size = args.subset_size
        if size < 2 or size - 1 > d:
            raise UsageError("stability needs 2 <= subset-size <= d + 1")
        P_a = PointSet(synthetic_points("gaussian", max(size, 6), 10, seed.child(10)))
        P_b = PointSet(synthetic_points("sphere", max(size, 6), 40, seed.child(11), scale=7.0)
                       * np.linspace(1, 3, 40))
        ks_ab, ks_prod = verify_stability(P_a, P_b, d, size, reps, seed, workers=args.workers)
        params = {"d": d, "subset_size": size, "reps": reps, "N_a": 10, "N_b": 40}
        checks = [
            _check("ks_point_sets", ks_ab, args.threshold, ks_ab < args.threshold),
            _check("ks_vs_chi_square_product", ks_prod, args.threshold, ks_prod < args.threshold),
        ]
    elif args.target == "gordon":
        d = args.d or 10
        reps = args.reps or 100_000
        if not 1 <= args.s <= d or reps < 1000:
            raise UsageError("gordon needs 1 <= s <= d and reps >= 1000")
        rep = verify_gordon(d, args.s, reps, args.epsilon, seed, workers=args.workers)
        params = {"d": d, "s": args.s, "reps": reps, "epsilon": args.epsilon}
        checks = [
            _check("upper_dof_dominates", rep.lower_violation, rep.epsilon, rep.lower_violation <= rep.epsilon),
            _check("lower_dof_dominated", rep.upper_violation, rep.epsilon, rep.upper_violation <= rep.epsilon),
        ]
    else:
        params = {}
        checks = [
            _check(c["check"], c["violations"], 0, c["violations"] == 0) | {"points": c["points"],
                                                                            "max_log_excess": c["max_log_excess"]}
            for c in analytic_bound_checks()
        ]
    passed = all(c["pass"] for c in checks)
    results = {"target": args.target, "pass": passed, "checks": checks}
    _emit("-", to_json(_envelope(args, params, results, warns)))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_bench(args, warns) -> int:
    seed = RandomSeed(args.seed)
    rows = []
    for n in args.n_values:
        for d in args.d_values:
            k = args.k if args.k is not None else max(1, d // 2)
            if n < 2 or d < 1 or not 1 <= k <= n - 1:
                raise UsageError(f"invalid grid point n={n}, d={d}, k={k}")
            P = PointSet(synthetic_points("gaussian", n, args.dim, seed.child(n)))
            res = embed(P, d, k, args.trials, None, _strategy(args), seed.child(d), args.workers)
            bound = _bound_or_none(volume_distortion_bound, n, d, 1.0)
            rows.append((n, d, k, res.report.distortion, bound, args.trials, args.seed))
    header = ["n", "d", "k", "measured_distortion", "theoretical_bound", "trials", "seed"]
    _emit(args.output, rows_to_csv(header, rows))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "embed": cmd_embed,
    "report": cmd_report,
    "bounds": cmd_bounds,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed is None:
            args.seed = _default_seed()
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = COMMANDS[args.command](args, caught)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return code
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"volembed {args.command}: error: {exc}\n")
    except DegenerateInputError as exc:
        print(f"volembed {args.command}: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ParseError, InvalidInputError) as exc:
        print(f"volembed {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"volembed {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``cone-bvp {validate,solve,intervals,sweep,radial}``.

Exit codes: 0 success, 1 a reported failure (hypothesis, convergence,
empty intervals), 2 unusable input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import LAMBDA_CAP, LAMBDA_FLOOR, check_h1_h2, component_constants, \
    eigenvalue_intervals, lambda_sweep, resolve_g_limits
from .expr import ExprError
from .problem import SpecError, load_problem, load_radial, radial_to_bvp, spec_to_dict, validate
from .quadrature import DEFAULT_GRID, grid_nodes
from .solver import SolverConfig, multi_start, solve, verify_solution

SCHEMA_VERSION = 1
DEFAULT_SEED = 42
SEED_ENV = "CONE_BVP_SEED"

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Unusable input: exit code 2."""


@dataclass
class RunManifest:
    command: str
    input: str
    config: dict
    outputs: list = field(default_factory=list)
    duration_s: float = 0.0
    version: str = __version__
    notes: list = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        self.outputs.append(str(path))
        _write_json(path, asdict(self))
        return path


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return f"{float(x):.17g}"


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def resolve_seed(flag: int | None) -> int:
    """--seed wins, then the CONE_BVP_SEED environment variable, then 42."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _load(path: str):
    try:
        return load_problem(path)
    except (OSError, json.JSONDecodeError, SpecError, ExprError, KeyError, TypeError,
            ValueError) as exc:
        raise InputError(f"cannot load {path}: {exc}") from None


def _out_dir(path: str | None) -> Path:
    out = Path(path or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> SolverConfig:
    try:
        return SolverConfig(grid=args.grid, tol=args.tol, method=args.method,
                            damping=args.damping, max_iter=args.max_iter)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    spec = _load(args.problem)
    report = validate(spec)
    text = json.dumps(_json_safe(report.as_dict()), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    for c in report.failures():
        print(f"FAIL {c.name}: {c.detail}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def write_solution_csv(path: Path, U: np.ndarray) -> None:
    n, size = U.shape
    t = grid_nodes(size - 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"u{i + 1}" for i in range(n)])
        for j in range(size):
            w.writerow([_fmt(t[j])] + [_fmt(U[i, j]) for i in range(n)])


def cmd_solve(args) -> int:
    start = time.perf_counter()
    spec = _load(args.problem)
    config = _config(args)
    if (args.alpha is None) != (args.beta is None):
        raise InputError("--alpha and --beta go together")
    found = []
    if args.alpha is not None:
        if not (args.alpha > 0 and args.beta > 0):
            raise InputError("--alpha and --beta must be positive")
        ms = multi_start(spec, args.alpha, args.beta, config)
        found = list(ms.distinct)
        bundle = found[0] if found else min(ms.bundles, key=lambda b: b.r_fp)
    else:
        bundle = solve(spec, config)
    check = verify_solution(spec, bundle, args.alpha, args.beta)
    out = _out_dir(args.out)
    manifest = RunManifest("solve", args.problem,
                           {"grid": config.grid, "tol": config.tol, "method": config.method,
                            "damping": config.damping, "max_iter": config.max_iter,
                            "alpha": args.alpha, "beta": args.beta})
    csv_path = out / "solution.csv"
    write_solution_csv(csv_path, bundle.as_array())
    report = {
        "schema_version": SCHEMA_VERSION,
        "solution": bundle.as_dict(),
        "verification": check.as_dict(),
        "sandwich": check.sandwich,
        "distinct_solutions": [b.norm for b in found],
    }
    rep_path = out / "report.json"
    _write_json(rep_path, _json_safe(report))
    manifest.outputs += [str(csv_path), str(rep_path)]
    manifest.duration_s = time.perf_counter() - start
    manifest.write(out)
    status = "converged" if bundle.converged else "NOT converged"
    print(f"{status}: |u| = {bundle.norm:.10g}, r_fp = {bundle.r_fp:.3g}, "
          f"sigma = {[round(s, 10) for s in bundle.sigmas]}, method = {bundle.method}")
    if check.sandwich is not None:
        print(f"norm sandwich [{min(args.alpha, args.beta)}, {max(args.alpha, args.beta)}]: "
              f"{'pass' if check.sandwich else 'fail'}")
    return EXIT_OK if bundle.converged else EXIT_FAIL


def _declared(args) -> dict:
    d = {}
    try:
        if args.g0:
            d["g0"] = _float_list(args.g0)
        if args.ginf:
            d["ginf"] = _float_list(args.ginf)
    except ValueError as exc:
        raise InputError(f"bad g-limit list: {exc}") from None
    return d


def _require_separable(spec):
    if not spec.separable:
        raise InputError("this command needs a separable problem (h and g)")


def cmd_intervals(args) -> int:
    start = time.perf_counter()
    spec = _load(args.problem)
    _require_separable(spec)
    seed = resolve_seed(args.seed)
    try:
        limits = resolve_g_limits(spec, _declared(args), seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    consts = component_constants(spec, limits, args.grid)
    report = eigenvalue_intervals(spec, constants=consts, N=args.grid)
    hyp = check_h1_h2(spec, constants=consts)
    data = report.as_dict()
    data["schema_version"] = SCHEMA_VERSION
    data["hypotheses"] = hyp.as_dict()
    out = _out_dir(args.out)
    path = out / "intervals.json"
    _write_json(path, _json_safe(data))
    manifest = RunManifest("intervals", args.problem, {"grid": args.grid, "seed": seed,
                                                       "declared": _declared(args)})
    manifest.outputs.append(str(path))
    manifest.duration_s = time.perf_counter() - start
    manifest.write(out)
    print(f"interval_s = {report.interval_s}, interval_t = {report.interval_t}, "
          f"h1 = {hyp.holds('h1')}, h2 = {hyp.holds('h2')}")
    if report.empty and not (hyp.holds("h1") or hyp.holds("h2")):
        return EXIT_FAIL
    return EXIT_OK


def write_sweep_csv(path: Path, rows, n: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "converged", "norm", "r_fp", "r_ode"]
                   + [f"sigma_{i + 1}" for i in range(n)])
        for r in rows:
            w.writerow([_fmt(r.lam), _fmt(r.converged), _fmt(r.norm), _fmt(r.r_fp),
                        _fmt(r.r_ode)] + [_fmt(s) for s in r.sigmas])


def cmd_sweep(args) -> int:
    start = time.perf_counter()
    spec = _load(args.problem)
    _require_separable(spec)
    config = _config(args)
    if args.points < 1:
        raise InputError("--points must be >= 1")
    notes = []
    if args.lambda_min is None or args.lambda_max is None:
        report = eigenvalue_intervals(spec, seed=resolve_seed(args.seed), N=args.grid)
        interval = report.interval_s or report.interval_t
        notes.append(f"lambda range taken from the computed interval {interval}")
    else:
        interval = (args.lambda_min, args.lambda_max)
    sweep = lambda_sweep(spec, interval, args.points, config, cap=args.cap)
    if sweep.capped:
        notes.append(f"upper end truncated at cap {args.cap}")
    if sweep.floored:
        notes.append(f"lower end raised to floor {LAMBDA_FLOOR}")
    out = _out_dir(args.out)
    path = out / "sweep.csv"
    write_sweep_csv(path, sweep.rows, spec.n)
    manifest = RunManifest("sweep", args.problem,
                           {"grid": config.grid, "tol": config.tol, "method": config.method,
                            "points": args.points, "interval": _json_safe(list(interval or [])),
                            "cap": args.cap, "floor": LAMBDA_FLOOR,
                            "seed": resolve_seed(args.seed)}, notes=notes)
    manifest.outputs.append(str(path))
    manifest.duration_s = time.perf_counter() - start
    manifest.write(out)
    for r in sweep.rows:
        print(f"lambda = {r.lam:.6g}: {'converged' if r.converged else 'failed'}, "
              f"|u| = {r.norm:.6g}")
    return EXIT_OK


def cmd_radial(args) -> int:
    start = time.perf_counter()
    try:
        rspec = load_radial(args.radial)
        spec = radial_to_bvp(rspec)
        with open(args.radial) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError, SpecError, ExprError, KeyError, TypeError,
            ValueError) as exc:
        raise InputError(f"cannot transform {args.radial}: {exc}") from None
    data = spec_to_dict(spec)
    if "lambda" in raw:
        data["lambda"] = float(raw["lambda"])
    out = _out_dir(args.out)
    path = out / "problem.json"
    _write_json(path, data)
    manifest = RunManifest("radial", args.radial, {"dimension": rspec.dimension,
                                                   "R1": rspec.R1, "R2": rspec.R2})
    manifest.outputs.append(str(path))
    manifest.duration_s = time.perf_counter() - start
    manifest.write(out)
    print(f"q(t) = {data['weight_q']}, p(t) = {data['weight_p']}, h = {data['h']}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="cells N (even, >= 16)")
    p.add_argument("--tol", type=float, default=1e-10, help="fixed-point residual tolerance")
    p.add_argument("--method", choices=("picard", "newton", "auto"), default="auto")
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cone-bvp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the standing hypotheses of a problem file")
    p.add_argument("problem")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="compute a positive solution")
    p.add_argument("problem")
    _solver_flags(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("intervals", help="A_i, B_i, g-limits and lambda-intervals")
    p.add_argument("problem")
    p.add_argument("--g0", help="declared g0 limits, comma separated (inf allowed)")
    p.add_argument("--ginf", help="declared ginf limits, comma separated (inf allowed)")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_intervals)

    p = sub.add_parser("sweep", help="solve across a lambda range")
    p.add_argument("problem")
    _solver_flags(p)
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--cap", type=float, default=LAMBDA_CAP, help="truncation for infinite ends")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("radial", help="map an annulus problem to the unit interval")
    p.add_argument("radial")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_radial)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

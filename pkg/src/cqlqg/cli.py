"""Command-line interface.

Exit codes: 0 ok, 1 validation or check failure, 2 unreadable or malformed
input, 3 no stabilizing initialization, 4 synthesis stalled.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .classical import classical_controller, compare
from .errors import CQLQGError, InitializationFailed, ShapeError, ValidationError
from .gradcheck import gradient_check
from .io import (DimensionMismatch, ProblemParseError, certificate_to_dict, classical_to_dict,
                 dumps, load_problem, problem_hash, random_plant, read_report, synthesis_to_dict,
                 write_report)
from .linalg import spectral_abscissa
from .optimizer import (CONVERGED, ORDERS, STALLED, STEP_KINDS, SolveConfig, check_criticality,
                        initial_params, synthesize)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_INIT = 3
EXIT_STALLED = 4

# JSON file with SolveConfig overrides applied before the problem's own
CONFIG_ENV = "CQLQG_CONFIG"

log = logging.getLogger("cqlqg")


class UsageError(Exception):
    pass


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load(path):
    """(problem, plant) or an exit code with the message already printed."""
    try:
        problem = load_problem(path)
    except (OSError, ProblemParseError) as exc:
        return _fail(EXIT_PARSE, f"{path}: {exc}"), None
    except (DimensionMismatch, ShapeError) as exc:
        return _fail(EXIT_INVALID, f"{path}: {exc}"), None
    try:
        plant = problem.plant()
    except (ValidationError, ShapeError) as exc:
        return _fail(EXIT_INVALID, f"{path}: {type(exc).__name__}: {exc}"), None
    return problem, plant


def parse_order(text):
    if text in ORDERS:
        return ORDERS[text]
    kinds = tuple(k.strip() for k in text.split(",") if k.strip())
    for k in kinds:
        if k not in STEP_KINDS:
            raise UsageError(f"unknown step kind {k!r}; use one of {sorted(ORDERS)} "
                             f"or a comma list of {STEP_KINDS}")
    return kinds


def build_config(problem, args):
    """SolveConfig from defaults, $CQLQG_CONFIG, the problem file and flags, in that order."""
    fields = SolveConfig.__dataclass_fields__
    merged = {}
    env = os.environ.get(CONFIG_ENV)
    if env:
        with open(env) as fh:
            merged.update(json.load(fh))
    merged.update(problem.config)
    flags = {"seed": args.seed, "max_iters": args.max_iters, "tol_psi": args.tol_psi,
             "tol_grad": args.tol_grad, "restarts": args.restarts}
    merged.update({k: v for k, v in flags.items() if v is not None})
    if args.order is not None:
        merged["order"] = parse_order(args.order)
    elif isinstance(merged.get("order"), str):
        merged["order"] = parse_order(merged["order"])
    unknown = sorted(set(merged) - set(fields))
    if unknown:
        raise UsageError(f"unknown solver settings {unknown}")
    if "init" not in merged and problem.initial is not None:
        merged["init"] = "user"
    return SolveConfig(**merged)


def _fmt_damping(d):
    parts = []
    for k, v in d.items():
        parts.append(f"{k}:{'-' if v is None else format(v, '.3g')}")
    return ",".join(parts) or "-"


def print_record(rec, out=None):
    out = sys.stdout if out is None else out
    print(f"{rec.iteration:4d}  E={rec.cost:.12g}  |Psi|={rec.psi_norm:.3e}  "
          f"|dE/db|={rec.dedb_norm:.3e}  abscissa={rec.abscissa:.4g}  "
          f"damping={_fmt_damping(rec.damping)}", file=out, flush=True)


# commands

def cmd_validate(args):
    problem, plant = _load(args.problem)
    if plant is None:
        return problem
    d = plant.dims
    print("dims: " + " ".join(f"{k}={v}" for k, v in d.items()))
    print(f"layout: {plant.layout}")
    print(f"rank(D) = {np.linalg.matrix_rank(plant.D)} (need {plant.p})")
    print(f"rank(D0) = {np.linalg.matrix_rank(plant.D0)} (need {plant.m2})")
    print(f"spectral abscissa of A: {spectral_abscissa(plant.A):.6g}")
    if problem.initial is not None:
        print("initial parameters: present")
    print("valid")
    return EXIT_OK


def _classical_record(plant, quantum_cost=None):
    try:
        ctrl = classical_controller(plant)
    except CQLQGError as exc:
        return None, {"error": f"{type(exc).__name__}: {exc}"}
    rec = classical_to_dict(ctrl)
    if quantum_cost is not None:
        rec["gap"] = compare(ctrl.cost, quantum_cost)._asdict()
    return ctrl, rec


def cmd_synthesize(args):
    problem, plant = _load(args.problem)
    if plant is None:
        return problem
    try:
        config = build_config(problem, args)
    except (UsageError, ValueError, TypeError, OSError) as exc:
        return _fail(EXIT_PARSE, str(exc))
    print(f"# {'iter':>2}  cost, |Psi|, |dE/db|, closed-loop abscissa, accepted step damping")
    try:
        report = synthesize(plant, config, user_params=problem.initial,
                            callback=None if args.quiet else print_record)
    except InitializationFailed as exc:
        return _fail(EXIT_INIT, str(exc))
    try:
        cert = certificate_to_dict(check_criticality(plant, report.params, fd=not args.no_fd))
    except CQLQGError as exc:
        cert = {"error": f"{type(exc).__name__}: {exc}"}
    _, classical = _classical_record(plant, report.cost)
    out = {"tool_version": __version__, "problem_sha256": problem_hash(problem),
           "seed": config.seed, "config": config.to_dict(), "synthesis": synthesis_to_dict(report),
           "certificate": cert, "classical": classical}
    path = args.out or _default_out(args.problem, "report")
    write_report(out, path)
    print(f"status={report.status} cost={report.cost:.12g} iterations={report.outer_iterations} "
          f"classical={classical.get('cost', float('nan')):.12g} report={path}")
    for msg in report.diagnostics:
        print(f"diagnostic: {msg}")
    if report.status == STALLED:
        return EXIT_STALLED
    if report.status != CONVERGED and args.max_iters != 0:
        log.warning("synthesis ended with status %s", report.status)
    return EXIT_OK


def cmd_gradcheck(args):
    problem, plant = _load(args.problem)
    if plant is None:
        return problem
    if args.directions <= 0:
        print("warning: --directions 0, nothing to check", file=sys.stderr)
        print(f"{'derivative':<10} {'dirs':>5} {'max rel err':>12} {'tol':>8}")
        return EXIT_OK
    try:
        params = problem.initial
        if params is None:
            params = initial_params(plant, SolveConfig(seed=args.seed))
        result = gradient_check(plant, params, args.directions, args.h,
                                np.random.default_rng(args.seed), corrupt_b=args.corrupt_dedb)
    except InitializationFailed as exc:
        return _fail(EXIT_INIT, str(exc))
    except CQLQGError as exc:
        return _fail(EXIT_INVALID, f"{type(exc).__name__}: {exc}")
    print(f"{'derivative':<10} {'dirs':>5} {'max rel err':>12} {'tol':>8}")
    for r in result.rows:
        flag = "" if r.passed else "  FAIL"
        print(f"{r.name:<10} {r.directions:>5} {r.max_rel_error:>12.3e} {r.tol:>8.0e}{flag}")
    if not result.passed:
        worst = result.worst
        return _fail(EXIT_INVALID, f"derivative check failed; worst: {worst.name} "
                                   f"(relative error {worst.max_rel_error:.3e})")
    return EXIT_OK


def cmd_classical(args):
    problem, plant = _load(args.problem)
    if plant is None:
        return problem
    ctrl, rec = _classical_record(plant)
    if ctrl is None:
        return _fail(EXIT_INVALID, rec["error"])
    np.set_printoptions(precision=10, suppress=False)
    print(f"cost: {ctrl.cost:.12g}")
    print(f"control gain c:\n{ctrl.c}")
    print(f"filter gain b2:\n{ctrl.b2}")
    print(f"control Riccati residual: {ctrl.control_residual:.3e}")
    print(f"filter Riccati residual: {ctrl.filter_residual:.3e}")
    if args.out:
        write_report({"tool_version": __version__, "problem_sha256": problem_hash(problem),
                      "classical": rec}, args.out)
    return EXIT_OK


def cmd_random_plant(args):
    problem = random_plant(args.seed, n=args.n, abscissa=args.abscissa)
    text = dumps(problem.to_dict())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args):
    from .plotting import render_report

    try:
        report = read_report(args.report)
        if "synthesis" not in report:
            raise KeyError("synthesis")
    except (OSError, ValueError, KeyError) as exc:
        return _fail(EXIT_PARSE, f"{args.report}: not a synthesis report ({exc})")
    out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.report))
    stem = args.stem or os.path.splitext(os.path.basename(args.report))[0]
    for path in render_report(report, out_dir, stem):
        print(path)
    return EXIT_OK


def _default_out(problem_path, tag):
    root, _ = os.path.splitext(problem_path)
    return f"{root}.{tag}.json"


def build_parser():
    parser = argparse.ArgumentParser(prog="cqlqg",
                                     description="Coherent quantum LQG controller synthesis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a problem file")
    p.add_argument("problem")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synthesize", help="run the synthesis and write a report")
    p.add_argument("problem")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--order", help=f"one of {sorted(ORDERS)} or a comma list of step kinds")
    p.add_argument("--tol-psi", type=float)
    p.add_argument("--tol-grad", type=float)
    p.add_argument("--restarts", type=int, help="restart attempts sharing the iteration budget")
    p.add_argument("--out", help="report path (default: <problem>.report.json)")
    p.add_argument("--no-fd", action="store_true", help="skip the finite-difference certificate")
    p.add_argument("-q", "--quiet", action="store_true", help="no per-iteration lines")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic derivatives")
    p.add_argument("problem")
    p.add_argument("--h", type=float, help="absolute difference step")
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-dedb", action="store_true",
                   help="flip the sign of the analytic dE/db (checks that the checker fails)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("classical", help="classical LQG baseline")
    p.add_argument("problem")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("random-plant", help="write a seeded random problem")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--abscissa", type=float, default=-0.5,
                   help="spectral abscissa of A (positive for open-loop unstable)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_random_plant)

    p = sub.add_parser("plot", help="CSV trace and PNG figure from a synthesis report")
    p.add_argument("report")
    p.add_argument("--out-dir")
    p.add_argument("--stem")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_PARSE, str(exc))
    except BrokenPipeError:
        # output piped into a reader that closed early, e.g. head
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

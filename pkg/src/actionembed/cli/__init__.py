"""Command-line interface.

Exit codes: 0 feasible / success, 1 input error, 2 infeasible point,
3 self-test failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

from ..problems import ChannelActionProblem, ProbingProblem, SourceActionProblem, probing_example, zs_example
from ..regions.binary import BINARY_CONFIG
from ..regions.channel import PROBING_CONFIG, channel_max_sum_rate, solve_probing
from ..regions.curves import TradeoffCurve, fig7_rows, fig8_rows, fig11_rows, trace_curve
from ..regions.source import solve_source
from ..solvers import SolverConfig, SolverError
from .problem_file import ProblemFileError, dump_problem, load_problem

THREADS_ENV = "ACTIONEMBED_THREADS"

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SELFTEST = 0, 1, 2, 3

CURVE_COLUMNS = {
    "fig7": ("delta", "d2", "rate_nc"),
    "fig8": ("delta", "d2", "rate_nc", "rate_sc", "diff"),
    "fig11": ("gamma_x", "r1", "sum_rate"),
}


def fmt(x: float) -> str:
    # + 0.0 folds negative zero
    return f"{float(x) + 0.0:.9g}"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _parse_cards(items: Sequence[str]) -> dict[str, int]:
    out = {}
    for item in items or ():
        name, _, value = item.partition("=")
        if not name or not value:
            raise argparse.ArgumentTypeError(f"--card expects NAME=INT, got {item!r}")
        out[name.strip()] = int(value)
    return out


def _config(args, base: SolverConfig) -> SolverConfig:
    changes = {"threads": args.threads if args.threads else _default_threads()}
    for flag, name in (("grid", "grid_resolution"), ("restarts", "restarts"), ("seed", "seed"),
                       ("refine_iters", "refine_iters")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    cards = _parse_cards(getattr(args, "card", None))
    if cards:
        changes["aux_cardinalities"] = cards
    return base.replace(**changes)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--grid", type=int, help="simplex grid resolution")
    g.add_argument("--restarts", type=int, help="random refinement starts")
    g.add_argument("--refine-iters", dest="refine_iters", type=int, help="refinement iterations")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--card", action="append", metavar="NAME=INT", help="auxiliary cardinality, e.g. U=3")
    g.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actionembed",
        description="Rate-distortion-cost and capacity-cost regions with information embedded on actions.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one operating point of a problem file")
    p.add_argument("problem", help="JSON problem file")
    p.add_argument("--d1", type=float, default=math.inf, help="Decoder 1 distortion budget")
    p.add_argument("--d2", type=float, default=math.inf, help="Decoder 2 distortion budget")
    p.add_argument("--gamma", type=float, default=math.inf, help="action (or input) cost budget")
    p.add_argument("--r1", type=float, default=0.0, help="rate on the action stream (channel, probing)")
    p.add_argument("--gamma-a", dest="gamma_a", type=float, help="override the probing action budget")
    p.add_argument("--gamma-x", dest="gamma_x", type=float, help="override the probing input budget")
    _solver_flags(p)

    p = sub.add_parser("curve", help="emit a trade-off curve as CSV")
    p.add_argument("figure", choices=["fig7", "fig8", "fig11", "custom"])
    p.add_argument("--out", help="write CSV here instead of standard output")
    p.add_argument("--problem", help="problem file (custom sweeps)")
    p.add_argument("--sweep", choices=["d1", "d2", "gamma", "r1", "gamma_x"], help="swept budget (custom)")
    p.add_argument("--values", help="comma-separated sweep values (custom)")
    p.add_argument("--d1", type=float, default=math.inf)
    p.add_argument("--d2", type=float, default=math.inf)
    p.add_argument("--gamma", type=float, default=math.inf)
    p.add_argument("--r1", type=float, default=0.0)
    _solver_flags(p)

    p = sub.add_parser("selftest", help="run the self-test gate")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", help="reduced resolutions (default)")
    mode.add_argument("--full", action="store_true", help="full resolutions")

    p = sub.add_parser("export-example", help="write a catalog problem as JSON")
    p.add_argument("name", choices=["zs", "probing"])
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--mode", default="noncausal")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--gamma-a", dest="gamma_a", type=float, default=1.0)
    p.add_argument("--gamma-x", dest="gamma_x", type=float, default=0.25)
    p.add_argument("--out")
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _solve_point(problem, args, config, start=None):
    if isinstance(problem, SourceActionProblem):
        return solve_source(problem, args.d1, args.d2, args.gamma, config, start)
    if isinstance(problem, ChannelActionProblem):
        return channel_max_sum_rate(problem, args.r1, args.gamma, config, start)
    if isinstance(problem, ProbingProblem):
        return solve_probing(problem, args.r1, config, start)
    raise TypeError(type(problem).__name__)


def _base_config(problem) -> SolverConfig:
    return PROBING_CONFIG if isinstance(problem, ProbingProblem) else SolverConfig()


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    if isinstance(problem, ProbingProblem) and (args.gamma_a is not None or args.gamma_x is not None):
        problem = probing_example(
            problem.epsilon,
            problem.gamma_a_budget if args.gamma_a is None else args.gamma_a,
            problem.gamma_x_budget if args.gamma_x is None else args.gamma_x,
        )
    point = _solve_point(problem, args, _config(args, _base_config(problem)))
    print(point.to_json())
    return EXIT_OK if point.feasible else EXIT_INFEASIBLE


def _custom_rows(args) -> tuple[tuple[str, ...], list[tuple]]:
    if not args.problem or not args.sweep or not args.values:
        raise ProblemFileError("custom curves need --problem, --sweep and --values")
    problem = load_problem(args.problem)
    try:
        grid = sorted(float(v) for v in args.values.split(","))
    except ValueError as exc:
        raise ProblemFileError(f"bad --values: {exc}") from exc
    config = _config(args, _base_config(problem))
    if isinstance(problem, SourceActionProblem):
        names = {"d1": "D1", "d2": "D2", "gamma": "gamma"}
        if args.sweep not in names:
            raise ProblemFileError(f"source problems sweep d1, d2 or gamma, not {args.sweep}")
        fixed = {"problem": problem, "D1": args.d1, "D2": args.d2, "gamma": args.gamma}
        fixed.pop(names[args.sweep])
        curve = trace_curve(solve_source, fixed, names[args.sweep], grid, config)
    elif isinstance(problem, ChannelActionProblem):
        if args.sweep not in ("r1", "gamma"):
            raise ProblemFileError("channel problems sweep r1 or gamma")
        fixed = {"problem": problem, "R1": args.r1, "gamma": args.gamma}
        key = "R1" if args.sweep == "r1" else "gamma"
        fixed.pop(key)
        trend = "nonincreasing" if key == "R1" else "nondecreasing"
        curve = trace_curve(channel_max_sum_rate, fixed, key, grid, config, trend=trend)
    else:
        if args.sweep not in ("r1", "gamma_x"):
            raise ProblemFileError("probing problems sweep r1 or gamma_x")
        if args.sweep == "r1":
            curve = trace_curve(solve_probing, {"problem": problem}, "R1", grid, config)
        else:
            pts, prev = [], None
            for gx in grid:
                pt = solve_probing(probing_example(problem.epsilon, problem.gamma_a_budget, gx), args.r1,
                                   config, start=prev)
                pts.append(pt)
                prev = pt if pt.feasible else prev
            curve = TradeoffCurve("gamma_x", grid, pts)
    rows = []
    for v, pt in zip(curve.values, curve.points):
        if pt.feasible:
            rows.append((v, pt.rate))
        else:
            logging.getLogger(__name__).warning("infeasible at %s=%g; row omitted", args.sweep, v)
    return (args.sweep, "rate"), rows


def curve_csv(args) -> str:
    if args.figure == "custom":
        header, rows = _custom_rows(args)
    else:
        base = PROBING_CONFIG if args.figure == "fig11" else BINARY_CONFIG
        config = _config(args, base)
        header = CURVE_COLUMNS[args.figure]
        rows = {"fig7": fig7_rows, "fig8": fig8_rows, "fig11": fig11_rows}[args.figure](config)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if not all(math.isfinite(float(x)) for x in row):
            raise SolverError(f"non-finite value in row {row}")
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def cmd_curve(args) -> int:
    text = curve_csv(args)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(quick=not args.full)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail} ({r.seconds:.1f}s)")
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_SELFTEST if failed else EXIT_OK


def cmd_export(args) -> int:
    if args.name == "zs":
        problem = zs_example(args.delta, args.mode)
    else:
        problem = probing_example(args.epsilon, args.gamma_a, args.gamma_x)
    text = dump_problem(problem, args.out)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "curve": cmd_curve, "selftest": cmd_selftest, "export-example": cmd_export}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ProblemFileError, SolverError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

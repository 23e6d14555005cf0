"""Command-line front end.

Subcommands::

    picardbvp solve          --problem FILE [--iters N] [--out DIR]
    picardbvp solve-multi    --problem FILE --segments N
    picardbvp gates          --problem FILE (--lipschitz L | --box ylo,yhi,ulo,uhi)
    picardbvp compare-oracle --problem FILE [--bracket lo,hi] [--tol R]

Exit codes: 0 converged / within tolerance, 1 bad problem file, 2 iteration
limit reached (argparse usage errors also exit 2), 3 divergence, 4 no
shooting bracket, 5 oracle difference above ``--tol``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import analysis, expr
from .multishoot import solve_multi
from .oracle import BracketError, OracleDivergence, shooting_solve
from .picard import DivergenceError, SolveOptions, solve
from .problem import PolynomializeError, Problem, ProblemFileError, Unknown, estimate_lipschitz, load_problem

log = logging.getLogger("picardbvp")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_MAX_ITERATIONS = 2
EXIT_DIVERGED = 3
EXIT_BRACKET = 4
EXIT_TOLERANCE = 5

FORMATS = ("csv", "json")
ORACLE_STEPS = 10_000


@dataclass
class RunConfig:
    subcommand: str
    problem_path: Path
    output_dir: Path = Path("picardbvp_out")
    formats: frozenset[str] = frozenset(FORMATS)
    iters: int | None = None
    gamma_tol: float | None = None
    state_tol: float | None = None
    degree_cap: int | None = None
    samples: int | None = None
    segments: int | None = None
    lipschitz: float | None = None
    box: tuple[float, float, float, float] | None = None
    n_max: int = 8
    tol: float = 1e-4
    bracket: tuple[float, float] | None = None
    plot: bool = False
    written: list[Path] = field(default_factory=list)

    def options(self) -> SolveOptions:
        base = SolveOptions()
        return SolveOptions(
            max_iterations=self.iters if self.iters is not None else base.max_iterations,
            gamma_tol=self.gamma_tol if self.gamma_tol is not None else base.gamma_tol,
            state_tol=self.state_tol if self.state_tol is not None else base.state_tol,
            degree_cap=self.degree_cap if self.degree_cap is not None else base.degree_cap,
            samples=self.samples if self.samples is not None else base.samples,
        )


# --- output helpers ----------------------------------------------------------


def _num(x) -> str:
    # repr is the shortest string that round-trips, so reruns are byte-identical
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))


def _write_csv(cfg: RunConfig, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    if "csv" not in cfg.formats:
        return
    path = cfg.output_dir / name
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else _num(c) for c in row])
    cfg.written.append(path)


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _write_report(cfg: RunConfig, report: dict) -> None:
    if "json" not in cfg.formats:
        return
    path = cfg.output_dir / "report.json"
    path.write_text(json.dumps(_json_safe(report), indent=2) + "\n")
    cfg.written.append(path)


def _reference_unknown(problem: Problem) -> float | None:
    if problem.exact is None:
        return None
    if problem.spec.unknown is Unknown.SLOPE:
        return problem.exact_slope
    return float(problem.exact_y(problem.spec.a))


def _load(cfg: RunConfig) -> Problem:
    return load_problem(cfg.problem_path)


# --- subcommands -------------------------------------------------------------


def run_solve(cfg: RunConfig) -> int:
    problem = _load(cfg)
    spec = problem.spec
    opts = cfg.options()
    try:
        sol = solve(spec, opts)
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED

    ref = _reference_unknown(problem)
    label = "gamma" if spec.unknown is Unknown.SLOPE else "alpha"
    errors = [abs(it.unknown_value - ref) if ref is not None else None for it in sol.iterates]
    _write_csv(
        cfg,
        "gamma_trace.csv",
        ["k", "value", "delta", "error"],
        ((it.k, it.unknown_value, it.unknown_delta, e) for it, e in zip(sol.iterates, errors)),
    )
    grid = np.linspace(spec.a, spec.b, opts.samples)
    y = sol.y(grid)
    _write_csv(cfg, "solution.csv", ["t", "y"], zip(grid, y))
    _write_report(
        cfg,
        {
            "problem": problem.name,
            "unknown": label,
            "converged": sol.converged,
            "iterations": sol.iterations_used,
            "unknown_trace": sol.unknown_trace,
            "right_residuals": sol.residual_trace,
            "sup_deltas": sol.state_deltas,
        },
    )

    print(f"{'k':>3}  {label:>22}  {'delta':>10}  {'sup change':>10}")
    for it in sol.iterates:
        print(f"{it.k:>3}  {it.unknown_value:>22.15g}  {it.unknown_delta:>10.3e}  {it.state_delta:>10.3e}")
    print(f"converged={sol.converged} iterations={sol.iterations_used} "
          f"|y(b)-beta|={sol.residual_trace[-1]:.3e}")

    if cfg.plot:
        from . import plotting

        exact = problem.exact_y(grid) * np.ones_like(grid) if problem.exact is not None else None
        cfg.written.append(plotting.plot_solution(cfg.output_dir / "solution.png", grid, y, exact, problem.name))
        err_trace = errors if ref is not None else None
        cfg.written.append(
            plotting.plot_convergence(cfg.output_dir / "convergence.png", sol.state_deltas, err_trace, problem.name)
        )
    return EXIT_OK if sol.converged else EXIT_MAX_ITERATIONS


def run_solve_multi(cfg: RunConfig) -> int:
    problem = _load(cfg)
    spec = problem.spec
    opts = cfg.options()
    try:
        sol = solve_multi(spec, cfg.segments, opts)
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED

    part = sol.partition
    pieces = []
    rows = []
    for seg in sol.segments:
        t = np.linspace(part.nodes[seg.j - 1], part.nodes[seg.j], opts.samples)
        y = seg.y(t)
        pieces.append((t, y))
        rows.extend((seg.j, ti, yi) for ti, yi in zip(t, y))
    _write_csv(cfg, "segments.csv", ["segment", "t", "y"], rows)
    _write_csv(
        cfg,
        "continuity.csv",
        ["node", "t", "value_jump", "slope_jump"],
        ((c.node, c.t, c.value_jump, c.slope_jump) for c in sol.continuity_report),
    )
    _write_report(
        cfg,
        {
            "problem": problem.name,
            "segments": part.n,
            "converged": sol.converged,
            "iterations": sol.iterations_used,
            "unknown_trace": [segs[0].gamma for segs in sol.history],
            "right_residuals": [abs(segs[-1].y(spec.b) - spec.beta) for segs in sol.history],
            "sup_deltas": sol.deltas,
            "gammas": sol.gammas,
            "betas": sol.betas,
        },
    )

    print(f"{'node':>4}  {'t':>10}  {'value jump':>10}  {'slope jump':>10}")
    for c in sol.continuity_report:
        print(f"{c.node:>4}  {c.t:>10.6g}  {c.value_jump:>10.3e}  {c.slope_jump:>10.3e}")
    print(f"converged={sol.converged} iterations={sol.iterations_used} n={part.n}")

    if cfg.plot:
        from . import plotting

        cfg.written.append(plotting.plot_segments(cfg.output_dir / "segments.png", pieces, part.nodes, problem.name))
        cfg.written.append(plotting.plot_convergence(cfg.output_dir / "convergence.png", sol.deltas, None, problem.name))
    return EXIT_OK if sol.converged else EXIT_MAX_ITERATIONS


def gate_rows(L: float, a: float, b: float, n_max: int) -> list[dict]:
    rows = []
    for n in range(1, n_max + 1):
        g = analysis.theorem1_gate(L, a, b) if n == 1 else analysis.theorem_multi_gate(L, a, b, n)
        rows.append(
            {
                "n": n,
                "regime": g.regime.value,
                "quantity": g.lhs,
                "bound": g.bound,
                "passed": g.passed,
                "L_max": analysis.max_lipschitz(a, b, n),
                "threshold": analysis.improvement_threshold(n) if n >= 2 else None,
            }
        )
    return rows


def run_gates(cfg: RunConfig) -> int:
    problem = _load(cfg)
    spec = problem.spec
    if cfg.lipschitz is not None:
        L, source = cfg.lipschitz, "given"
    else:
        ylo, yhi, ulo, uhi = cfg.box
        try:
            L = estimate_lipschitz(spec, {"y": (ylo, yhi), "u": (ulo, uhi)})
        except ValueError as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_PARSE
        source = "estimated on box"
    rows = gate_rows(L, spec.a, spec.b, cfg.n_max)
    header = ["n", "regime", "quantity", "bound", "passed", "L_max", "threshold"]
    _write_csv(cfg, "gates.csv", header, ([r[h] if not isinstance(r[h], bool) else str(r[h]).lower()
                                           for h in header] for r in rows))

    print(f"L = {L:.6g} ({source}), interval [{spec.a:.6g}, {spec.b:.6g}]")
    print(f"{'n':>2}  {'regime':<13}  {'quantity':>10}  {'bound':>8}  {'pass':<4}  {'L_max':>10}  {'threshold':>9}")
    for r in rows:
        thr = f"{r['threshold']:.6f}" if r["threshold"] is not None else "-"
        print(f"{r['n']:>2}  {r['regime']:<13}  {r['quantity']:>10.6g}  {r['bound']:>8.4g}  "
              f"{'yes' if r['passed'] else 'no':<4}  {r['L_max']:>10.6g}  {thr:>9}")
    n_min = analysis.min_subintervals(L, spec.a, spec.b, cfg.n_max)
    print(f"smallest passing n: {n_min if n_min is not None else 'none up to ' + str(cfg.n_max)}")
    return EXIT_OK


def _shoot(spec, bracket, center: float, step: float):
    if bracket is not None:
        return shooting_solve(spec, *bracket, step=step)
    # widen a window around the Picard estimate until the residual changes sign
    width = max(1.0, abs(center))
    for _ in range(12):
        try:
            return shooting_solve(spec, center - width, center + width, step=step)
        except BracketError:
            width *= 2.0
    raise BracketError(f"no sign change found around {center:.6g}")


def run_compare_oracle(cfg: RunConfig) -> int:
    problem = _load(cfg)
    spec = problem.spec
    opts = cfg.options()
    try:
        sol = solve(spec, opts)
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED

    # oracle grid must refine the sampling grid
    per = math.ceil(ORACLE_STEPS / (opts.samples - 1))
    step = (spec.b - spec.a) / (per * (opts.samples - 1))
    bracket = cfg.bracket or problem.bracket
    try:
        shot, traj = _shoot(spec, bracket, sol.unknown_trace[-1], step)
    except BracketError as err:
        print(f"bracket failure: {err}", file=sys.stderr)
        return EXIT_BRACKET
    except OracleDivergence as err:
        print(f"oracle diverged: {err}", file=sys.stderr)
        return EXIT_BRACKET

    t = traj.times[::per]
    y_oracle = traj.y[::per]
    y_picard = sol.y(t)
    diff = np.abs(y_picard - y_oracle)
    max_diff = float(np.max(diff))
    passed = max_diff < cfg.tol
    _write_csv(cfg, "compare.csv", ["t", "y_picard", "y_oracle", "abs_diff"], zip(t, y_picard, y_oracle, diff))
    _write_report(
        cfg,
        {
            "problem": problem.name,
            "converged": sol.converged,
            "iterations": sol.iterations_used,
            "unknown_trace": sol.unknown_trace,
            "right_residuals": sol.residual_trace,
            "sup_deltas": sol.state_deltas,
            "oracle_unknown": shot,
            "max_diff": max_diff,
            "tol": cfg.tol,
            "passed": passed,
        },
    )
    print(f"picard unknown = {sol.unknown_trace[-1]:.15g} after {sol.iterations_used} iterations")
    print(f"oracle unknown = {shot:.15g}")
    print(f"max_diff = {max_diff:.3e} (tol {cfg.tol:g}) {'PASS' if passed else 'FAIL'}")

    if cfg.plot:
        from . import plotting

        cfg.written.append(plotting.plot_comparison(cfg.output_dir / "compare.png", t, y_picard, y_oracle,
                                                    problem.name))
    return EXIT_OK if passed else EXIT_TOLERANCE


RUNNERS = {
    "solve": run_solve,
    "solve-multi": run_solve_multi,
    "gates": run_gates,
    "compare-oracle": run_compare_oracle,
}


# --- argument parsing --------------------------------------------------------


def _floats(count: int):
    def parse(text: str) -> tuple[float, ...]:
        try:
            values = tuple(expr.parse_constant(v.strip()) for v in text.split(","))
        except ValueError as err:
            raise argparse.ArgumentTypeError(str(err)) from None
        if len(values) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers")
        return values

    return parse


def _formats(text: str) -> frozenset[str]:
    chosen = frozenset(s.strip() for s in text.split(",") if s.strip())
    bad = chosen - set(FORMATS)
    if bad or not chosen:
        raise argparse.ArgumentTypeError(f"formats must be a subset of {','.join(FORMATS)}")
    return chosen


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, type=Path, help="problem file (JSON)")
    common.add_argument("--out", type=Path, default=Path("picardbvp_out"), help="output directory")
    common.add_argument("--format", type=_formats, default=frozenset(FORMATS), help="csv,json (default both)")
    common.add_argument("--plot", action="store_true", help="also render PNG figures into --out")
    common.add_argument("-v", "--verbose", action="store_true")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--iters", type=int, help="maximum iterations (default 25)")
    solver.add_argument("--gamma-tol", type=float)
    solver.add_argument("--state-tol", type=float)
    solver.add_argument("--degree-cap", type=int)
    solver.add_argument("--samples", type=int, help="sampling grid size (default 201)")

    parser = argparse.ArgumentParser(
        prog="picardbvp",
        description="Picard iteration for two-point boundary value problems y'' = f(t, y, y').",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("solve", parents=[common, solver], help="single-interval solve")
    multi = sub.add_parser("solve-multi", parents=[common, solver], help="solve on n equal subintervals")
    multi.add_argument("--segments", type=int, required=True, help="number of subintervals (>= 2)")
    gates = sub.add_parser("gates", parents=[common], help="existence/convergence gate table")
    gates.add_argument("--lipschitz", type=float, help="Lipschitz constant L")
    gates.add_argument("--box", type=_floats(4), help="ylo,yhi,ulo,uhi for estimating L")
    gates.add_argument("--n-max", type=int, default=8)
    cmp_ = sub.add_parser("compare-oracle", parents=[common, solver], help="check against RK4 shooting")
    cmp_.add_argument("--tol", type=float, default=1e-4)
    cmp_.add_argument("--bracket", type=_floats(2), help="lo,hi bracket for the shooting unknown")
    return parser


def config_from_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> RunConfig:
    if args.subcommand == "solve-multi" and args.segments < 2:
        parser.error("solve-multi needs --segments >= 2; use 'solve' for a single interval")
    if args.subcommand == "gates":
        if args.lipschitz is None and args.box is None:
            parser.error("gates needs --lipschitz L or --box ylo,yhi,ulo,uhi")
        if args.n_max < 1:
            parser.error("--n-max must be positive")
    return RunConfig(
        subcommand=args.subcommand,
        problem_path=args.problem,
        output_dir=args.out,
        formats=args.format,
        iters=getattr(args, "iters", None),
        gamma_tol=getattr(args, "gamma_tol", None),
        state_tol=getattr(args, "state_tol", None),
        degree_cap=getattr(args, "degree_cap", None),
        samples=getattr(args, "samples", None),
        segments=getattr(args, "segments", None),
        lipschitz=getattr(args, "lipschitz", None),
        box=getattr(args, "box", None),
        n_max=getattr(args, "n_max", 8),
        tol=getattr(args, "tol", 1e-4),
        bracket=getattr(args, "bracket", None),
        plot=args.plot,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    cfg = config_from_args(parser, args)
    if not cfg.problem_path.is_file():
        print(f"error: no such problem file: {cfg.problem_path}", file=sys.stderr)
        return EXIT_PARSE
    try:
        cfg.options()
    except ValueError as err:
        parser.error(str(err))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    try:
        status = RUNNERS[cfg.subcommand](cfg)
    except (ProblemFileError, expr.ParseError, PolynomializeError) as err:
        print(f"error: {cfg.problem_path}: {err}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as err:
        # e.g. a left-value problem handed to solve-multi
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    for path in cfg.written:
        log.info("wrote %s", path)
    return status


if __name__ == "__main__":
    sys.exit(main())

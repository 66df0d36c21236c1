"""Command line front end: ``truncrd solve | sweep | verify --config FILE``.

Exit codes: 0 success, 1 config or usage error, 2 infeasible, 3 numerical
violation (a check failed or a truncated value exceeded the limit).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .constraints import EPS_D, EPS_MARKOV_ACCEPT, DistortionBall, check_ball, check_membership
from .errors import ConfigError, InfeasibleError, NumericalViolationError
from .objective import evaluate
from .pmf import JointPmf
from .scenarios import ScenarioConfig, build_problem
from .solvers import oracle_grid, solve, solve_psi_limit
from .solvers.problem import SLACK
from .truncation import ConvergenceReport, converge_sweep

__all__ = ["RunManifest", "main", "sweep_csv", "write_argmin_sidecar", "reverify_sidecar", "run_checks"]

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_VIOLATION = 0, 1, 2, 3

SWEEP_COLUMNS = ("n", "M_n", "D", "psi_n", "psi_inf", "gap", "status", "residual", "seed")


@dataclass(frozen=True)
class RunManifest:
    config_path: Path
    config: ScenarioConfig
    out_dir: Path
    seed: int
    version: str = __version__

    def header(self, what: str) -> str:
        return (f"# truncrd {self.version} {what}; config={self.config_path.name}; kind={self.config.kind}; "
                f"seed={self.seed}; psi_n, psi_inf, gap in bits; M_n and D in distortion units")


def _fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    s = f"{float(x):.10f}"
    return "0.0000000000" if s == "-0.0000000000" else s


def _resolve(args) -> RunManifest:
    cfg = load_config(args.config)
    solver = cfg.solver
    if args.seed is not None:
        solver = dataclasses.replace(solver, seed=args.seed)
    if args.restarts is not None:
        solver = dataclasses.replace(solver, restarts=args.restarts)
    changes = {"solver": solver}
    if getattr(args, "tol", None) is not None:
        changes["tol"] = args.tol
    cfg = dataclasses.replace(cfg, **changes)
    out = Path(args.out).parent if getattr(args, "out", None) else Path.cwd()
    if not out.is_dir():
        raise ConfigError(f"output directory does not exist: {out}")
    return RunManifest(Path(args.config), cfg, out, solver.seed)


# --- sweep ------------------------------------------------------------------


def run_sweeps(man: RunManifest) -> list[ConvergenceReport]:
    problem, balls, schedule = build_problem(man.config)
    return [converge_sweep(problem, schedule, b.D, tol=man.config.tol, opts=man.config.solver) for b in balls]


def sweep_csv(man: RunManifest, reports: list[ConvergenceReport]) -> str:
    """CSV text, rows sorted by (D, n) with the limit row (n = inf) last in each block."""
    buf = io.StringIO()
    buf.write(man.header("sweep") + "\n")
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for rep in sorted(reports, key=lambda r: r.D):
        for e, gap in zip(rep.entries, rep.gaps):
            row = (str(e.n), _fmt(e.cap), _fmt(rep.D), _fmt(e.value), _fmt(rep.psi_inf), _fmt(gap),
                   str(e.status), f"{e.result.diagnostics['max_residual']:.3e}", str(man.seed))
            buf.write(",".join(row) + "\n")
        lim = rep.limit
        row = ("inf", "inf", _fmt(rep.D), _fmt(lim.value), _fmt(lim.value), _fmt(0.0), str(lim.status),
               f"{lim.diagnostics['max_residual']:.3e}", str(man.seed))
        buf.write(",".join(row) + "\n")
    body = buf.getvalue()
    return body + f"# sha256={hashlib.sha256(body.encode()).hexdigest()}\n"


def write_argmin_sidecar(path, reports: list[ConvergenceReport]):
    """Dump every argmin with its value so the CSV can be re-verified later."""
    recs = []
    for rep in sorted(reports, key=lambda r: r.D):
        items = [(e.n, e.cap, e.result) for e in rep.entries] + [(None, None, rep.limit)]
        for n, cap, res in items:
            recs.append({
                "D": rep.D, "n": n, "cap": cap, "value": res.value, "status": str(res.status),
                "factors": list(res.argmin.layout.factors), "shape": list(res.argmin.layout.shape),
                "mass": res.argmin.mass.tolist(),
            })
    Path(path).write_text(json.dumps(recs, indent=1) + "\n")


def reverify_sidecar(cfg: ScenarioConfig, path) -> list[str]:
    """Reload an argmin dump and recheck membership, ball and value; returns failure messages."""
    problem, _, schedule = build_problem(cfg)
    fails = []
    for r in json.loads(Path(path).read_text()):
        p = JointPmf(problem.layout, np.asarray(r["mass"]))
        d = schedule.d_inf if r["n"] is None else schedule.truncated(r["n"])
        mv = check_membership(p, problem.constraints, eps_markov=EPS_MARKOV_ACCEPT)
        bv = check_ball(p, DistortionBall(d, r["D"]), tol=EPS_D)
        val = evaluate(problem.objective, p)
        tag = f"D={r['D']} n={r['n'] if r['n'] is not None else 'inf'}"
        if not mv.feasible:
            fails.append(f"{tag}: constraint residual {mv.max_residual:.3e}")
        if not bv.feasible:
            fails.append(f"{tag}: outside the distortion ball")
        if abs(val - r["value"]) > 1e-9:
            fails.append(f"{tag}: value {val!r} differs from recorded {r['value']!r}")
    return fails


# --- verify -----------------------------------------------------------------


def _nestedness(problem, schedule, D_grid, rng, trials=1000) -> tuple[bool, str]:
    bad = 0
    lay = problem.layout
    n = len(schedule)
    for _ in range(trials):
        p = JointPmf(lay, rng.dirichlet(np.full(lay.k, 0.3)))
        j = int(rng.integers(1, n)) if n > 1 else 1
        hi = schedule.truncated(min(j + 1, n))
        lo = schedule.truncated(j)
        base = float(p.mass @ hi.finite)
        D = float(rng.choice(D_grid)) if rng.random() < 0.5 else base * rng.uniform(0.5, 1.5)
        if check_ball(p, DistortionBall(hi, D)).feasible and not check_ball(p, DistortionBall(lo, D)).feasible:
            bad += 1
    return bad == 0, f"{trials} random (p, n, D) triples, {bad} counterexamples"


def run_checks(cfg: ScenarioConfig, out=None) -> list[tuple[str, bool, str]]:
    """Nestedness, monotonicity, mass-vanishing and oracle-bracket checks; one line each."""
    out = out or sys.stdout
    problem, balls, schedule = build_problem(cfg)
    rng = np.random.default_rng(cfg.solver.seed)
    results = []

    def record(name, ok, msg):
        results.append((name, ok, msg))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {msg}", file=out)

    record("nestedness", *_nestedness(problem, schedule, cfg.D_grid, rng))

    reports, err = [], None
    try:
        reports = [converge_sweep(problem, schedule, b.D, opts=cfg.solver) for b in balls]
    except (NumericalViolationError, InfeasibleError) as exc:
        err = str(exc)
    if err:
        record("monotonicity", False, err)
    else:
        viol = [v for r in reports for v in r.violations]
        record("monotonicity", not viol, viol[0] if viol else
               f"{sum(len(r.entries) for r in reports)} truncated values nondecreasing and <= limit + {SLACK:g}")

    inf = schedule.d_inf.infinite
    worst = None
    ok = not err
    for r in reports:
        for e in r.entries:
            mass = float(e.result.argmin.mass[inf].sum())
            bound = r.D / e.cap + 1e-9
            if mass > bound:
                ok = False
            margin = bound - mass
            if worst is None or margin < worst[0]:
                worst = (margin, e.n, r.D, mass, bound)
    if worst is None:
        record("mass-vanishing", ok, "no sweep entries" if not err else "sweep failed")
    else:
        _, n, D, mass, bound = worst
        record("mass-vanishing", ok, f"tightest at n={n}, D={D:g}: mass {mass:.3e} <= {bound:.3e}")

    ok, notes = True, []
    for r in reports:
        try:
            br = oracle_grid(problem, DistortionBall(schedule.d_inf, r.D), cfg.oracle_resolution)
        except ValueError as exc:
            notes.append(f"D={r.D:g} skipped ({exc})")
            continue
        inside = br.contains(r.psi_inf, tol=SLACK)
        ok &= inside
        notes.append(f"D={r.D:g}: {r.psi_inf:.6f} in [{br.lower:.6f}, {br.upper:.6f}]" + ("" if inside else " NO"))
    record("oracle-bracket", ok and not err, "; ".join(notes) or "sweep failed")
    return results


# --- entry points -----------------------------------------------------------


def cmd_solve(args) -> int:
    man = _resolve(args)
    cfg = man.config
    problem, balls, schedule = build_problem(cfg)
    D = cfg.D_grid[0] if args.D is None else args.D
    t0 = time.perf_counter()
    if args.n is not None and not args.limit:
        if not 1 <= args.n <= len(schedule):
            raise ConfigError(f"--n must lie in 1..{len(schedule)}")
        n, cap = str(args.n), _fmt(schedule.caps[args.n - 1])
        res = solve(problem, DistortionBall(schedule.truncated(args.n), D), cfg.solver)
    else:
        n, cap = "inf", "inf"
        res = solve_psi_limit(problem, schedule.d_inf, D, cfg.solver)
    wall = time.perf_counter() - t0
    if not res.feasible:
        print(f"infeasible: {res.diagnostics.get('reason', 'no feasible point found')}", file=sys.stderr)
        return EXIT_INFEASIBLE
    restarts = res.diagnostics.get("restarts", 1)
    print(man.header("solve"))
    print("kind,n,M_n,D,psi,status,max_residual,restarts,wall_time_s")
    print(",".join((cfg.kind, n, cap, _fmt(D), _fmt(res.value), str(res.status),
                    f"{res.diagnostics['max_residual']:.3e}", str(restarts), f"{wall:.3f}")))
    return EXIT_OK


def cmd_sweep(args) -> int:
    man = _resolve(args)
    reports = run_sweeps(man)
    text = sweep_csv(man, reports)
    if args.out:
        Path(args.out).write_text(text)
        write_argmin_sidecar(Path(args.out).with_suffix(".argmin.json"), reports)
    else:
        sys.stdout.write(text)
    for r in reports:
        print(r.summary(), file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    man = _resolve(args)
    results = run_checks(man.config)
    failed = [name for name, ok, _ in results if not ok]
    if failed:
        print(f"first failing check: {failed[0]}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="truncrd", description="Truncated-distortion rate computations.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="scenario INI file")
    common.add_argument("--seed", type=int, help="override [solver] seed")
    common.add_argument("--restarts", type=int, help="override [solver] restarts")
    common.add_argument("--tol", type=float, help="stop a sweep once the gap is <= tol")

    s = sub.add_parser("solve", parents=[common], help="one value, truncated (--n) or limit (--limit)")
    s.add_argument("--D", type=float, help="distortion level (default: first of the D grid)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--n", type=int, help="1-based truncation index")
    g.add_argument("--limit", action="store_true", help="solve the limit problem (default)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", parents=[common], help="truncation sweep as CSV")
    s.add_argument("--out", help="CSV path (an .argmin.json sidecar is written next to it)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("verify", parents=[common], help="run the invariant checks")
    s.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalViolationError as exc:
        print(f"numerical violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

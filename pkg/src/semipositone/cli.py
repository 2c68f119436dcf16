"""Command-line front end: ``semipositone {validate,shoot,solve,sweep,verify}``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bvp import (DEFAULT_C, DEFAULT_N_SCAN, RESIDUAL_TOL, SolutionRecord, SweepReport, find_solutions,
                  sweep_lambda, verify_lemma_u0, verify_theorem_bounds)
from .energy import check_energy_laws, energy
from .models import ModelError, ProblemInstance, validate
from .reports import (ProblemFileError, branch_csv, dumps, load_problem, load_records, parse_formats,
                      records_to_dict, sweep_to_dict)
from .roots import RootFindingError
from .shooting import DEFAULT_GRID, GridConfig, IntegrationError, integrate_ivp
from .svg import bifurcation_figure, energy_figure, profile_figure

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("semipositone")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_lambda(text: str) -> list[float]:
    """``v``, ``v1:v2:n`` (linear), ``log:v1:v2:n`` (geometric) or ``v1,v2,...``."""
    try:
        if text.startswith("log:"):
            lo, hi, n = text[4:].split(":")
            # 15 digits so that e.g. log:0.25:16384:17 hits the powers of two exactly
            vals = np.array([float(f"{v:.15g}") for v in np.geomspace(float(lo), float(hi), int(n))])
        elif ":" in text:
            lo, hi, n = text.split(":")
            vals = np.linspace(float(lo), float(hi), int(n))
        else:
            vals = np.array([float(s) for s in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"cannot parse --lambda {text!r}: expected v, v1:v2:n, log:v1:v2:n or a comma list") from exc
    if vals.size == 0 or not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise UsageError(f"--lambda {text!r}: values must be finite and positive")
    return [float(v) for v in vals]


def parse_a_range(text: str) -> tuple[float, float, int | None]:
    """``lo:hi`` or ``lo:hi:n``."""
    parts = text.split(":")
    try:
        if len(parts) == 2:
            lo, hi, n = float(parts[0]), float(parts[1]), None
        elif len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        else:
            raise ValueError
    except ValueError as exc:
        raise UsageError(f"cannot parse --a-range {text!r}: expected lo:hi or lo:hi:n") from exc
    if not 0 < lo < hi:
        raise UsageError(f"--a-range needs 0 < lo < hi, got {lo} and {hi}")
    if n is not None and n < 8:
        raise UsageError(f"--a-range scan size must be at least 8, got {n}")
    return lo, hi, n


def _instance(args) -> ProblemInstance:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        inst = load_problem(args.problem)
    for w in caught:
        log.warning("%s", w.message)
    return inst


def _single_lambda(args, inst: ProblemInstance) -> ProblemInstance:
    if args.lam is None:
        return inst
    lams = parse_lambda(args.lam)
    if len(lams) != 1:
        raise UsageError(f"{args.command} takes a single --lambda value")
    return inst.with_lambda(lams[0])


def _grid(args) -> GridConfig:
    if args.steps is None:
        return DEFAULT_GRID
    try:
        return GridConfig(n_steps=args.steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _c(args) -> float:
    if not args.c > 2:
        raise UsageError(f"--c must exceed 2, got {args.c}")
    return args.c


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _formats(args, default: str) -> tuple[str, ...]:
    try:
        return parse_formats(args.format or default)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(path)


def cmd_validate(args) -> int:
    inst = _instance(args)
    rep = validate(inst)
    for chk in rep.checks:
        mark = "ok" if chk.passed else ("WARN" if chk.severity == "warning" else "FAIL")
        print(f"{mark:4s} {chk.name}: {chk.detail}")
    return EXIT_OK if rep.ok else EXIT_VERIFY


def cmd_shoot(args) -> int:
    inst = _single_lambda(args, _instance(args))
    if args.a is None:
        raise UsageError("shoot needs --a")
    if not args.a > 0:
        raise UsageError(f"--a must be positive, got {args.a}")
    formats = _formats(args, "csv")
    traj = integrate_ivp(inst, args.a, _grid(args), continue_past_zero=args.continue_past_zero)
    trace = energy(inst, traj)
    out = _out(args)
    if "csv" in formats:
        _write(out / "trajectory.csv", traj.to_csv(trace.E))
    if "json" in formats:
        _write(out / "trajectory.json", dumps(traj.to_dict(trace.E)))
    if "svg" in formats:
        label = f"a = {args.a:.6g}"
        _write(out / "profile.svg", profile_figure([traj], [label], f"u(r), lambda = {inst.lam:.6g}"))
        _write(out / "energy.svg", energy_figure([(traj.r, trace.E)], [label], f"E(r), lambda = {inst.lam:.6g}"))
    u_end = traj.u[-1]
    where = "r = 1" if traj.reached_boundary else f"r = {traj.r[-1]:.17g} (zero crossing)"
    print(f"u at {where}: {u_end:.17g}", file=sys.stderr)
    return EXIT_OK


def _scan_args(args, inst):
    if args.a_range is None:
        return None, None, args.n_scan
    lo, hi, n = parse_a_range(args.a_range)
    return lo, hi, n if n is not None else args.n_scan


def _record_rows(records: list[SolutionRecord]) -> str:
    return branch_csv(SweepReport([], [records]))


def cmd_solve(args) -> int:
    inst = _single_lambda(args, _instance(args))
    a_min, a_max, n_scan = _scan_args(args, inst)
    formats = _formats(args, "json")
    c = _c(args)
    recs = find_solutions(inst, a_min, a_max, n_scan, _grid(args), spacing=args.spacing, c=c)
    out = _out(args)
    scan = {"a_min": a_min, "a_max": a_max, "n_scan": n_scan, "n_steps": _grid(args).n_steps,
            "spacing": args.spacing, "c": c}
    if "json" in formats:
        _write(out / "solutions.json", dumps(records_to_dict(inst, recs, {"scan": scan})))
    if "csv" in formats:
        _write(out / "solutions.csv", _record_rows(recs))
    if "svg" in formats:
        labels = [f"a = {r.a:.6g}" for r in recs]
        _write(out / "solutions.svg", profile_figure([r.traj for r in recs], labels,
                                                      f"solutions, lambda = {inst.lam:.6g}"))
    n_pos = sum(r.positive for r in recs)
    print(f"lambda = {inst.lam:.17g}: {len(recs)} record(s), {n_pos} positive", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    inst = _instance(args)
    if args.lam is None:
        raise UsageError("sweep needs --lambda")
    lams = parse_lambda(args.lam)
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise UsageError("--lambda values must be strictly increasing")
    a_min, a_max, n_scan = _scan_args(args, inst)
    formats = _formats(args, "json,csv,svg")
    rep = sweep_lambda(inst, lams, a_min, a_max, n_scan, _grid(args), spacing=args.spacing, c=_c(args))
    out = _out(args)
    if "json" in formats:
        _write(out / "sweep.json", dumps(sweep_to_dict(inst, rep)))
    if "csv" in formats:
        _write(out / "branch.csv", branch_csv(rep))
    if "svg" in formats:
        _write(out / "bifurcation.svg", bifurcation_figure(rep))
    est = rep.lambda0_estimate
    print(f"lambda0 estimate: {'none' if est is None else format(est, '.17g')}"
          f" (bracket {rep.lambda0_bracket})", file=sys.stderr)
    return EXIT_OK


def _resolve_inputs(paths: list[str]) -> list[Path]:
    found: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            hits = [p / n for n in ("solutions.json", "sweep.json") if (p / n).exists()]
            if not hits:
                raise ProblemFileError(f"{p}: no solutions.json or sweep.json inside")
            found.extend(hits)
        elif p.exists():
            found.append(p)
        else:
            raise ProblemFileError(f"{p}: no such file")
    return found


def verify_record(rec: SolutionRecord, c: float) -> tuple[list[str], list[str]]:
    """Recompute the checks of one stored record; returns ``(hard, soft)`` failures."""
    inst = rec.instance
    traj = rec.traj
    hard: list[str] = []
    soft: list[str] = []
    tag = f"lambda={rec.lam:.17g} a={rec.a:.17g}"
    if traj.u.size == 0 or traj.u[0] != rec.a:
        hard.append(f"{tag}: stored a does not match the trajectory start u(0)={traj.u[0] if traj.u.size else 'n/a'}")
    trace = energy(inst, traj)
    rep = check_energy_laws(inst, trace, traj)
    if not rep.monotone:
        hard.append(f"{tag}: energy increases by {rep.max_violation:.3g} > {rep.tol:.3g}")
    if rec.positive:
        positive = bool(traj.reached_boundary and np.all(traj.u[:-1] > 0)
                        and abs(traj.u[-1]) <= RESIDUAL_TOL * (1.0 + abs(traj.u[0])))
        if not positive:
            hard.append(f"{tag}: labeled positive but the profile is not a positive solution")
        ok, margin = verify_lemma_u0(rec, inst)
        if not ok:
            hard.append(f"{tag}: u(0) below U0 by {-margin:.3g} (solver inconsistency)")
        if rep.nonneg is False:
            hard.append(f"{tag}: min E = {trace.E_min:.6g} < 0")
        if rep.e1_nonneg is False:
            hard.append(f"{tag}: E(1) = {trace.E[-1]:.6g} < 0")
        diag = verify_theorem_bounds(rec, c, inst, trace)
        if not diag.monotone_decreasing:
            soft.append(f"{tag}: u' is not negative on (0,1)")
        if diag.slope_bound_ok is False:
            soft.append(f"{tag}: |u'(r3)| = {abs(diag.du_r3):.6g} exceeds 6 U0")
        if diag.energy_bound_ok is False:
            soft.append(f"{tag}: E(r3) = {diag.E_r3:.6g} exceeds the bound {diag.energy_upper:.6g}")
        if rec.diagnostics is not None and rec.diagnostics.c == c:
            stored = json.loads(dumps(rec.diagnostics.to_dict()))
            fresh = json.loads(dumps(diag.to_dict()))
            if stored != fresh:
                hard.append(f"{tag}: stored diagnostics differ from the recomputed ones")
    if rec.energy_report is not None:
        if json.loads(dumps(rec.energy_report.to_dict())) != json.loads(dumps(rep.to_dict())):
            hard.append(f"{tag}: stored energy report differs from the recomputed one")
    return hard, soft


def cmd_verify(args) -> int:
    c = _c(args)
    hard_all: list[str] = []
    soft_all: list[str] = []
    n = 0
    for path in _resolve_inputs(args.inputs):
        _, recs = load_records(path)
        for rec in recs:
            n += 1
            hard, soft = verify_record(rec, c)
            hard_all += [f"{path}: {m}" for m in hard]
            soft_all += [f"{path}: {m}" for m in soft]
    for m in soft_all:
        log.warning("%s", m)
    for m in hard_all:
        print(f"FAIL {m}", file=sys.stderr)
    if n == 0:
        log.warning("no records to verify; passing vacuously")
    summary = {"records": n, "hard_failures": hard_all, "warnings": soft_all, "passed": not hard_all}
    if args.out:
        _write(_out(args) / "verify.json", dumps(summary))
    print(f"verified {n} record(s): {len(hard_all)} failure(s), {len(soft_all)} warning(s)", file=sys.stderr)
    return EXIT_VERIFY if hard_all else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="semipositone", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, lam=True, scan=False):
        p.add_argument("--problem", required=True, help="problem JSON file")
        if lam:
            p.add_argument("--lambda", dest="lam", help="v | v1:v2:n | log:v1:v2:n | v1,v2,...")
        p.add_argument("--steps", type=int, help=f"grid steps on [0,1] (default {DEFAULT_GRID.n_steps})")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--format", help="comma list from csv,json,svg")
        if scan:
            p.add_argument("--a-range", help="lo:hi[:n] scan range for u(0)")
            p.add_argument("--n-scan", type=int, default=DEFAULT_N_SCAN, help="scan points when --a-range omits n")
            p.add_argument("--spacing", choices=("log", "linear"), default="log")
            p.add_argument("--c", type=float, default=DEFAULT_C, help="level divisor for r2 (c > 2)")

    p = sub.add_parser("validate", help="check the model hypotheses of a problem file")
    p.add_argument("--problem", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("shoot", help="integrate one initial value problem")
    common(p)
    p.add_argument("--a", type=float, help="initial value u(0)")
    p.add_argument("--continue-past-zero", action="store_true", help="integrate through u = 0")
    p.set_defaults(func=cmd_shoot)

    p = sub.add_parser("solve", help="find positive solutions at one lambda")
    common(p, scan=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve over a lambda grid and estimate the threshold")
    common(p, scan=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="recheck stored solve/sweep output")
    p.add_argument("inputs", nargs="+", help="solutions.json / sweep.json files or their directories")
    p.add_argument("--c", type=float, default=DEFAULT_C)
    p.add_argument("--out", help="write verify.json here")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, ProblemFileError) as exc:
        print(f"semipositone: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"semipositone: invalid model: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"semipositone: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, RootFindingError, FloatingPointError) as exc:
        radius = getattr(exc, "radius", None)
        where = f" at r = {radius:.17g}" if radius is not None and math.isfinite(radius) else ""
        print(f"semipositone: numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

"""Positive radial solutions by shooting on ``a = u(0)``, over a lambda grid.

For each lambda the boundary residual of :func:`shooting.shoot` is scanned
on an ``a``-grid; every sign change is refined to a root and the root is
accepted only if the profile actually reaches ``r = 1`` with
``|u(1)| <= 1e-9 (1 + a)``. Sign changes of the residual that come from a
tangential touch of zero (the residual jumps there) collapse to a point
without meeting that test and are dropped.

Accepted records carry the proof-quantity diagnostics: the lower bound
``u(0) >= U0``, the level crossings ``r1`` (at ``(u0+U0)/2``) and ``r2`` (at
``u0/c``), a mean-value radius ``r3`` between them, and the energy upper
bound ``lam M + c1 (6 U0)^p``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyReport, EnergyTrace, check_energy_laws, energy
from .models import ProblemInstance
from .shooting import DEFAULT_GRID, GridConfig, Trajectory, integrate_many, shoot_many

log = logging.getLogger(__name__)

DEFAULT_C = 4.0
DEFAULT_N_SCAN = 256
RESIDUAL_TOL = 1e-9
LEMMA_U0_RTOL = 1e-6
A_MAX_FACTOR = 1e4
REFINE_XTOL = 1e-13
REFINE_POINTS = 15


@dataclass
class LemmaReport:
    u0_bound_ok: bool
    u0_margin: float
    c: float
    r1: float | None = None
    r1_in_half: bool = False
    r2: float | None = None
    r2_in_quarter: bool = False
    slope: float | None = None
    r3: float | None = None
    du_r3: float | None = None
    slope_bound_ok: bool | None = None
    M: float = math.nan
    energy_upper: float = math.nan
    E_r3: float | None = None
    energy_bound_ok: bool | None = None
    monotone_decreasing: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "LemmaReport":
        return cls(**d)


@dataclass
class SolutionRecord:
    lam: float
    a: float
    residual: float
    positive: bool
    traj: Trajectory
    diagnostics: LemmaReport | None = None
    energy_report: EnergyReport | None = None
    E_min: float = math.nan
    instance: ProblemInstance | None = field(default=None, repr=False, compare=False)

    def to_dict(self, include_trajectory: bool = True) -> dict:
        d = {
            "lambda": self.lam,
            "a": self.a,
            "residual": self.residual,
            "positive": self.positive,
            "E_min": self.E_min,
            "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None,
            "energy": self.energy_report.to_dict() if self.energy_report else None,
        }
        if include_trajectory:
            d["trajectory"] = self.traj.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, instance: ProblemInstance | None = None) -> "SolutionRecord":
        diag = LemmaReport.from_dict(d["diagnostics"]) if d.get("diagnostics") else None
        en = EnergyReport(**d["energy"]) if d.get("energy") else None
        return cls(lam=float(d["lambda"]), a=float(d["a"]), residual=float(d["residual"]),
                   positive=bool(d["positive"]), traj=Trajectory.from_dict(d["trajectory"]),
                   diagnostics=diag, energy_report=en, E_min=float(d.get("E_min", math.nan)),
                   instance=instance)


@dataclass
class SweepReport:
    lambda_grid: list[float]
    records: list[list[SolutionRecord]]
    lambda0_estimate: float | None = None
    lambda0_bracket: tuple[float | None, float] | None = None
    lambda1_evidence: float | None = None
    lambda2_evidence: float | None = None
    scan: dict = field(default_factory=dict)

    def positive_records(self):
        for recs in self.records:
            for rec in recs:
                if rec.positive:
                    yield rec

    @property
    def branch(self) -> list[tuple[float, float]]:
        """``(lambda, u(0))`` for every positive record, in grid order."""
        return [(rec.lam, rec.a) for rec in self.positive_records()]


def find_crossing(traj: Trajectory, level: float) -> float | None:
    """Smallest radius where ``u`` meets ``level``, linearly interpolated on the grid."""
    d = traj.u - level
    if d[0] == 0:
        return float(traj.r[0])
    s = np.sign(d)
    hits = np.flatnonzero((s[1:] != s[:-1]) | (d[1:] == 0))
    if hits.size == 0:
        return None
    i = hits[0]
    if d[i + 1] == 0:
        return float(traj.r[i + 1])
    theta = d[i] / (d[i] - d[i + 1])
    return float(traj.r[i] + theta * (traj.r[i + 1] - traj.r[i]))


def verify_lemma_u0(record: SolutionRecord, instance: ProblemInstance | None = None) -> tuple[bool, float]:
    """``u(0) >= U0`` up to a relative ``1e-6``; returns ``(ok, u(0) - U0)``."""
    inst = instance or record.instance
    U0 = inst.reaction.U0
    margin = record.a - U0
    return bool(record.a >= U0 - LEMMA_U0_RTOL * U0), float(margin)


def max_F_on_band(instance: ProblemInstance, c: float, n: int = 2001) -> float:
    """``M = max F`` over ``[u0/c, (u0+U0)/2]`` by grid maximization."""
    rx = instance.reaction
    u = np.linspace(rx.u0 / c, 0.5 * (rx.u0 + rx.U0), n)
    return float(np.max(rx.big_f(u)))


def verify_theorem_bounds(
    record: SolutionRecord,
    c: float = DEFAULT_C,
    instance: ProblemInstance | None = None,
    trace: EnergyTrace | None = None,
) -> LemmaReport:
    """Recompute the proof quantities along one record.

    The slope bound is only gated in when ``r2 - r1 >= 1/4``; with both
    crossings found the energy at ``r3`` is compared against
    ``lam M + c1 (6 U0)^p`` under the same gate.
    """
    if not c > 2:
        raise ValueError(f"c must exceed 2, got {c}")
    inst = instance or record.instance
    rx, phi = inst.reaction, inst.phi
    u0, U0 = rx.u0, rx.U0
    traj = record.traj
    ok, margin = verify_lemma_u0(record, inst)
    rep = LemmaReport(u0_bound_ok=ok, u0_margin=margin, c=float(c))
    rep.M = max_F_on_band(inst, c)
    rep.energy_upper = float(inst.lam * rep.M + phi.c_hat_1 * (6.0 * U0) ** phi.p)
    interior = traj.du[1:-1] if traj.reached_boundary else traj.du[1:]
    rep.monotone_decreasing = bool(interior.size > 0 and np.all(interior < 0))

    rep.r1 = find_crossing(traj, 0.5 * (u0 + U0))
    rep.r2 = find_crossing(traj, u0 / c)
    rep.r1_in_half = rep.r1 is not None and 0 < rep.r1 <= 0.5
    rep.r2_in_quarter = rep.r2 is not None and 0.75 <= rep.r2 < 1.0
    if rep.r1 is None or rep.r2 is None or not rep.r2 > rep.r1:
        return rep
    rep.slope = float((u0 / c - 0.5 * (u0 + U0)) / (rep.r2 - rep.r1))
    inside = np.flatnonzero((traj.r > rep.r1) & (traj.r < rep.r2))
    if inside.size == 0:
        return rep
    j = inside[np.argmin(np.abs(traj.du[inside] - rep.slope))]
    rep.r3 = float(traj.r[j])
    rep.du_r3 = float(traj.du[j])
    if trace is None:
        trace = energy(inst, traj)
    rep.E_r3 = float(trace.E[j])
    if rep.r2 - rep.r1 >= 0.25:
        rep.slope_bound_ok = bool(abs(rep.du_r3) <= 6.0 * U0)
        tol = 1e-8 * (1.0 + abs(rep.energy_upper))
        rep.energy_bound_ok = bool(rep.E_r3 <= rep.energy_upper + tol)
    return rep


def default_a_range(instance: ProblemInstance) -> tuple[float, float]:
    rx = instance.reaction
    return rx.u0 * (1.0 + 1e-6), A_MAX_FACTOR * rx.U0


def a_grid(a_min: float, a_max: float, n_scan: int, spacing: str = "log") -> np.ndarray:
    if not 0 < a_min < a_max:
        raise ValueError(f"need 0 < a_min < a_max, got {a_min}, {a_max}")
    if n_scan < 8:
        raise ValueError(f"n_scan must be at least 8, got {n_scan}")
    if spacing == "log":
        return np.geomspace(a_min, a_max, n_scan)
    if spacing == "linear":
        return np.linspace(a_min, a_max, n_scan)
    raise ValueError(f"unknown spacing {spacing!r}")


def build_record(instance: ProblemInstance, traj: Trajectory, c: float = DEFAULT_C) -> SolutionRecord:
    """Wrap an integrated profile with its energy report and diagnostics."""
    a = traj.a
    u1 = float(traj.u[-1]) if traj.reached_boundary else math.nan
    positive = bool(traj.reached_boundary and np.all(traj.u[:-1] > 0)
                    and abs(u1) <= RESIDUAL_TOL * (1.0 + abs(a)))
    rec = SolutionRecord(lam=instance.lam, a=a, residual=abs(u1), positive=positive, traj=traj,
                         instance=instance)
    trace = energy(instance, traj)
    rec.E_min = trace.E_min
    rec.energy_report = check_energy_laws(instance, trace, traj)
    rec.diagnostics = verify_theorem_bounds(rec, c, instance, trace)
    return rec


def _refine_brackets(residual, lam, lo, hi, glo, ghi, n_inner: int = REFINE_POINTS, max_rounds: int = 60):
    """Shrink sign-change brackets by batched multisection; return the positive-side ends.

    Each round evaluates ``n_inner`` equispaced points plus the false-position
    point and two close neighbours of it in every open bracket, so smooth
    roots converge superlinearly and jumps still shrink geometrically. A
    bracket closes once its positive end meets the boundary tolerance or its
    width reaches ``REFINE_XTOL`` relative.
    """
    lo, hi, glo, ghi = (np.array(x, float) for x in (lo, hi, glo, ghi))
    # orient every bracket so that the "pos" end carries the positive residual
    pos = np.where(glo > 0, lo, hi)
    neg = np.where(glo > 0, hi, lo)
    gpos = np.where(glo > 0, glo, ghi)
    gneg = np.where(glo > 0, ghi, glo)
    frac = np.linspace(0.0, 1.0, n_inner + 2)[1:-1]
    for _ in range(max_rounds):
        width = np.abs(pos - neg)
        open_ = (gpos > RESIDUAL_TOL) & (width > REFINE_XTOL * np.maximum(1.0, pos))
        idx = np.flatnonzero(open_)
        if idx.size == 0:
            break
        p_, n_, gp, gn = pos[idx], neg[idx], gpos[idx], gneg[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = p_ - gp * (n_ - p_) / (gn - gp)
        xs = np.where(np.isfinite(xs), xs, 0.5 * (p_ + n_))
        d = 1e-3 * (n_ - p_)
        pts = np.concatenate([p_[:, None] + frac[None, :] * (n_ - p_)[:, None],
                              xs[:, None], (xs - d)[:, None], (xs + d)[:, None]], axis=1)
        lo_b, hi_b = np.minimum(p_, n_)[:, None], np.maximum(p_, n_)[:, None]
        pts = np.clip(pts, lo_b, hi_b)
        # order every row from the positive end towards the negative end
        key = np.abs(pts - p_[:, None])
        pts = np.take_along_axis(pts, np.argsort(key, axis=1), axis=1)
        vals = residual(np.repeat(lam[idx], pts.shape[1]), pts.ravel()).reshape(pts.shape)
        vals = np.where(np.isfinite(vals), vals, -1.0)
        for row, b in enumerate(idx):
            xrow, vrow = pts[row], vals[row]
            j = np.flatnonzero(vrow <= 0)
            if j.size == 0:
                pos[b], gpos[b] = xrow[-1], vrow[-1]
                continue
            j = j[0]
            neg[b], gneg[b] = xrow[j], vrow[j]
            if j > 0:
                pos[b], gpos[b] = xrow[j - 1], vrow[j - 1]
    return pos


def _solve_lambdas(
    template: ProblemInstance,
    lams: list[float],
    a_min: float | None,
    a_max: float | None,
    n_scan: int,
    grid: GridConfig,
    spacing: str,
    c: float,
    continue_past_zero: bool,
) -> list[list[SolutionRecord]]:
    phi, rx, N = template.phi, template.reaction, template.N
    lo_default, hi_default = default_a_range(template)
    a_min = lo_default if a_min is None else a_min
    a_max = hi_default if a_max is None else a_max
    A = a_grid(a_min, a_max, n_scan, spacing)
    lams = [float(x) for x in lams]
    if not lams:
        return []
    L = np.repeat(lams, A.size)
    AA = np.tile(A, len(lams))
    kw = {"continue_past_zero": continue_past_zero}
    res = shoot_many(phi, rx, N, L, AA, grid, **kw).terminal.reshape(len(lams), A.size)

    br_lam, br_lo, br_hi, br_glo, br_ghi, br_k = [], [], [], [], [], []
    exact: list[tuple[int, float]] = []
    for k in range(len(lams)):
        row = res[k]
        for j in range(A.size):
            if row[j] == 0:
                exact.append((k, A[j]))
        ok = np.isfinite(row[:-1]) & np.isfinite(row[1:])
        flips = np.flatnonzero(ok & (np.sign(row[:-1]) * np.sign(row[1:]) < 0))
        for j in flips:
            br_k.append(k)
            br_lam.append(lams[k])
            br_lo.append(A[j])
            br_hi.append(A[j + 1])
            br_glo.append(row[j])
            br_ghi.append(row[j + 1])
    log.info("scan: %d lambda values x %d shots, %d brackets", len(lams), A.size, len(br_k))

    cand_k: list[int] = [k for k, _ in exact]
    cand_a: list[float] = [a for _, a in exact]
    if br_k:
        pos_end = _refine_brackets(
            lambda lam_, x_: shoot_many(phi, rx, N, lam_, x_, grid, **kw).terminal,
            np.array(br_lam), np.array(br_lo), np.array(br_hi), np.array(br_glo), np.array(br_ghi),
        )
        cand_k.extend(br_k)
        cand_a.extend(pos_end.tolist())

    out: list[list[SolutionRecord]] = [[] for _ in lams]
    if not cand_k:
        return out
    trajs = integrate_many(phi, rx, N, np.array([lams[k] for k in cand_k]), np.array(cand_a), grid, **kw)
    for k, traj in zip(cand_k, trajs):
        if not traj.reached_boundary:
            continue
        if abs(traj.u[-1]) > RESIDUAL_TOL * (1.0 + traj.a):
            log.debug("lambda=%g: discarding bracket at a=%.17g (|u(1)|=%.3g)", lams[k], traj.a, abs(traj.u[-1]))
            continue
        out[k].append(build_record(template.with_lambda(lams[k]), traj, c))
    for recs in out:
        recs.sort(key=lambda rec: rec.a)
    return out


def find_solutions(
    instance: ProblemInstance,
    a_min: float | None = None,
    a_max: float | None = None,
    n_scan: int = DEFAULT_N_SCAN,
    grid: GridConfig = DEFAULT_GRID,
    *,
    spacing: str = "log",
    c: float = DEFAULT_C,
    continue_past_zero: bool = False,
) -> list[SolutionRecord]:
    """All shooting roots in ``[a_min, a_max]`` resolved by an ``n_scan`` grid.

    Defaults to ``a`` in ``[u0 (1 + 1e-6), 1e4 U0]`` on a log grid. Returns an
    empty list when the residual never changes sign.
    """
    return _solve_lambdas(instance, [instance.lam], a_min, a_max, n_scan, grid, spacing, c,
                          continue_past_zero)[0]


def estimate_lambda0(report: SweepReport) -> float | None:
    """Smallest grid lambda from which on no positive solution was found."""
    grid = report.lambda_grid
    if not grid:
        return None
    has = [any(r.positive for r in recs) for recs in report.records]
    if has[-1]:
        return None
    j = len(has) - 1
    while j > 0 and not has[j - 1]:
        j -= 1
    return float(grid[j])


def sweep_lambda(
    template: ProblemInstance,
    lambda_grid,
    a_min: float | None = None,
    a_max: float | None = None,
    n_scan: int = DEFAULT_N_SCAN,
    grid: GridConfig = DEFAULT_GRID,
    *,
    spacing: str = "log",
    c: float = DEFAULT_C,
) -> SweepReport:
    """Solve on every grid lambda and summarize the branch.

    Raises:
        ValueError: if ``lambda_grid`` is not strictly increasing and positive.
    """
    lams = [float(x) for x in lambda_grid]
    if any(x <= 0 for x in lams):
        raise ValueError("lambda values must be positive")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    records = _solve_lambdas(template, lams, a_min, a_max, n_scan, grid, spacing, c, False)
    scan = {"a_min": a_min, "a_max": a_max, "n_scan": n_scan, "n_steps": grid.n_steps,
            "spacing": spacing, "c": c}
    rep = SweepReport(lams, records, scan=scan)
    if not lams:
        return rep
    rep.lambda0_estimate = estimate_lambda0(rep)
    if rep.lambda0_estimate is not None:
        j = lams.index(rep.lambda0_estimate)
        rep.lambda0_bracket = (lams[j - 1] if j > 0 else None, rep.lambda0_estimate)
    for rec in rep.positive_records():
        d = rec.diagnostics
        if d.r1_in_half and rep.lambda1_evidence is None:
            rep.lambda1_evidence = rec.lam
        if d.r2_in_quarter and rep.lambda2_evidence is None:
            rep.lambda2_evidence = rec.lam
    return rep

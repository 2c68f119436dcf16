import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import LINEAR, PLAP2, SQUARE, make
from semipositone.bvp import (A_MAX_FACTOR, RESIDUAL_TOL, SolutionRecord, SweepReport, a_grid, build_record,
                              default_a_range, estimate_lambda0, find_crossing, find_solutions, max_F_on_band,
                              sweep_lambda, verify_lemma_u0, verify_theorem_bounds)
from semipositone.models import PhiModel
from semipositone.oracle import linear_instance
from semipositone.shooting import REACHED_BOUNDARY, Event, GridConfig, Trajectory, integrate_ivp


def synthetic(inst, u, du, r=None):
    r = np.linspace(0.0, 1.0, u.size) if r is None else r
    tr = Trajectory(r, u, du, np.zeros_like(r), [Event(REACHED_BOUNDARY, 1.0)], inst.lam, r.size - 1)
    return SolutionRecord(inst.lam, float(u[0]), abs(float(u[-1])), True, tr, instance=inst)


# --- find_solutions -----------------------------------------------------------

def test_small_lambda_has_positive_solution(superlinear):
    recs = find_solutions(superlinear, math.sqrt(3.0), 50.0, 512)
    pos = [r for r in recs if r.positive]
    assert pos
    for rec in pos:
        tr = rec.traj
        assert tr.reached_boundary and np.all(tr.u[:-1] > 0)
        assert abs(tr.u[-1]) <= RESIDUAL_TOL * (1 + tr.u[0])
        assert rec.residual <= RESIDUAL_TOL
        assert rec.diagnostics.u0_bound_ok and rec.diagnostics.monotone_decreasing


def test_default_range_agrees(superlinear):
    lo, hi = default_a_range(superlinear)
    assert lo == pytest.approx(1.0 + 1e-6) and hi == pytest.approx(A_MAX_FACTOR * math.sqrt(3.0))
    a_default = [r.a for r in find_solutions(superlinear)]
    a_narrow = [r.a for r in find_solutions(superlinear, math.sqrt(3.0), 50.0, 512)]
    assert len(a_default) == len(a_narrow) == 1
    assert a_default[0] == pytest.approx(a_narrow[0], rel=1e-9)


def test_large_lambda_empty():
    assert find_solutions(make(3, 1e6), math.sqrt(3.0), 1e4, 256) == []


def test_linear_shift_has_no_root_for_positive_a():
    # residual is 1 + (a - 1) sin(2)/2, vanishing only at a = 1 - 2/sin 2 < 0
    assert 1 - 2 / math.sin(2.0) == pytest.approx(-1.1995, abs=1e-4)
    assert find_solutions(linear_instance(4.0)) == []


def test_tangency_brackets_are_rejected():
    """lambda = 20 has a residual jump where an interior minimum touches zero; no record may come from it."""
    recs = find_solutions(make(3, 20.0), 1.0 + 1e-6, 50.0, 256)
    for rec in recs:
        assert abs(rec.traj.u[-1]) <= RESIDUAL_TOL * (1 + rec.a)


def test_determinism(superlinear):
    a = find_solutions(superlinear, math.sqrt(3.0), 50.0, 64)
    b = find_solutions(superlinear, math.sqrt(3.0), 50.0, 64)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_scan_parameter_errors(superlinear):
    with pytest.raises(ValueError):
        find_solutions(superlinear, 5.0, 3.0)
    with pytest.raises(ValueError):
        find_solutions(superlinear, 1.0, 3.0, n_scan=4)
    with pytest.raises(ValueError):
        a_grid(1.0, 2.0, 16, "cubic")
    np.testing.assert_allclose(a_grid(1.0, 3.0, 9, "linear"), np.linspace(1, 3, 9))


# --- crossings and lemma checks -------------------------------------------------

def test_find_crossing_examples():
    inst = make(3, 2.0)
    const = integrate_ivp(inst, 1.0, GridConfig(256))
    assert find_crossing(const, 1.0) == 0.0
    lin = integrate_ivp(linear_instance(4.0), 2.0, GridConfig(4096))
    ref = brentq(lambda r: math.sin(2 * r) / (2 * r) - 0.5, 0.5, 1.0, xtol=1e-15)
    assert ref == pytest.approx(0.9478, abs=1e-4)
    assert find_crossing(lin, 1.5) == pytest.approx(ref, abs=1e-6)
    assert find_crossing(lin, 2.5) is None


def test_verify_lemma_u0_synthetic():
    inst = make(3, 1.0)
    U0 = SQUARE.U0
    r = np.linspace(0.0, 1.0, 101)
    rec = synthetic(inst, U0 * (1 - r**2), -2 * U0 * r)
    ok, margin = verify_lemma_u0(rec)
    assert ok and margin == 0.0
    bad = synthetic(inst, 1.5 * (1 - r**2), -3.0 * r)
    ok, margin = verify_lemma_u0(bad)
    assert not ok and margin == pytest.approx(1.5 - U0)


def test_theorem_bounds_on_steep_synthetic_record():
    inst = make(3, 1.0)
    r = np.linspace(0.0, 1.0, 2001)
    rec = synthetic(inst, 2.0 * (1 - r), np.full(r.size, -2.0))
    rep = verify_theorem_bounds(rec, 4.0)
    assert rep.r1 == pytest.approx(1 - 0.5 * (1 + SQUARE.U0) / 2.0, abs=1e-9)
    assert rep.r2 == pytest.approx(0.875, abs=1e-9)
    assert rep.r1_in_half and rep.r2_in_quarter
    assert rep.slope == pytest.approx(-2.0, rel=1e-9)
    assert abs(rep.slope) <= 4 * abs(0.25 - 0.5 * (1 + SQUARE.U0)) <= 6 * SQUARE.U0
    assert rep.slope_bound_ok is True and rep.du_r3 == -2.0
    assert rep.M < 0 and rep.energy_bound_ok is True
    assert rep.energy_upper == pytest.approx(inst.lam * rep.M + (6 * SQUARE.U0) ** 2)
    assert rep.monotone_decreasing


def test_theorem_bounds_gating_and_missing_crossings():
    inst = make(3, 1.0)
    r = np.linspace(0.0, 1.0, 201)
    # never reaches u0/c: r2 absent
    rec = synthetic(inst, 2.0 - r, -np.ones_like(r))
    rep = verify_theorem_bounds(rec)
    assert rep.r2 is None and rep.slope_bound_ok is None and rep.energy_bound_ok is None
    with pytest.raises(ValueError):
        verify_theorem_bounds(rec, c=2.0)


def test_sweep_record_gated_at_small_lambda(superlinear):
    rec = find_solutions(superlinear)[0]
    d = rec.diagnostics
    assert d.r2 - d.r1 < 0.25
    assert d.slope_bound_ok is None and d.energy_bound_ok is None
    assert not d.r1_in_half


def test_max_F_on_band():
    inst = make(3, 1.0)
    u = np.linspace(0.25, 0.5 * (1 + SQUARE.U0), 100001)
    assert max_F_on_band(inst, 4.0) == pytest.approx(np.max(u**3 / 3 - u), abs=1e-9)
    assert max_F_on_band(inst, 4.0) < 0


# --- sweeps ---------------------------------------------------------------------

def _fake(inst, flags):
    recs = []
    for ok in flags:
        r = np.linspace(0.0, 1.0, 11)
        rec = synthetic(inst, 3.0 * (1 - r**2), -6.0 * r)
        recs.append([rec] if ok else [])
    return recs


def test_estimate_lambda0_trivial():
    inst = make(3, 1.0)
    grid = [1.0, 2.0, 4.0]
    assert estimate_lambda0(SweepReport(grid, _fake(inst, [True, True, True]))) is None
    assert estimate_lambda0(SweepReport(grid, _fake(inst, [False, False, False]))) == 1.0
    assert estimate_lambda0(SweepReport(grid, _fake(inst, [True, False, True]))) is None
    assert estimate_lambda0(SweepReport(grid, _fake(inst, [False, True, False]))) == 4.0
    assert estimate_lambda0(SweepReport([], [])) is None


def test_sweep_grid_validation(superlinear):
    rep = sweep_lambda(superlinear, [])
    assert rep.lambda_grid == [] and rep.records == [] and rep.lambda0_estimate is None
    with pytest.raises(ValueError):
        sweep_lambda(superlinear, [2.0, 1.0])
    with pytest.raises(ValueError):
        sweep_lambda(superlinear, [0.0, 1.0])


def test_single_lambda_sweep(superlinear):
    rep = sweep_lambda(superlinear, [0.5], n_scan=64)
    assert len(rep.records) == 1 and len(rep.records[0]) == 1
    assert rep.lambda0_estimate is None and rep.branch[0][0] == 0.5


def test_superlinear_sweep_threshold():
    rep = sweep_lambda(make(3, 1.0), [0.25 * 2**k for k in range(17)])
    assert rep.lambda0_estimate == 8.0 and rep.lambda0_bracket == (4.0, 8.0)
    lams = [lam for lam, _ in rep.branch]
    assert lams == [0.25, 0.5, 1.0, 2.0, 4.0]
    amps = [a for _, a in rep.branch]
    assert all(x > y for x, y in zip(amps, amps[1:]))
    for rec in rep.positive_records():
        assert rec.diagnostics.u0_bound_ok and rec.diagnostics.monotone_decreasing
        assert rec.energy_report.passed
    assert rep.lambda2_evidence == 0.25


def test_perturbed_sweep_finite_threshold():
    tmpl = make(3, 1.0, PhiModel("perturbed-p", 2.5), SQUARE)
    rep = sweep_lambda(tmpl, [1.0, 4.0, 16.0, 64.0, 256.0], n_scan=128, grid=GridConfig(1024))
    assert rep.lambda0_estimate is not None
    for rec in rep.positive_records():
        assert rec.diagnostics.u0_bound_ok and rec.energy_report.passed


def test_build_record_for_non_solution_profile():
    inst = make(3, 2.0, PLAP2, LINEAR)
    rec = build_record(inst, integrate_ivp(inst, 2.0))
    # stays positive up to r = 1 but misses the boundary condition
    assert rec.traj.u.min() > 0 and rec.residual > 1.0
    assert not rec.positive
    assert rec.energy_report.nonneg is None

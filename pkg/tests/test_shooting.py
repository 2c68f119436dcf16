import json
import math
import time

import numpy as np
import pytest

from conftest import CUBE, LINEAR, PLAP2, SQUARE, make
from semipositone.models import PhiModel
from semipositone.oracle import linear_exact
from semipositone.shooting import (REACHED_BOUNDARY, ZERO_CROSSING, GridConfig, Trajectory, integrate_ivp,
                                   integrate_many, shoot, shoot_many)

EXACT_U1 = 1.0 + math.sin(2.0) / 2.0


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridConfig(n_steps=1)
    with pytest.raises(ValueError):
        GridConfig(corrector_tol=0.0)
    assert GridConfig(512).refined().n_steps == 1024


def test_linear_oracle_examples(linear4):
    tr = integrate_ivp(linear4, 2.0, GridConfig(4096))
    assert tr.reached_boundary and tr.r[-1] == 1.0
    assert tr.u[-1] == pytest.approx(EXACT_U1, abs=1e-6)
    tr = integrate_ivp(linear4, 0.2, GridConfig(4096))
    assert tr.u[-1] == pytest.approx(1.0 - 0.8 * math.sin(2.0) / 2.0, abs=1e-6)
    assert tr.u.min() > 0


def test_shoot_linear(linear4):
    res = shoot(linear4, 2.0)
    assert res.reached_boundary and res.crossing_radius is None
    assert res.terminal_u == pytest.approx(EXACT_U1, abs=1e-6)
    assert res.du_at_1 == pytest.approx(math.cos(2.0) - math.sin(2.0) / 2.0, abs=1e-5)


@pytest.mark.parametrize("phi", [PLAP2, PhiModel("p-laplacian", 3.0), PhiModel("perturbed-p", 2.5)])
@pytest.mark.parametrize("reaction", [SQUARE, CUBE])
def test_stationary_at_u0(phi, reaction):
    inst = make(3, 2.0, phi, reaction)
    u0 = reaction.u0
    tr = integrate_ivp(inst, u0)
    assert np.all(tr.u == u0) and np.all(tr.du == 0) and np.all(tr.I == 0)
    assert shoot(inst, u0).terminal_u == u0


@pytest.mark.parametrize("phi", [PLAP2, PhiModel("p-laplacian", 2.5), PhiModel("perturbed-p", 2.5)])
@pytest.mark.parametrize("N", [2, 3])
def test_consistency_with_integral_form(phi, N):
    inst = make(N, 3.0, phi, SQUARE)
    grid = GridConfig(1024)
    tr = integrate_ivp(inst, 2.5, grid)
    r, du, I = tr.r[1:-1], tr.du[1:-1], tr.I[1:-1]  # noqa: E741
    gap = np.abs(du + phi.varphi_inverse(r ** (1 - N) * I))
    assert gap.max() <= 10 * grid.corrector_tol * (1 + np.abs(du).max())


def test_integral_is_trapezoid_of_source():
    inst = make(3, 3.0)
    tr = integrate_ivp(inst, 2.5, GridConfig(2048))
    integrand = inst.lam * tr.r**2 * SQUARE.f(tr.u)
    trap = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(tr.r) * (integrand[1:] + integrand[:-1]))])
    assert np.max(np.abs(tr.I - trap)) <= 1e-6 * (1 + np.abs(tr.I).max())


def test_sign_structure():
    inst = make(3, 1.0, PhiModel("perturbed-p", 2.5), CUBE)
    tr = integrate_ivp(inst, 3.0)
    fu = CUBE.f(tr.u)
    # while f(u) has stayed positive from the origin, u' must be negative
    run = np.flatnonzero(fu <= 0)
    stop = run[0] if run.size else tr.r.size
    assert stop > 10
    assert np.all(tr.du[1:stop] < 0)


def orders(vals, ref):
    err = np.abs(np.asarray(vals) - ref)
    return np.log2(err[:-1] / err[1:])


def test_convergence_order_linear(linear4):
    vals = [shoot(linear4, 2.0, GridConfig(n)).terminal_u for n in (512, 1024, 2048, 4096)]
    ref = shoot(linear4, 2.0, GridConfig(8192)).terminal_u
    assert np.all(orders(vals, ref) >= 1.8)
    assert ref == pytest.approx(EXACT_U1, abs=1e-7)


def test_linear_sup_error_and_speed():
    for lam in (1.0, 4.0, 9.0):
        inst = make(3, lam, PLAP2, LINEAR)
        for a in (0.2, 2.0, 5.0):
            t0 = time.perf_counter()
            tr = integrate_ivp(inst, a, GridConfig(4096))
            elapsed = time.perf_counter() - t0
            err = np.max(np.abs(tr.u - linear_exact(lam, a, tr.r)))
            assert err <= 1e-6 and elapsed < 1.0


def test_zero_crossing_truncates_and_matches_fine_grid():
    inst = make(3, 20.0)
    tr = integrate_ivp(inst, 6.0)
    assert tr.truncated and not tr.reached_boundary
    assert tr.events[-1].kind == ZERO_CROSSING
    assert tr.u[-1] == 0.0 and np.all(tr.u[:-1] > 0)
    fine = integrate_ivp(inst, 6.0, GridConfig(20480))
    assert tr.crossing_radius == pytest.approx(fine.crossing_radius, abs=1e-5)
    res = shoot(inst, 6.0)
    assert res.terminal_u < 0 and res.crossing_radius == pytest.approx(tr.crossing_radius)
    assert res.terminal_u == pytest.approx(-(1 - tr.crossing_radius) * abs(tr.du[-1]), rel=1e-12)


def test_tangential_onset_of_crossing():
    """When an interior minimum first touches zero the residual jumps sign, with min u -> 0 on the left."""
    inst = make(3, 20.0)
    a = np.linspace(4.0, 6.0, 41)
    b = shoot_many(inst.phi, inst.reaction, 3, np.full(a.size, 20.0), a)
    assert np.all(np.isfinite(b.terminal))
    flip = np.flatnonzero(np.sign(b.terminal[:-1]) != np.sign(b.terminal[1:]))
    assert flip.size == 1
    k = flip[0]
    assert b.reached[k] and not b.reached[k + 1]
    assert 0 < b.min_u[k] < 0.02 and b.min_u[k + 1] == 0.0
    assert np.all(np.diff(b.min_u[: k + 1]) < 0)


def test_continue_past_zero():
    inst = make(3, 20.0)
    tr = integrate_ivp(inst, 6.0, continue_past_zero=True)
    assert tr.reached_boundary and not tr.truncated and tr.r.size == 2049
    assert tr.crossing_radius == pytest.approx(integrate_ivp(inst, 6.0).crossing_radius, abs=1e-12)
    assert tr.u.min() < 0


def test_window_exit():
    inst = make(3, 20.0)
    tr = integrate_ivp(inst, 6.0, window=(3.0, 10.0))
    assert tr.events[-1].kind == "window-exit"
    assert tr.r[-1] < 1.0


def test_invalid_a(superlinear):
    with pytest.raises(ValueError):
        integrate_ivp(superlinear, 0.0)
    with pytest.raises(ValueError):
        shoot(superlinear, -1.0)


def test_batch_matches_single():
    inst = make(3, 2.0)
    a = np.array([1.5, 3.0, 6.0])
    batch = integrate_many(inst.phi, inst.reaction, 3, 2.0, a)
    for ai, tb in zip(a, batch):
        ts = integrate_ivp(inst, ai)
        # the batch shares one stopping rule for the corrector, so agreement is to rounding
        np.testing.assert_allclose(tb.u, ts.u, rtol=1e-11, atol=0)


def test_serialization_roundtrip():
    inst = make(3, 20.0)
    tr = integrate_ivp(inst, 6.0, GridConfig(256))
    back = Trajectory.from_dict(json.loads(tr.to_json()))
    np.testing.assert_array_equal(back.u, tr.u)
    assert back.events == tr.events and back.n_steps == 256
    csv = tr.to_csv()
    lines = csv.strip().splitlines()
    assert lines[0] == "r,u,du,I,E" and len(lines) == tr.r.size + 1
    assert float(lines[-1].split(",")[0]) == tr.r[-1]


def test_downsample_keeps_crossing_row():
    inst = make(3, 20.0)
    tr = integrate_ivp(inst, 6.0, GridConfig(1024))
    ds = tr.downsample(4)
    assert ds.r[-1] == tr.r[-1] and ds.truncated
    np.testing.assert_array_equal(ds.r[:-1], tr.r[:-1][::4])
    full = integrate_ivp(make(3, 1.0), 2.0, GridConfig(1024)).downsample(4)
    assert full.r.size == 257 and full.r[-1] == 1.0 and full.events[-1].kind == REACHED_BOUNDARY

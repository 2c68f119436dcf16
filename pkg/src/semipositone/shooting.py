"""Radial initial-value integration from ``u(0) = a, u'(0) = 0``.

The solver works on the integral form of the radial equation: with the
running integral ``I(r) = int_0^r lam t^(N-1) f(u(t)) dt`` and
``J = r^(1-N) I``, the slope is ``u' = -varphi^-1(J)``. On a uniform grid
each step

* advances ``I`` by product trapezoid (exact weights for ``t^(N-1)`` against
  the linear interpolant of ``f(u)``),
* advances ``u`` by the exact integral of ``varphi^-1`` along the linear
  interpolant of ``J``, i.e. ``h * (Psi(J1) - Psi(J0)) / (J1 - J0)`` with
  ``Psi' = varphi^-1`` (this reduces to the trapezoid rule when varphi is
  linear and stays second order where ``varphi^-1`` is only Holder),
* closes the implicit step by fixed-point iteration on ``u(r_{i+1})``, with a
  bracketed fallback because the step map is monotone in the unknown.

At ``r = 0`` the interpolant starts from ``J(0) = 0``, which is the removable
limit ``J ~ lam f(a) r / N``. Everything is vectorized over shots: every
shot in a batch shares the grid, the models and ``N``, but carries its own
``lam`` and ``a``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .models import PhiModel, ProblemInstance, ReactionModel
from .roots import RootFindingError, illinois

ZERO_CROSSING = "zero-crossing"
REACHED_BOUNDARY = "reached-boundary"
WINDOW_EXIT = "window-exit"

_GAUSS = 0.5 / math.sqrt(3.0)
_DIVIDED_MIN = 1e-4


class IntegrationError(RuntimeError):
    """The step corrector failed; ``radius`` is where the failing step starts."""

    def __init__(self, message: str, radius: float):
        super().__init__(f"{message} (at r = {radius:.6g})")
        self.radius = radius


@dataclass(frozen=True)
class GridConfig:
    n_steps: int = 2048
    corrector_tol: float = 1e-12
    max_corrector_iters: int = 50

    def __post_init__(self):
        if self.n_steps < 16:
            raise ValueError(f"n_steps must be at least 16, got {self.n_steps}")
        if not self.corrector_tol > 0:
            raise ValueError("corrector_tol must be positive")
        if self.max_corrector_iters < 1:
            raise ValueError("max_corrector_iters must be positive")

    def refined(self, factor: int = 2) -> "GridConfig":
        return GridConfig(self.n_steps * factor, self.corrector_tol, self.max_corrector_iters)


DEFAULT_GRID = GridConfig()


@dataclass(frozen=True)
class Event:
    kind: str
    radius: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "radius": self.radius}


@dataclass
class Trajectory:
    """Discrete radial profile; ``r[0] = 0`` and the last radius is at most 1.

    When the profile is truncated at a zero of ``u`` the final row is the
    interpolated crossing point itself, so the last spacing may be shorter.
    """

    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    I: np.ndarray  # noqa: E741
    events: list[Event] = field(default_factory=list)
    lam: float = math.nan
    n_steps: int = 0

    def __len__(self) -> int:
        return len(self.r)

    @property
    def a(self) -> float:
        return float(self.u[0])

    @property
    def reached_boundary(self) -> bool:
        return any(e.kind == REACHED_BOUNDARY for e in self.events)

    @property
    def crossing_radius(self) -> float | None:
        for e in self.events:
            if e.kind == ZERO_CROSSING:
                return e.radius
        return None

    @property
    def truncated(self) -> bool:
        """True when the last row is an interpolated zero crossing, not a grid point."""
        return self.crossing_radius is not None and not self.reached_boundary

    def downsample(self, factor: int) -> "Trajectory":
        """Every ``factor``-th uniform grid point (the crossing row, if any, is kept)."""
        n_uniform = len(self.r) - (1 if self.truncated else 0)
        idx = np.arange(0, n_uniform, factor)
        if self.truncated:
            idx = np.append(idx, len(self.r) - 1)
        return Trajectory(self.r[idx], self.u[idx], self.du[idx], self.I[idx], list(self.events),
                          self.lam, self.n_steps // factor)

    def to_dict(self, E=None) -> dict:
        d = {
            "lambda": self.lam,
            "n_steps": self.n_steps,
            "r": self.r.tolist(),
            "u": self.u.tolist(),
            "du": self.du.tolist(),
            "I": self.I.tolist(),
            "events": [e.to_dict() for e in self.events],
        }
        if E is not None:
            d["E"] = np.asarray(E).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            r=np.asarray(d["r"], float), u=np.asarray(d["u"], float),
            du=np.asarray(d["du"], float), I=np.asarray(d["I"], float),
            events=[Event(e["kind"], float(e["radius"])) for e in d.get("events", [])],
            lam=float(d.get("lambda", math.nan)), n_steps=int(d.get("n_steps", 0)),
        )

    def to_json(self, E=None) -> str:
        return json.dumps(self.to_dict(E))

    def to_csv(self, E=None) -> str:
        """CSV with header ``r,u,du,I,E`` (``E`` left empty when not supplied)."""
        lines = ["r,u,du,I,E"]
        for i in range(len(self.r)):
            e = "" if E is None else f"{E[i]:.17g}"
            # + 0.0 prints negative zero as 0
            lines.append(f"{self.r[i]:.17g},{self.u[i]:.17g},{self.du[i] + 0.0:.17g},{self.I[i] + 0.0:.17g},{e}")
        return "\n".join(lines) + "\n"


@dataclass
class ShootResult:
    """Boundary residual of one shot.

    ``terminal_u`` is ``u(1)`` when the shot reaches the boundary, otherwise
    ``-(1 - r*) |u'(r*)|`` for the first zero ``r*`` of ``u``; both branches
    agree as ``r* -> 1`` so the residual changes sign continuously.
    """

    terminal_u: float
    min_u: float
    crossing_radius: float | None
    du_at_1: float
    reached_boundary: bool


class _Step:
    """Per-grid constants for the product trapezoid on ``t^(N-1)``."""

    def __init__(self, N: int, n: int):
        self.h = 1.0 / n
        self.r = np.linspace(0.0, 1.0, n + 1)
        h, ri = self.h, self.r[:-1]
        wl = np.zeros(n)
        wr = np.zeros(n)
        for j in range(N):
            c = comb(N - 1, j) * ri ** (N - 1 - j) * h ** (j + 1)
            wl += c / ((j + 1) * (j + 2))
            wr += c / (j + 2)
        self.wl, self.wr = wl, wr
        with np.errstate(divide="ignore"):
            self.inv = self.r ** (1 - N)


def _inverse_and_psi(phi: PhiModel, J):
    """``varphi^-1(J)`` and ``Psi(J) = int_0^J varphi^-1``."""
    if phi.kind == "p-laplacian":
        a = np.abs(J)
        s = a ** (1.0 / (phi.p - 1.0))
        return np.copysign(s, J), a * s / phi.gamma
    s = phi.varphi_inverse(J)
    return s, J * s - phi.big_phi(s)


def _mean_inverse(phi: PhiModel, J0, J1, P0, P1):
    """Mean of ``varphi^-1`` over ``[J0, J1]`` from the Psi divided difference."""
    dJ = J1 - J0
    scale = np.maximum(np.abs(J0), np.abs(J1))
    near = np.abs(dJ) <= _DIVIDED_MIN * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (P1 - P0) / dJ
    if near.any():
        m = 0.5 * (J0[near] + J1[near])
        d = _GAUSS * dJ[near]
        out[near] = 0.5 * (phi.varphi_inverse(m - d) + phi.varphi_inverse(m + d))
    return out


@dataclass
class _Batch:
    terminal: np.ndarray
    min_u: np.ndarray
    crossing: np.ndarray
    du_end: np.ndarray
    reached: np.ndarray
    window_exit: np.ndarray
    trajectories: list[Trajectory] | None = None


def _run(
    phi: PhiModel,
    reaction: ReactionModel,
    N: int,
    lam,
    a,
    grid: GridConfig,
    *,
    store: bool = False,
    continue_past_zero: bool = False,
    window: tuple[float, float] | None = None,
) -> _Batch:
    lam_all = np.asarray(lam, float).ravel()
    a_all = np.asarray(a, float).ravel()
    lam_all, a_all = np.broadcast_arrays(lam_all, a_all)
    lam_all, a_all = lam_all.copy(), a_all.copy()
    m = a_all.size
    n = grid.n_steps
    st = _Step(N, n)
    h, tol = st.h, grid.corrector_tol
    f = reaction.f
    wlo, whi = window if window is not None else (-math.inf, math.inf)

    terminal = np.full(m, np.nan)
    min_u = a_all.copy()
    crossing = np.full(m, np.nan)
    du_end = np.full(m, np.nan)
    reached = np.zeros(m, bool)
    wexit = np.zeros(m, bool)
    if store:
        R = np.tile(st.r, (m, 1))
        R = np.concatenate([R, np.zeros((m, 1))], axis=1)
        U = np.zeros((m, n + 2))
        DU = np.zeros((m, n + 2))
        II = np.zeros((m, n + 2))
        U[:, 0] = a_all
        length = np.full(m, n + 1)
        events: list[list[Event]] = [[] for _ in range(m)]

    ids = np.arange(m)
    u = a_all.copy()
    lam_v = lam_all.copy()
    I = np.zeros(m)  # noqa: E741
    J = np.zeros(m)
    P = np.zeros(m)
    du = np.zeros(m)
    fu = f(u)
    u_prev = u.copy()

    for i in range(n):
        if ids.size == 0:
            break
        wl, wr, inv = st.wl[i], st.wr[i], st.inv[i + 1]
        base_I = I + lam_v * wl * fu
        coef = lam_v * wr

        def step_map(x, sel=slice(None)):
            I1 = base_I[sel] + coef[sel] * f(x)
            J1 = I1 * inv
            s1, P1 = _inverse_and_psi(phi, J1)
            return u[sel] - h * _mean_inverse(phi, J[sel], J1, P[sel], P1), I1, J1, s1, P1

        x = 2.0 * u - u_prev if i > 0 else u.copy()
        prev_err = np.full(ids.size, np.inf)
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(grid.max_corrector_iters):
                x_new, I1, J1, s1, P1 = step_map(x)
                err = np.abs(x_new - x)
                x = x_new
                pending = ~(err <= tol * (1.0 + np.abs(x)))
                if not pending.any():
                    break
                stuck = pending & (err >= 0.9 * prev_err) if k >= 3 else np.zeros_like(pending)
                if not (pending & ~stuck).any():
                    break
                prev_err = err
        if pending.any():
            sel = np.flatnonzero(pending)
            x0 = np.where(np.isfinite(x[sel]), x[sel], u[sel])
            g0 = step_map(x0, sel)[0]
            lo, hi = np.minimum(x0, g0), np.maximum(x0, g0)
            gfun = lambda y: y - step_map(y, sel)[0]  # noqa: E731
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    root, _, _ = illinois(gfun, lo, hi, xtol=tol, maxiter=400)
            except RootFindingError as exc:
                raise IntegrationError("step corrector did not converge", float(st.r[i])) from exc
            x_sel, I_sel, J_sel, s_sel, P_sel = step_map(root, sel)
            x[sel] = root
            I1[sel], J1[sel], s1[sel], P1[sel] = I_sel, J_sel, s_sel, P_sel
        u1 = x
        du1 = -s1

        finished = np.zeros(ids.size, bool)
        bad = ~np.isfinite(u1) | (u1 < wlo) | (u1 > whi)
        if not continue_past_zero:
            crossed = ~bad & (u1 <= 0.0)
        else:
            crossed = np.zeros(ids.size, bool)
            first = ~bad & (u1 <= 0.0) & np.isnan(crossing[ids])
            if first.any():
                # record the first zero but keep integrating
                theta = u[first] / (u[first] - u1[first])
                rs = st.r[i] + theta * h
                crossing[ids[first]] = rs
                if store:
                    for g, rr in zip(ids[first], rs):
                        events[g].append(Event(ZERO_CROSSING, float(rr)))
        if bad.any():
            gi = ids[bad]
            wexit[gi] = True
            crossing[gi] = np.nan
            terminal[gi] = np.nan
            du_end[gi] = du[bad]
            if store:
                for g in gi:
                    length[g] = i + 1
                    events[g].append(Event(WINDOW_EXIT, float(st.r[i + 1])))
            finished |= bad
        if crossed.any():
            theta = u[crossed] / (u[crossed] - u1[crossed])
            rs = st.r[i] + theta * h
            dus = du[crossed] + theta * (du1[crossed] - du[crossed])
            Is = I[crossed] + theta * (I1[crossed] - I[crossed])
            gi = ids[crossed]
            crossing[gi] = rs
            du_end[gi] = dus
            terminal[gi] = -(1.0 - rs) * np.abs(dus)
            min_u[gi] = 0.0
            if store:
                R[gi, i + 1] = rs
                U[gi, i + 1] = 0.0
                DU[gi, i + 1] = dus
                II[gi, i + 1] = Is
                length[gi] = i + 2
                for g, rr in zip(gi, rs):
                    events[g].append(Event(ZERO_CROSSING, float(rr)))
            finished |= crossed
        live = ~finished
        if store:
            gi = ids[live]
            U[gi, i + 1] = u1[live]
            DU[gi, i + 1] = du1[live]
            II[gi, i + 1] = I1[live]
        gl = ids[live]
        min_u[gl] = np.minimum(min_u[gl], u1[live])
        if i + 1 == n:
            terminal[gl] = u1[live]
            du_end[gl] = du1[live]
            reached[gl] = True
            if store:
                for g in gl:
                    events[g].append(Event(REACHED_BOUNDARY, 1.0))
            ids = ids[:0]
            break
        if finished.any():
            ids = ids[live]
            u_prev, u, I, J, P, du = u[live], u1[live], I1[live], J1[live], P1[live], du1[live]
            lam_v = lam_v[live]
        else:
            u_prev, u, I, J, P, du = u, u1, I1, J1, P1, du1
        fu = f(u)

    out = _Batch(terminal, min_u, crossing, du_end, reached, wexit)
    if store:
        out.trajectories = [
            Trajectory(R[g, : length[g]].copy(), U[g, : length[g]].copy(), DU[g, : length[g]].copy(),
                       II[g, : length[g]].copy(), events[g], float(lam_all[g]), n)
            for g in range(m)
        ]
    return out


def integrate_ivp(
    instance: ProblemInstance,
    a: float,
    grid: GridConfig = DEFAULT_GRID,
    *,
    continue_past_zero: bool = False,
    window: tuple[float, float] | None = None,
) -> Trajectory:
    """Integrate from ``u(0) = a`` to ``r = 1`` or the first event.

    By default the profile stops at the first zero of ``u``, because ``f``
    only lives on ``[0, inf)``; with ``continue_past_zero`` the integration
    goes on using ``f(u) = f(0)`` for negative ``u``.

    Raises:
        ValueError: for ``a <= 0``.
        IntegrationError: when a step cannot be closed.
    """
    if not a > 0:
        raise ValueError(f"initial value a must be positive, got {a}")
    return integrate_many(instance.phi, instance.reaction, instance.N, instance.lam, [a], grid,
                          continue_past_zero=continue_past_zero, window=window)[0]


def integrate_many(phi, reaction, N, lam, a, grid: GridConfig = DEFAULT_GRID, **kwargs) -> list[Trajectory]:
    """Stored trajectories for a batch of ``(lam, a)`` shots."""
    return _run(phi, reaction, N, lam, a, grid, store=True, **kwargs).trajectories


def shoot(instance: ProblemInstance, a: float, grid: GridConfig = DEFAULT_GRID, **kwargs) -> ShootResult:
    """Boundary residual of a single shot; see :class:`ShootResult`."""
    if not a > 0:
        raise ValueError(f"initial value a must be positive, got {a}")
    b = _run(instance.phi, instance.reaction, instance.N, instance.lam, [a], grid, **kwargs)
    cr = None if np.isnan(b.crossing[0]) else float(b.crossing[0])
    return ShootResult(float(b.terminal[0]), float(b.min_u[0]), cr, float(b.du_end[0]), bool(b.reached[0]))


def shoot_many(phi, reaction, N, lam, a, grid: GridConfig = DEFAULT_GRID, **kwargs) -> _Batch:
    """Vectorized :func:`shoot` without trajectory storage."""
    return _run(phi, reaction, N, lam, a, grid, **kwargs)

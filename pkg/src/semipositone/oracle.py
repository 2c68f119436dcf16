"""Closed-form and refinement references for checking the integrator.

For ``p = 2``, ``N = 3`` and ``f(u) = u - 1`` the substitution
``v = r (u - 1)`` turns the radial equation into ``v'' + lam v = 0``, so
``u(r) = 1 + (a - 1) sin(sqrt(lam) r) / (sqrt(lam) r)``. That reaction breaks
the growth hypothesis and is used only to measure integrator accuracy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .models import ModelError, PhiModel, ProblemInstance, ReactionModel
from .shooting import DEFAULT_GRID, GridConfig, Trajectory, integrate_ivp

REFERENCE_FACTOR = 4


def linear_instance(lam: float) -> ProblemInstance:
    """The ``p = 2``, ``N = 3``, ``f(u) = u - 1`` instance behind :func:`linear_exact`."""
    with warnings.catch_warnings():
        # alpha = 1 = p - 1 sits on the edge of the growth window by design
        warnings.simplefilter("ignore")
        return ProblemInstance(3, lam, PhiModel("p-laplacian", 2.0), ReactionModel("linear-shift", 1.0))


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam > 0:
        raise ModelError(f"lambda must be positive, got {lam}")
    w = np.sqrt(lam)
    ratio = w / np.pi
    if abs(ratio - round(ratio)) < 1e-12:
        raise ModelError(f"sqrt(lambda) = {w} is a multiple of pi")
    return w


@dataclass(frozen=True)
class LinearBallSolution:
    """Exact radial profile of the linear oracle instance."""

    lam: float
    a: float

    def __post_init__(self):
        _check_lambda(self.lam)

    @property
    def omega(self) -> float:
        return float(np.sqrt(self.lam))

    def u(self, r):
        return linear_exact(self.lam, self.a, r)

    def du(self, r):
        """Exact ``u'(r) = (a - 1)(w r cos(w r) - sin(w r)) / (w r^2)``, 0 at the origin."""
        r = _check_radius(r)
        w = self.omega
        x = w * r
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.a - 1.0) * (x * np.cos(x) - np.sin(x)) / (w * r**2)
        # series: (a-1) * (-w^2 r / 3) near zero
        small = x < 1e-4
        out = np.where(small, -(self.a - 1.0) * w * x / 3.0, out)
        return out if out.ndim else float(out)

    def running_integral(self, r):
        """``I(r) = r^2 u'(r)`` up to sign, as fixed by ``u' = -I / r^2``."""
        r = _check_radius(r)
        return -(r**2) * self.du(r)


def _check_radius(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r < 0) or np.any(r > 1):
        raise ModelError("linear_exact is defined for 0 <= r <= 1")
    return r


def linear_exact(lam: float, a: float, r):
    """``u(r) = 1 + (a - 1) sin(sqrt(lam) r) / (sqrt(lam) r)`` with ``u(0) = a``.

    Raises:
        ModelError: if ``lam <= 0``, ``sqrt(lam)`` is a multiple of pi, or
            any radius lies outside ``[0, 1]``.
    """
    w = _check_lambda(lam)
    r = _check_radius(r)
    out = 1.0 + (a - 1.0) * np.sinc(w * r / np.pi)
    return out if out.ndim else float(out)


def richardson_reference(instance: ProblemInstance, a: float, n_steps: int,
                         grid: GridConfig = DEFAULT_GRID, **kwargs) -> Trajectory:
    """Integrate on a grid four times finer and keep every fourth point.

    Grid points then coincide with an ``n_steps`` integration, which makes
    pointwise comparison exact in ``r``. A crossing row, if any, is kept.
    """
    fine = GridConfig(n_steps * REFERENCE_FACTOR, grid.corrector_tol, grid.max_corrector_iters)
    return integrate_ivp(instance, a, fine, **kwargs).downsample(REFERENCE_FACTOR)

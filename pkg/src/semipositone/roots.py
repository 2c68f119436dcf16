"""Bracketed scalar root finding, vectorized over independent brackets.

Every caller in the package solves monotone or sign-changing scalar
equations many times at once (one per shot, per grid value, per bracket),
so the solvers here take arrays of brackets and advance them in lockstep.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

DEFAULT_XTOL = 1e-12
DEFAULT_MAXITER = 200


class RootFindingError(RuntimeError):
    """Raised when a bracketed search cannot meet its tolerance."""

    def __init__(self, message: str, lo=None, hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


def bisect(
    g: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    *,
    xtol: float = DEFAULT_XTOL,
    ftol: float = 0.0,
    maxiter: int = DEFAULT_MAXITER,
):
    """Plain bisection on ``g(lo) <= 0 <= g(hi)`` (or the reverse), elementwise.

    Stops an element once ``hi - lo <= xtol * max(1, |x|)``, once the bracket
    cannot shrink in floating point, or when ``|g| <= ftol``. Exact zeros at
    the endpoints are returned as-is.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    scalar = lo.ndim == 0
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    glo, ghi = np.asarray(g(lo), float), np.asarray(g(hi), float)
    if np.any(np.sign(glo) * np.sign(ghi) > 0):
        raise RootFindingError("bisect: endpoints do not bracket a sign change", lo, hi)
    root = np.where(glo == 0, lo, np.where(ghi == 0, hi, np.nan))
    rising = glo < ghi
    done = ~np.isnan(root)
    for _ in range(maxiter):
        if done.all():
            break
        mid = 0.5 * (lo + hi)
        gm = np.asarray(g(mid), float)
        below = np.where(rising, gm < 0, gm > 0)
        lo = np.where(~done & below, mid, lo)
        hi = np.where(~done & ~below, mid, hi)
        hit = ~done & ((np.abs(gm) <= ftol) | (gm == 0))
        root = np.where(hit, mid, root)
        done |= hit
        width = hi - lo
        center = 0.5 * (lo + hi)
        small = ~done & ((width <= xtol * np.maximum(1.0, np.abs(center))) | (center == lo) | (center == hi))
        root = np.where(small, center, root)
        done |= small
    if not done.all():
        raise RootFindingError(f"bisect: no convergence after {maxiter} iterations", lo, hi)
    return float(root[0]) if scalar else root


def illinois(
    g: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    glo=None,
    ghi=None,
    *,
    xtol: float = DEFAULT_XTOL,
    ftol: float = 0.0,
    maxiter: int = DEFAULT_MAXITER,
):
    """Illinois-modified regula falsi over arrays of sign-changing brackets.

    Falls back to a bisection step whenever an interpolated point would land
    outside the open bracket or the bracket failed to halve over the last
    three iterations. Returns ``(root, lo, hi)`` with the final brackets.
    """
    lo = np.atleast_1d(np.array(lo, dtype=float, copy=True))
    hi = np.atleast_1d(np.array(hi, dtype=float, copy=True))
    glo = np.atleast_1d(np.asarray(g(lo) if glo is None else glo, float)).copy()
    ghi = np.atleast_1d(np.asarray(g(hi) if ghi is None else ghi, float)).copy()
    if np.any(np.sign(glo) * np.sign(ghi) > 0):
        raise RootFindingError("illinois: endpoints do not bracket a sign change", lo, hi)
    root = np.where(glo == 0, lo, np.where(ghi == 0, hi, np.nan))
    done = ~np.isnan(root)
    side = np.zeros(lo.shape, dtype=int)
    width_hist = [hi - lo]
    for it in range(maxiter):
        if done.all():
            break
        denom = ghi - glo
        with np.errstate(divide="ignore", invalid="ignore"):
            x = hi - ghi * (hi - lo) / denom
        mid = 0.5 * (lo + hi)
        stalled = np.zeros_like(done)
        if len(width_hist) > 3:
            stalled = (hi - lo) > 0.5 * width_hist[-4]
        bad = ~np.isfinite(x) | (x <= np.minimum(lo, hi)) | (x >= np.maximum(lo, hi)) | stalled
        x = np.where(bad, mid, x)
        gx = np.asarray(g(x), float)
        same_lo = np.sign(gx) == np.sign(glo)
        # replace the endpoint whose sign matches; halve the stale side value
        new_lo = np.where(same_lo, x, lo)
        new_glo = np.where(same_lo, gx, np.where(side == -1, 0.5 * glo, glo))
        new_hi = np.where(same_lo, hi, x)
        new_ghi = np.where(same_lo, np.where(side == 1, 0.5 * ghi, ghi), gx)
        side = np.where(same_lo, 1, -1)
        # bisection steps keep the true values on both ends
        new_glo = np.where(bad & ~same_lo, glo, new_glo)
        new_ghi = np.where(bad & same_lo, ghi, new_ghi)
        keep = done
        lo = np.where(keep, lo, new_lo)
        hi = np.where(keep, hi, new_hi)
        glo = np.where(keep, glo, new_glo)
        ghi = np.where(keep, ghi, new_ghi)
        hit = ~done & ((np.abs(gx) <= ftol) | (gx == 0))
        root = np.where(hit, x, root)
        done |= hit
        width = np.abs(hi - lo)
        center = 0.5 * (lo + hi)
        small = ~done & ((width <= xtol * np.maximum(1.0, np.abs(center))) | (center == lo) | (center == hi))
        root = np.where(small, center, root)
        done |= small
        width_hist.append(np.abs(hi - lo))
    if not done.all():
        raise RootFindingError(f"illinois: no convergence after {maxiter} iterations", lo, hi)
    return root, lo, hi


def expand_bracket_up(
    g: Callable[[float], float],
    start: float,
    *,
    factor: float = 2.0,
    max_expansions: int = 200,
) -> float:
    """Smallest ``b = start * factor**k`` with ``g(b) >= 0`` for a scalar ``g``."""
    b = start
    for _ in range(max_expansions):
        if g(b) >= 0:
            return b
        b *= factor
    raise RootFindingError(f"bracket expansion from {start} failed after {max_expansions} steps")

"""Operator profiles, reaction terms, and problem instances.

A :class:`PhiModel` describes the operator through its profile ``phi`` and
the odd map ``varphi(s) = phi(|s|) s``; a :class:`ReactionModel` describes
the semipositone nonlinearity ``f`` with antiderivative ``F``. All
evaluation methods accept scalars or numpy arrays.

Builtin families
----------------
``p-laplacian``   ``phi(s) = |s|^(p-2)``; exact bound constants 1, 1.
``perturbed-p``   ``phi(s) = |s|^(p-2) (1 + 1/(2(1+|s|)))``; bounds 1 and 3/2.
``tabulated``     samples of ``varphi`` on ``s >= 0``, monotone cubic in between,
                  power-law tails of exponent ``p - 1``.

``power-shift``   ``f(u) = u^alpha - beta``.
``linear-shift``  ``f(u) = u - 1``.
``tabulated``     samples of ``f``, monotone cubic, power-law tail of exponent alpha.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import hyp2f1

from .roots import DEFAULT_MAXITER, DEFAULT_XTOL, RootFindingError, bisect, expand_bracket_up

PHI_KINDS = ("p-laplacian", "perturbed-p", "tabulated")
REACTION_KINDS = ("power-shift", "linear-shift", "tabulated")

FIT_GRID = np.geomspace(1e-6, 1e3, 1000)
GROWTH_TMAX_FACTOR = 1e3
GROWTH_SAMPLES = 4000


class ModelError(ValueError):
    """A model definition is malformed or violates a structural hypothesis."""


class HypothesisViolation(ModelError):
    """A required hypothesis on ``f`` or ``phi`` fails on the sampled grid."""


def _as_array(x):
    return np.asarray(x, dtype=float)


def _unwrap(x, like):
    return float(np.reshape(x, -1)[0]) if np.ndim(like) == 0 else x


class _Tail:
    """Monotone piecewise-cubic table with power-law extension on ``[0, inf)``.

    The table itself must start at ``x[0] >= 0``; below ``x[0]`` (when it is
    positive) and above ``x[-1]`` the values follow ``y_end * (x/x_end)**e``.
    """

    def __init__(self, x, y, exponent: float):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ModelError("tabulated model needs two equal-length 1-D sample arrays")
        if np.any(np.diff(x) <= 0) or x[0] < 0:
            raise ModelError("tabulated abscissae must be nonnegative and strictly increasing")
        self.x, self.y, self.e = x, y, float(exponent)
        self.pchip = PchipInterpolator(x, y, extrapolate=False)
        self.anti = self.pchip.antiderivative()
        self.table_integral = float(self.anti(x[-1]))

    def __call__(self, t):
        t = np.asarray(t, float)
        x, y, e = self.x, self.y, self.e
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(t > x[-1], y[-1] * (t / x[-1]) ** e, 0.0)
            inside = (t >= x[0]) & (t <= x[-1])
            out = np.where(inside, np.nan_to_num(self.pchip(np.clip(t, x[0], x[-1]))), out)
            if x[0] > 0:
                out = np.where(t < x[0], y[0] * (t / x[0]) ** e, out)
        return out

    def integral(self, t):
        """``int_0^t`` of the extended table for ``t >= 0``."""
        t = np.asarray(t, float)
        x, y, e = self.x, self.y, self.e
        head = y[0] * x[0] / (e + 1) if x[0] > 0 else 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            low = y[0] * x[0] / (e + 1) * (t / x[0]) ** (e + 1) if x[0] > 0 else np.zeros_like(t)
            mid = head + np.nan_to_num(self.anti(np.clip(t, x[0], x[-1])))
            high = head + self.table_integral + y[-1] * x[-1] / (e + 1) * ((t / x[-1]) ** (e + 1) - 1.0)
        out = np.where(t > x[-1], high, mid)
        if x[0] > 0:
            out = np.where(t < x[0], low, out)
        return out


@dataclass(frozen=True)
class PhiModel:
    """Profile of the phi-Laplacian operator.

    Attributes:
        kind: family tag, one of :data:`PHI_KINDS`.
        p: growth exponent, ``> 1``.
        params: family parameters; ``tabulated`` needs ``s`` and ``varphi`` lists.
        c_hat_1: upper bound constant in ``c2 r^(p-1) <= varphi(r) <= c1 r^(p-1)``.
        c_hat_2: lower bound constant.
    """

    kind: str
    p: float
    params: dict = field(default_factory=dict)
    c_hat_1: float | None = None
    c_hat_2: float | None = None

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ModelError(f"unknown phi kind {self.kind!r}; expected one of {PHI_KINDS}")
        if not self.p > 1:
            raise ModelError(f"phi exponent p must exceed 1, got {self.p}")
        if self.kind == "p-laplacian":
            defaults = (1.0, 1.0)
        elif self.kind == "perturbed-p":
            defaults = (1.5, 1.0)
        else:
            lo, hi = fit_bound_constants(self._tab, self.p)
            defaults = (hi, lo)
        if self.c_hat_1 is None:
            object.__setattr__(self, "c_hat_1", defaults[0])
        if self.c_hat_2 is None:
            object.__setattr__(self, "c_hat_2", defaults[1])
        if not (self.c_hat_1 > 0 and self.c_hat_2 > 0):
            raise ModelError("bound constants must be positive")

    @cached_property
    def _tab(self) -> _Tail:
        try:
            s, v = self.params["s"], self.params["varphi"]
        except KeyError as exc:
            raise ModelError("tabulated phi needs params 's' and 'varphi'") from exc
        return _Tail(s, v, self.p - 1.0)

    @property
    def gamma(self) -> float:
        """Conjugate exponent ``p/(p-1)``; ``Phi(varphi^-1(t))`` scales like ``t^gamma``."""
        return self.p / (self.p - 1.0)

    def _varphi_pos(self, s):
        """varphi on ``s >= 0``."""
        p = self.p
        if self.kind == "p-laplacian":
            return s ** (p - 1.0)
        if self.kind == "perturbed-p":
            return s ** (p - 1.0) * (1.0 + 0.5 / (1.0 + s))
        return self._tab(s)

    def phi(self, s):
        """The profile itself, ``varphi(s)/s``; even, undefined (inf or 0) at 0 for p != 2."""
        a = np.abs(_as_array(s))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._varphi_pos(a) / a
        return _unwrap(out, s)

    def varphi(self, s):
        """``phi(|s|) s``, odd; 0 at 0."""
        x = _as_array(s)
        out = np.sign(x) * self._varphi_pos(np.abs(x))
        return _unwrap(out, s)

    def varphi_inverse(self, t, *, tol: float = DEFAULT_XTOL, maxiter: int = DEFAULT_MAXITER):
        """Solve ``varphi(s) = t``; odd in ``t``.

        Closed form for the p-Laplacian. Otherwise a safeguarded Newton
        iteration in ``log s`` (perturbed-p) or bisection on the table.

        Raises:
            RootFindingError: if the monotone search does not converge.
        """
        x = _as_array(t)
        a = np.abs(x)
        q = 1.0 / (self.p - 1.0)
        if self.kind == "p-laplacian":
            s = a**q
        elif self.kind == "perturbed-p":
            s = self._inverse_perturbed(a, tol, maxiter)
        else:
            s = self._inverse_tabulated(a, tol, maxiter)
        out = np.sign(x) * s
        return _unwrap(out, t)

    def _inverse_perturbed(self, a, tol, maxiter):
        a = np.atleast_1d(a)
        out = np.zeros_like(a)
        pos = a > 0
        if not pos.any():
            return out.reshape(np.shape(a))
        t = a[pos]
        pm1 = self.p - 1.0
        lt = np.log(t)
        # bracket in y = log s from the two-sided power bound
        ylo = (lt - math.log(1.5)) / pm1
        yhi = lt / pm1
        # power-law guess corrected once by the weight at that guess
        y = np.clip((lt - np.log1p(0.5 / (1.0 + np.exp(yhi)))) / pm1, ylo, yhi)
        for _ in range(maxiter):
            es = np.exp(y)
            w = 1.0 + 0.5 / (1.0 + es)
            g = pm1 * y + np.log(w) - lt
            dg = pm1 - (0.5 * es / (1.0 + es) ** 2) / w
            ylo = np.where(g < 0, y, ylo)
            yhi = np.where(g > 0, y, yhi)
            step = g / dg
            ynew = y - step
            outside = (ynew <= ylo) | (ynew >= yhi)
            ynew = np.where(outside, 0.5 * (ylo + yhi), ynew)
            if np.all(np.abs(ynew - y) <= tol * 1e-2):
                y = ynew
                break
            y = ynew
        else:
            raise RootFindingError("varphi_inverse (perturbed-p): Newton did not converge", np.exp(ylo), np.exp(yhi))
        out[pos] = np.exp(y)
        return out

    def _inverse_tabulated(self, a, tol, maxiter):
        a = np.atleast_1d(a)
        q = 1.0 / (self.p - 1.0)
        lo = np.zeros_like(a)
        hi = np.maximum((a / self.c_hat_2) ** q, 1e-300) * 1.01 + 1e-300
        g = lambda s: self._varphi_pos(s) - a  # noqa: E731
        return np.asarray(bisect(g, lo, hi, xtol=tol * 1e-2, maxiter=maxiter + 900))

    def big_phi(self, t):
        """``Phi(t) = int_0^t varphi``; even in ``t``."""
        a = np.abs(_as_array(t))
        p = self.p
        if self.kind == "p-laplacian":
            out = a**p / p
        elif self.kind == "perturbed-p":
            out = a**p / p * (1.0 + 0.5 * hyp2f1(1.0, p, p + 1.0, -a))
        else:
            out = self._tab.integral(a)
        return _unwrap(out, t)

    def psi(self, t):
        """``int_0^t varphi^-1``, via ``t varphi^-1(t) - Phi(varphi^-1(t))``; even."""
        s = self.varphi_inverse(t)
        return _unwrap(_as_array(t) * s - self.big_phi(s), t)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p": self.p, "params": dict(self.params),
                "c_hat_1": self.c_hat_1, "c_hat_2": self.c_hat_2}

    @classmethod
    def from_dict(cls, d: dict) -> "PhiModel":
        return cls(kind=d["kind"], p=float(d["p"]), params=dict(d.get("params", {})),
                   c_hat_1=d.get("c_hat_1"), c_hat_2=d.get("c_hat_2"))


def fit_bound_constants(varphi_pos, p: float, grid=FIT_GRID) -> tuple[float, float]:
    """Greatest lower and least upper ratio ``varphi(r)/r^(p-1)`` over ``grid``."""
    ratio = varphi_pos(grid) / grid ** (p - 1.0)
    return float(ratio.min()), float(ratio.max())


@dataclass(frozen=True)
class ReactionModel:
    """Semipositone nonlinearity ``f`` on ``[0, inf)``.

    ``u0`` (zero of ``f``), ``U0`` (positive zero of ``F``) and ``k`` (growth
    constant) are computed on first access and cached.
    """

    kind: str
    alpha: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in REACTION_KINDS:
            raise ModelError(f"unknown reaction kind {self.kind!r}; expected one of {REACTION_KINDS}")
        if self.kind == "linear-shift":
            object.__setattr__(self, "alpha", 1.0)
        if self.kind == "power-shift" and "beta" not in self.params:
            raise ModelError("power-shift reaction needs params.beta")
        if not self.alpha > 0:
            raise ModelError(f"alpha must be positive, got {self.alpha}")

    @cached_property
    def _tab(self) -> _Tail:
        try:
            u, fv = self.params["u"], self.params["f"]
        except KeyError as exc:
            raise ModelError("tabulated reaction needs params 'u' and 'f'") from exc
        if u[0] != 0:
            raise ModelError("tabulated reaction samples must start at u = 0")
        return _Tail(u, fv, self.alpha)

    def f(self, u):
        """``f(u)`` for ``u >= 0``; negative arguments are clamped to 0."""
        x = np.maximum(_as_array(u), 0.0)
        if self.kind == "power-shift":
            out = x**self.alpha - self.params["beta"]
        elif self.kind == "linear-shift":
            out = x - 1.0
        else:
            out = self._tab(x)
        return _unwrap(out, u)

    def big_f(self, u):
        """``F(u) = int_0^u f``.

        Raises:
            ModelError: for ``u < 0`` (f lives on ``[0, inf)``).
        """
        x = _as_array(u)
        if np.any(x < 0):
            raise ModelError("F is defined on [0, inf) only")
        return self.big_f_extended(u)

    def big_f_extended(self, u):
        """``F`` continued to ``u < 0`` by the constant extension ``f(u) = f(0)``."""
        x = _as_array(u)
        pos = np.maximum(x, 0.0)
        if self.kind == "power-shift":
            out = pos ** (self.alpha + 1) / (self.alpha + 1) - self.params["beta"] * pos
        elif self.kind == "linear-shift":
            out = 0.5 * pos**2 - pos
        else:
            out = self._tab.integral(pos)
        out = out + np.minimum(x, 0.0) * self.f(0.0)
        return _unwrap(out, u)

    @cached_property
    def u0(self) -> float:
        return find_u0(self)

    @cached_property
    def U0(self) -> float:
        return find_U0(self)

    @cached_property
    def k(self) -> float:
        return growth_constant(self)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ReactionModel":
        kind = d["kind"]
        alpha = d.get("alpha", 1.0 if kind == "linear-shift" else None)
        if alpha is None:
            raise ModelError(f"reaction kind {kind!r} needs alpha")
        return cls(kind=kind, alpha=float(alpha), params=dict(d.get("params", {})))


def find_u0(model: ReactionModel, *, tol: float = DEFAULT_XTOL, maxiter: int = DEFAULT_MAXITER) -> float:
    """Unique zero of ``f``, by bisection on an expanding bracket ``[0, 2^j]``."""
    f0 = model.f(0.0)
    if not f0 < 0:
        raise HypothesisViolation(f"f(0) = {f0} is not negative (not semipositone)")
    try:
        b = expand_bracket_up(model.f, 1.0)
    except RootFindingError as exc:
        raise HypothesisViolation(f"f never turns positive: {exc}") from exc
    if model.f(b) == 0:
        return b
    lo = b / 2 if b > 1 else 0.0
    return bisect(model.f, lo, b, xtol=tol * 1e-3, maxiter=maxiter)


def find_U0(model: ReactionModel, *, tol: float = DEFAULT_XTOL, maxiter: int = DEFAULT_MAXITER) -> float:
    """Unique zero of ``F`` on ``(u0, inf)``."""
    u0 = model.u0
    try:
        b = expand_bracket_up(model.big_f, 2.0 * u0)
    except RootFindingError as exc:
        raise HypothesisViolation(f"F never turns positive: {exc}") from exc
    if model.big_f(b) == 0:
        return b
    lo = max(u0, b / 2)
    U0 = bisect(model.big_f, lo, b, xtol=tol * 1e-3, maxiter=maxiter)
    if not U0 > u0:
        raise HypothesisViolation(f"zero of F ({U0}) does not exceed zero of f ({u0})")
    return U0


def growth_constant(
    model: ReactionModel,
    t_min: float | None = None,
    t_max: float | None = None,
    n: int = GROWTH_SAMPLES,
) -> float:
    """Grid infimum of ``f(t)/t^alpha`` over ``[(u0+U0)/2, 1e3*U0]``.

    Raises:
        HypothesisViolation: if the infimum is not positive.
    """
    if t_min is None:
        t_min = 0.5 * (model.u0 + model.U0)
    if t_max is None:
        t_max = GROWTH_TMAX_FACTOR * model.U0
    t = np.geomspace(t_min, t_max, n)
    k = float(np.min(model.f(t) / t**model.alpha))
    if not k > 0:
        raise HypothesisViolation(f"growth constant inf f(t)/t^alpha = {k} is not positive")
    return k


def critical_exponent(N: int, p: float) -> float:
    """``Np/(N-p)`` when ``N > p``, else infinity."""
    return N * p / (N - p) if N > p else math.inf


@dataclass(frozen=True)
class ProblemInstance:
    """Ball problem in dimension ``N`` at parameter ``lam``."""

    N: int
    lam: float
    phi: PhiModel
    reaction: ReactionModel

    def __post_init__(self):
        if int(self.N) != self.N or self.N <= 1:
            raise ModelError(f"dimension N must be an integer > 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not self.lam > 0:
            raise ModelError(f"lambda must be positive, got {self.lam}")
        lo, hi = self.phi.p - 1.0, critical_exponent(self.N, self.phi.p)
        if not lo < self.reaction.alpha < hi:
            warnings.warn(
                f"alpha = {self.reaction.alpha} outside the growth window ({lo}, {hi})",
                stacklevel=2,
            )

    def with_lambda(self, lam: float) -> "ProblemInstance":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return ProblemInstance(self.N, lam, self.phi, self.reaction)

    def to_dict(self) -> dict[str, Any]:
        return {"phi": self.phi.to_dict(), "reaction": self.reaction.to_dict(), "N": self.N, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        try:
            return cls(N=d["N"], lam=float(d["lambda"]), phi=PhiModel.from_dict(d["phi"]),
                       reaction=ReactionModel.from_dict(d["reaction"]))
        except KeyError as exc:
            raise ModelError(f"problem definition is missing key {exc}") from exc


# module-level spellings of the model methods

def varphi(model: PhiModel, s):
    return model.varphi(s)


def varphi_inverse(model: PhiModel, t):
    return model.varphi_inverse(t)


def big_phi(model: PhiModel, t):
    return model.big_phi(t)


def big_f(model: ReactionModel, u):
    return model.big_f(u)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    severity: str = "error"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail, "severity": self.severity}


@dataclass
class ValidationReport:
    checks: list[Check]
    c_hat_fit: tuple[float, float]

    @property
    def ok(self) -> bool:
        """True when every error-severity check passed (warnings do not count)."""
        return all(c.passed for c in self.checks if c.severity == "error")

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "c_hat_fit": {"c_hat_2": self.c_hat_fit[0], "c_hat_1": self.c_hat_fit[1]},
            "checks": [c.to_dict() for c in self.checks],
        }


def _guarded(name: str, fn) -> Check:
    try:
        return fn()
    except (ModelError, RootFindingError) as exc:
        return Check(name, False, f"raised: {exc}")


def validate(instance: ProblemInstance, grid=FIT_GRID) -> ValidationReport:
    """Sample every structural hypothesis on ``phi`` and ``f``; never raises."""
    phi, rx = instance.phi, instance.reaction
    p, N = phi.p, instance.N
    checks: list[Check] = []

    checks.append(Check("instance.N", N > 1, f"N = {N}"))
    checks.append(Check("instance.lambda", instance.lam > 0, f"lambda = {instance.lam}"))

    r = grid
    vp = phi.varphi(r)
    checks.append(Check("phi.p", p > 1, f"p = {p}"))
    odd = np.array_equal(phi.varphi(-r), -vp)
    checks.append(Check("phi.varphi_odd", odd, "varphi(-s) == -varphi(s) on the fit grid"))
    inc = bool(np.all(np.diff(vp) > 0))
    checks.append(Check("phi.varphi_increasing", inc, "strictly increasing on the fit grid"))
    ratio = vp / r ** (p - 1)
    lo_fit, hi_fit = float(ratio.min()), float(ratio.max())
    bound_ok = bool(np.all(phi.c_hat_2 * r ** (p - 1) <= vp * (1 + 1e-12))
                    and np.all(vp <= phi.c_hat_1 * r ** (p - 1) * (1 + 1e-12)))
    checks.append(Check(
        "phi.power_bounds", bound_ok,
        f"c_hat_2={phi.c_hat_2:.17g} <= varphi(r)/r^(p-1) in [{lo_fit:.17g}, {hi_fit:.17g}] <= c_hat_1={phi.c_hat_1:.17g}",
    ))
    Phi = phi.big_phi(r)
    young = bool(np.all(Phi <= r * vp * (1 + 1e-12)))
    checks.append(Check("phi.Phi_le_t_varphi", young, "Phi(t) <= t varphi(t) on the fit grid"))
    if phi.kind == "tabulated":
        checks.append(Check("phi.differentiable", True,
                            "tabulated profile is only piecewise-cubic; differentiability off 0 is approximate",
                            severity="warning"))

    f0 = rx.f(0.0)
    checks.append(Check("reaction.f0_negative", f0 < 0, f"f(0) = {f0:.17g}"))
    checks.append(_guarded("reaction.u0", lambda: Check("reaction.u0", abs(rx.f(rx.u0)) <= 1e-10 * max(1.0, abs(f0)),
                                                         f"u0 = {rx.u0:.17g}, f(u0) = {rx.f(rx.u0):.3g}")))
    checks.append(_guarded("reaction.U0", lambda: Check(
        "reaction.U0", rx.U0 > rx.u0 and abs(rx.big_f(rx.U0)) <= 1e-9 * max(1.0, rx.U0),
        f"U0 = {rx.U0:.17g}, F(U0) = {rx.big_f(rx.U0):.3g}")))

    def _shape_checks():
        t = np.linspace(0.0, 20.0 * rx.U0, 4001)
        ft = rx.f(t)
        mono = bool(np.all(np.diff(ft) >= 0))
        sg = np.sign(ft)
        sg = sg[sg != 0]  # an exact zero on the grid is not a separate change
        changes = int(np.count_nonzero(np.diff(sg) != 0))
        return [Check("reaction.nondecreasing", mono, "f nondecreasing on [0, 20 U0]"),
                Check("reaction.single_zero", changes == 1, f"{changes} sign change(s) of f on [0, 20 U0]")]

    try:
        checks.extend(_shape_checks())
    except (ModelError, RootFindingError) as exc:
        checks.append(Check("reaction.shape", False, f"raised: {exc}"))

    def _growth():
        k = rx.k
        t = np.geomspace(0.5 * (rx.u0 + rx.U0), GROWTH_TMAX_FACTOR * rx.U0, GROWTH_SAMPLES)
        ok = bool(np.all(rx.f(t) >= k * t**rx.alpha * (1 - 1e-12)))
        return Check("reaction.growth", ok and k > 0, f"k = {k:.17g}")

    checks.append(_guarded("reaction.growth", _growth))

    pstar = critical_exponent(N, p)
    window = p - 1 < rx.alpha < pstar
    checks.append(Check("instance.alpha_window", window,
                        f"alpha = {rx.alpha} {'inside' if window else 'outside'} ({p - 1}, {pstar})",
                        severity="warning"))
    return ValidationReport(checks, (lo_fit, hi_fit))

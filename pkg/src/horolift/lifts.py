"""Horocycle lifts x -> (1, xi(x)) n(x) and the densities they are averaged
against.

A lift is described by ``xi = (xi1, xi2)`` together with
``Xi(x) = x*xi1(x) + xi2(x)``, whose curvature decides both the rate and
the obstruction: the lift is D-nice when
``C1 |x - x0|**(D-2) <= |Xi''(x)| <= C2 |x - x0|**(D-2)`` on the density
support, and rationally linear when ``Xi`` agrees with a rational affine
function on a set of positive measure.

All callables are vectorized over numpy arrays. The preset callables are
module-level classes so lifts can be shipped to worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate

GRID_POINTS = 10_000
RELATIVE_SLACK = 1e-6
LINEAR_TOL = 1e-12
RATIONAL_TOL = 1e-9
MAX_DENOMINATOR = 10_000

Evaluable = Callable[[np.ndarray], np.ndarray]


# --------------------------------------------------------------------------
# densities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DensitySpec:
    rho: Evaluable
    rho1d: Evaluable
    support: tuple[float, float]
    name: str = "custom"

    def grid(self, points: int = GRID_POINTS) -> np.ndarray:
        a, b = self.support
        return np.linspace(a, b, points)


class _Bump:
    """x -> exp(-1/(1 - (2x+1)**2)) on (-1, 0), scaled to integral 1."""

    def __init__(self):
        self.scale = 1.0 / _bump_mass()

    @staticmethod
    def _t(x):
        return 2.0 * np.asarray(x, dtype=float) + 1.0

    def value(self, x):
        t = self._t(x)
        inside = np.abs(t) < 1.0
        out = np.zeros_like(t)
        ti = t[inside]
        out[inside] = self.scale * np.exp(-1.0 / (1.0 - ti * ti))
        return out

    def derivative(self, x):
        t = self._t(x)
        inside = np.abs(t) < 1.0
        out = np.zeros_like(t)
        ti = t[inside]
        one = 1.0 - ti * ti
        out[inside] = self.scale * np.exp(-1.0 / one) * (-4.0 * ti / (one * one))
        return out


@lru_cache(maxsize=None)
def _bump_mass() -> float:
    # in the variable t = 2x + 1
    val, _ = integrate.quad(
        lambda t: math.exp(-1.0 / (1.0 - t * t)) if abs(t) < 1 else 0.0, -1.0, 1.0,
        epsabs=1e-15, epsrel=1e-13, limit=200,
    )
    return 0.5 * val


def default_density() -> DensitySpec:
    bump = _Bump()
    return DensitySpec(bump.value, bump.derivative, (-1.0, 0.0), name="bump")


def density_integral(density: DensitySpec) -> float:
    a, b = density.support
    val, _ = integrate.quad(lambda x: float(density.rho(np.array([x]))[0]), a, b,
                            epsabs=1e-13, epsrel=1e-13, limit=400)
    return val


def sobolev_norm(density: DensitySpec, k: int, p: float = 1.0) -> float:
    """``sum_{s<=k} ||rho^(s)||_{L^p}``; the second derivative, when needed,
    is a central difference of ``rho1d``."""
    if k not in (0, 1, 2):
        raise ValueError("sobolev_norm supports k in {0, 1, 2}")
    h = 1e-6

    def second(x):
        return (density.rho1d(x + h) - density.rho1d(x - h)) / (2 * h)

    funcs = [density.rho, density.rho1d, second][: k + 1]
    a, b = density.support
    total = 0.0
    for g in funcs:
        val, _ = integrate.quad(lambda x: abs(float(g(np.array([x]))[0])) ** p, a, b,
                                epsabs=1e-12, epsrel=1e-10, limit=400)
        total += val ** (1.0 / p)
    return total


# --------------------------------------------------------------------------
# lifts
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LiftSpec:
    xi1: Evaluable
    xi2: Evaluable
    Xi: Evaluable
    Xi2d: Evaluable
    D: float
    x0: float
    C1: float
    C2: float
    supXi2d: float
    name: str = field(default="custom")

    @property
    def C(self) -> float:
        """``max(C1**-1/2, C2**1/2)``; infinite for lifts with ``C1 == 0``."""
        lo = math.inf if self.C1 <= 0 else self.C1 ** -0.5
        return max(lo, math.sqrt(self.C2))

    def xi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(self.xi1(x), x.shape),
                         np.broadcast_to(self.xi2(x), x.shape)], axis=-1)


class _Poly:
    """Polynomial in x with the given coefficients (lowest degree first)."""

    def __init__(self, *coeffs: float):
        self.coeffs = coeffs

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out


class _PowerXi:
    """Derivatives of |x - x0|**D / (D (D - 1)); ``order`` selects which one."""

    def __init__(self, D: float, x0: float, order: int):
        self.D, self.x0, self.order = D, x0, order

    def __call__(self, x):
        t = np.asarray(x, dtype=float) - self.x0
        D = self.D
        if self.order == 0:
            return np.abs(t) ** D / (D * (D - 1))
        if self.order == 1:
            return np.sign(t) * np.abs(t) ** (D - 1) / (D - 1)
        return np.abs(t) ** (D - 2)


class _Legendre:
    """xi2 = Xi - x Xi' for a Xi and its derivative."""

    def __init__(self, Xi: Evaluable, Xi1d: Evaluable):
        self.Xi, self.Xi1d = Xi, Xi1d

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.Xi(x) - x * self.Xi1d(x)


def _curvature_ratio(Xi2d, D, x0, xs):
    w = np.abs(xs - x0) ** (D - 2)
    keep = w > 0
    return np.abs(np.asarray(Xi2d(xs), dtype=float)[keep]) / w[keep], xs[keep]


def _sign_change_away_from_x0(Xi2d, x0, xs) -> bool:
    vals = np.asarray(Xi2d(xs), dtype=float)
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in flips:
        if not (xs[i] <= x0 <= xs[i + 1]):
            return True
    return False


def make_from_Xi(Xi: Evaluable, Xi1d: Evaluable, Xi2d: Evaluable, D: float,
                 x0: float, density: Optional[DensitySpec] = None,
                 name: str = "custom") -> LiftSpec:
    """Build a lift from ``Xi`` with the split ``xi1 = Xi'``,
    ``xi2 = Xi - x Xi'``.

    ``C1`` and ``C2`` are grid extrema of ``|Xi''| / |x - x0|**(D-2)`` on the
    density support; they are estimates, not certified bounds. Raises
    ``ValueError`` when ``D < 2`` or when the lower bound fails (``Xi''``
    vanishing or changing sign away from ``x0``).
    """
    if D < 2:
        raise ValueError(f"D must be >= 2, got {D}")
    density = density or default_density()
    xs = density.grid()
    ratio, _ = _curvature_ratio(Xi2d, D, x0, xs)
    if ratio.size == 0:
        raise ValueError("density support degenerate for the curvature grid")
    C1, C2 = float(ratio.min()), float(ratio.max())
    if C1 <= LINEAR_TOL or _sign_change_away_from_x0(Xi2d, x0, xs):
        raise ValueError("Xi'' vanishes or changes sign on the density support; "
                         "the lift is not D-nice")
    sup = float(np.abs(np.asarray(Xi2d(xs), dtype=float)).max())
    return LiftSpec(Xi1d, _Legendre(Xi, Xi1d), Xi, Xi2d, float(D), float(x0),
                    C1, C2, sup, name=name)


def quadratic_lift() -> LiftSpec:
    """xi(x) = (x/2, -x**2/4), so Xi(x) = x**2/4 and Xi'' = 1/2."""
    return LiftSpec(_Poly(0.0, 0.5), _Poly(0.0, 0.0, -0.25), _Poly(0.0, 0.0, 0.25),
                    _Poly(0.5), 2.0, 0.0, 0.5, 0.5, 0.5, name="quadratic")


def power_lift(D: float, x0: float = 0.0,
               density: Optional[DensitySpec] = None) -> LiftSpec:
    """Xi(x) = |x - x0|**D / (D(D-1)), for which C1 = C2 = 1."""
    if D < 2:
        raise ValueError(f"D must be >= 2, got {D}")
    density = density or default_density()
    Xi = _PowerXi(D, x0, 0)
    Xi1d = _PowerXi(D, x0, 1)
    Xi2d = _PowerXi(D, x0, 2)
    sup = float(np.abs(Xi2d(density.grid())).max())
    tag = f"power:{D:g}" if x0 == 0 else f"power:{D:g}:{x0:g}"
    return LiftSpec(Xi1d, _Legendre(Xi, Xi1d), Xi, Xi2d, float(D), float(x0),
                    1.0, 1.0, sup, name=tag)


def linear_lift(a1: float, a2: float) -> LiftSpec:
    """Constant lift xi = (a1, a2); Xi(x) = a1 x + a2 is affine."""
    return LiftSpec(_Poly(a1), _Poly(a2), _Poly(a2, a1), _Poly(0.0), 2.0, 0.0,
                    0.0, 0.0, 0.0, name=f"linear:{a1:g},{a2:g}")


def zero_lift() -> LiftSpec:
    lift = linear_lift(0.0, 0.0)
    return LiftSpec(lift.xi1, lift.xi2, lift.Xi, lift.Xi2d, 2.0, 0.0, 0.0, 0.0, 0.0,
                    name="zero")


def lift_from_string(spec: str) -> LiftSpec:
    """Parse ``quadratic``, ``zero``, ``power:D[:x0]`` or ``linear:a1,a2``."""
    kind, _, rest = spec.strip().partition(":")
    if kind == "quadratic" and not rest:
        return quadratic_lift()
    if kind == "zero" and not rest:
        return zero_lift()
    if kind == "power" and rest:
        parts = rest.split(":")
        if len(parts) > 2:
            raise ValueError(f"bad power lift {spec!r}")
        D = float(parts[0])
        x0 = float(parts[1]) if len(parts) == 2 else 0.0
        return power_lift(D, x0)
    if kind == "linear" and rest:
        parts = rest.split(",")
        if len(parts) != 2:
            raise ValueError(f"bad linear lift {spec!r}")
        return linear_lift(float(parts[0]), float(parts[1]))
    raise ValueError(f"unknown lift preset {spec!r}")


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------

class DNiceReport(NamedTuple):
    C1: float
    C2: float
    C: float
    supXi2d: float
    passed: bool


def check_D_nice(lift: LiftSpec, density: Optional[DensitySpec] = None) -> DNiceReport:
    """Grid check of the D-nice pinching on the density support.

    Reported ``C1``/``C2`` are the grid extrema; ``passed`` says whether the
    lift's declared constants bracket the curvature at every grid point
    (relative slack 1e-6) with a positive lower bound and no sign change of
    ``Xi''`` away from ``x0``.
    """
    density = density or default_density()
    xs = density.grid()
    ratio, kept = _curvature_ratio(lift.Xi2d, lift.D, lift.x0, xs)
    sup = float(np.abs(np.asarray(lift.Xi2d(xs), dtype=float)).max())
    if ratio.size == 0:
        return DNiceReport(0.0, 0.0, math.inf, sup, False)
    C1, C2 = float(ratio.min()), float(ratio.max())
    C = max(math.inf if C1 <= 0 else C1 ** -0.5, math.sqrt(C2))
    passed = (
        lift.C1 > 0
        and C1 > LINEAR_TOL
        and bool(np.all(ratio >= lift.C1 * (1 - RELATIVE_SLACK)))
        and bool(np.all(ratio <= lift.C2 * (1 + RELATIVE_SLACK)))
        and not _sign_change_away_from_x0(lift.Xi2d, lift.x0, xs)
    )
    return DNiceReport(C1, C2, C, sup, passed)


def lift_consistency(lift: LiftSpec, density: Optional[DensitySpec] = None) -> float:
    """max |Xi(x) - x xi1(x) - xi2(x)| over the density grid."""
    xs = (density or default_density()).grid()
    return float(np.abs(lift.Xi(xs) - xs * lift.xi1(xs) - lift.xi2(xs)).max())


class RationalLinearity(NamedTuple):
    verdict: str  # "rationally-linear" | "irrational-linear-segment" | "nonlinear"
    interval: Optional[tuple[float, float]]
    alpha: Optional[float]
    beta: Optional[float]


def _rational(value: float) -> bool:
    frac = Fraction(value).limit_denominator(MAX_DENOMINATOR)
    return abs(float(frac) - value) <= RATIONAL_TOL


def detect_rational_linear(lift: LiftSpec,
                           density: Optional[DensitySpec] = None) -> RationalLinearity:
    """Heuristic test for affine pieces of ``Xi`` on the density support.

    Runs of at least two grid points where ``|Xi''| < 1e-12`` are treated
    as affine segments; the local slope ``xi`` pair is read off from a
    secant and compared against rationals with denominator <= 10**4.
    """
    xs = (density or default_density()).grid()
    flat = np.abs(np.asarray(lift.Xi2d(xs), dtype=float)) < LINEAR_TOL
    runs = []
    i = 0
    while i < len(xs):
        if flat[i]:
            j = i
            while j + 1 < len(xs) and flat[j + 1]:
                j += 1
            if j > i:
                runs.append((i, j))
            i = j + 1
        else:
            i += 1
    if not runs:
        return RationalLinearity("nonlinear", None, None, None)
    first = None
    for i, j in runs:
        a, b = xs[i], xs[j]
        Xa, Xb = float(lift.Xi(np.array([a]))[0]), float(lift.Xi(np.array([b]))[0])
        alpha = (Xb - Xa) / (b - a)
        beta = Xa - alpha * a
        if _rational(alpha) and _rational(beta):
            return RationalLinearity("rationally-linear", (float(a), float(b)), alpha, beta)
        if first is None:
            first = ((float(a), float(b)), alpha, beta)
    return RationalLinearity("irrational-linear-segment", *first)

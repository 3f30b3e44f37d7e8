"""Averages of Siegel-transform test functions along lifted horocycles.

``nu_y(f)`` integrates ``f((1, xi(x)) n(x) a(y))`` against a density in x;
as ``y -> 0`` it should approach the Haar mean of f, which for the Siegel
transform of ``psi`` is ``int psi``. The driver below measures that error
over a geometric grid of y and fits its decay exponent.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, TextIO

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._io import write_csv, write_json
from ._validation import check_int, check_positive, check_vector
from .fourier import SiegelTestFn
from .lifts import DensitySpec, LiftSpec, default_density

DEFAULT_TOL = 1e-9
MAX_PANELS = 2_000_000
PANEL_CHUNK = 4096
# relative evaluation noise of lattice sums (rounding in the reduced basis);
# panels whose Kronrod-Gauss gap is below it are accepted
NOISE_FLOOR = 1e-10
MC_BLOCK = 10_000
EQUIDIST_HEADER = ("y", "nu", "mu_ref", "abs_err")

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
GK_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
_G_INDEX = np.array([1, 3, 5, 7, 9, 11, 13])
GAUSS_WEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])


class QuadratureError(RuntimeError):
    pass


def adaptive_gk15(func: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                  tol: float = DEFAULT_TOL, max_width: Optional[float] = None,
                  max_panels: int = MAX_PANELS) -> tuple[float, float]:
    """Globally adaptive 7/15-point Gauss-Kronrod quadrature.

    ``func`` is called on flat arrays of nodes (one call per refinement
    round). Panels start no wider than ``max_width`` and are bisected until
    the Kronrod-Gauss difference on each is below ``tol * width / (b - a)``
    (or below the evaluation noise floor relative to the panel's values).
    Returns ``(value, error estimate)``.
    """
    if not b > a:
        raise ValueError("need b > a")
    L = b - a
    count = 1 if max_width is None else max(1, math.ceil(L / max_width))
    edges = np.linspace(a, b, count + 1)
    lo, hi = edges[:-1], edges[1:]
    total, err_total = 0.0, 0.0
    while lo.size:
        if lo.size > max_panels:
            raise QuadratureError(f"adaptive quadrature needs more than {max_panels} panels")
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * GK_NODES[None, :]
        fx = np.empty(x.shape)
        for s in range(0, lo.size, PANEL_CHUNK):
            part = x[s:s + PANEL_CHUNK]
            fx[s:s + PANEL_CHUNK] = np.asarray(func(part.ravel()), dtype=float).reshape(part.shape)
        kron = half * (fx @ GK_WEIGHTS)
        gauss = half * (fx[:, _G_INDEX] @ GAUSS_WEIGHTS)
        err = np.abs(kron - gauss)
        floor = NOISE_FLOOR * np.max(np.abs(fx), axis=1)
        done = err <= np.maximum(tol / L, floor) * (hi - lo)
        if np.any(hi[~done] - lo[~done] < 1e-15 * L):
            raise QuadratureError("adaptive quadrature stalled at machine resolution")
        total += float(np.sum(kron[done]))
        err_total += float(np.sum(err[done]))
        lo, hi, mid = lo[~done], hi[~done], mid[~done]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    return total, err_total


# --------------------------------------------------------------------------
# horocycle averages
# --------------------------------------------------------------------------

def horocycle_points(lift: LiftSpec, x: np.ndarray, y: float) -> tuple[np.ndarray, np.ndarray]:
    """Matrix and translation parts of ``(1, xi(x)) n(x) a(y)`` for an array x."""
    x = np.asarray(x, dtype=float)
    s = math.sqrt(y)
    M = np.zeros((x.size, 2, 2))
    M[:, 0, 0] = s
    M[:, 0, 1] = x / s
    M[:, 1, 1] = 1.0 / s
    xi = lift.xi(x)
    trans = np.stack([xi[:, 0] * s, (xi[:, 0] * x + xi[:, 1]) / s], axis=1)
    return M, trans


def _check_y(y: float) -> float:
    y = float(y)
    if not 0 < y < 1:
        raise ValueError(f"y must lie in (0, 1), got {y}")
    return y


def nu_y(f: SiegelTestFn, lift: LiftSpec, density: DensitySpec, y: float,
         tol: float = DEFAULT_TOL, reduce: bool = True) -> float:
    """``int f((1, xi(x)) n(x) a(y)) rho(x) dx`` over the support of rho."""
    y = _check_y(y)

    def integrand(x):
        M, trans = horocycle_points(lift, x, y)
        return f.evaluate(M, trans, reduce=reduce) * density.rho(x)

    a, b = density.support
    return adaptive_gk15(integrand, a, b, tol=tol, max_width=y / 4)[0]


def main_term(f: SiegelTestFn, density: DensitySpec, y: float,
              tol: float = DEFAULT_TOL) -> float:
    """``int tilde f_0(n(x) a(y)) rho(x) dx``: the horocycle average of the
    torus mean of f."""
    y = _check_y(y)

    def integrand(x):
        M, _ = horocycle_points(_NULL_LIFT, x, y)
        return f.torus_mean(M) * density.rho(x)

    a, b = density.support
    return adaptive_gk15(integrand, a, b, tol=tol, max_width=y / 4)[0]


class _NullLift:
    @staticmethod
    def xi(x):
        return np.zeros((np.size(x), 2))


_NULL_LIFT = _NullLift()


# --------------------------------------------------------------------------
# Monte Carlo reference
# --------------------------------------------------------------------------

def sample_haar(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``n`` Haar-random points of Y as ``(M, x)`` with M reduced.

    X-part by rejection from the strip ``|u| <= 1/2, v >= sqrt(3)/2`` with
    density ``du dv / v**2``, ``theta`` uniform; torus part uniform.
    """
    us, vs = [], []
    got = 0
    while got < n:
        m = 2 * (n - got) + 16
        u = rng.random(m) - 0.5
        v = (math.sqrt(3) / 2) / (1.0 - rng.random(m))
        keep = u * u + v * v >= 1.0
        us.append(u[keep])
        vs.append(v[keep])
        got += int(keep.sum())
    u = np.concatenate(us)[:n]
    v = np.concatenate(vs)[:n]
    theta = (rng.random(n) - 0.5) * math.pi
    sv = np.sqrt(v)
    c, s = np.cos(theta), np.sin(theta)
    M = np.empty((n, 2, 2))
    M[:, 0, 0] = sv * c + u / sv * s
    M[:, 0, 1] = -sv * s + u / sv * c
    M[:, 1, 0] = s / sv
    M[:, 1, 1] = c / sv
    xi = rng.random((n, 2))
    return M, np.einsum("ni,nij->nj", xi, M)


def _mc_block(args) -> tuple[float, float, int]:
    f, seed, index, n = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    M, x = sample_haar(n, rng)
    vals = f.evaluate(M, x, reduce=False)
    return float(vals.sum()), float(np.sum(vals * vals)), n


def mu_Y_reference(f: SiegelTestFn, samples: int, seed: int,
                   workers: int = 1) -> tuple[float, float]:
    """Monte Carlo mean of f over Y and its standard error.

    Samples are drawn in fixed blocks, each with its own seed stream, so the
    result does not depend on ``workers``.
    """
    samples = check_int(samples, "samples", min_value=1000)
    sizes = [MC_BLOCK] * (samples // MC_BLOCK)
    if samples % MC_BLOCK:
        sizes.append(samples % MC_BLOCK)
    jobs = [(f, seed, i, n) for i, n in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_mc_block, jobs))
    else:
        parts = [_mc_block(j) for j in jobs]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(var / samples)


# --------------------------------------------------------------------------
# decay fits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    rsquared: float
    points: tuple = ()
    dropped: int = 0

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "rsquared": self.rsquared, "dropped": self.dropped}


def decay_fit(points: Sequence[tuple[float, float]]) -> DecayFit:
    """Least-squares line through ``(log y, log err)``; non-positive errors
    are dropped with a warning."""
    pts = [(float(y), float(e)) for y, e in points]
    kept = [(y, e) for y, e in pts if e > 0 and y > 0]
    dropped = len(pts) - len(kept)
    if dropped:
        warnings.warn(f"decay_fit: dropped {dropped} point(s) with zero error", RuntimeWarning)
    if len(kept) < 2:
        raise ValueError("decay_fit needs at least two points with positive error")
    ly = np.log([p[0] for p in kept])
    le = np.log([p[1] for p in kept])
    slope, intercept = np.polyfit(ly, le, 1)
    resid = le - (slope * ly + intercept)
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return DecayFit(float(slope), float(intercept), min(r2, 1.0), tuple(kept), dropped)


class DecayRateEstimator(RegressorMixin, BaseEstimator):
    """Power-law fit ``err ~ exp(intercept) * y**slope``.

    ``fit(y, err)`` takes 1-D arrays; ``predict`` returns fitted errors.
    """

    def fit(self, y, err):
        y = check_vector(y, "y", positive=True)
        err = check_vector(err, "err")
        if y.shape != err.shape:
            raise ValueError("y and err must have the same length")
        fit = decay_fit(list(zip(y, err)))
        self.slope_ = fit.slope
        self.intercept_ = fit.intercept
        self.rsquared_ = fit.rsquared
        self.n_dropped_ = fit.dropped
        return self

    def predict(self, y):
        check_is_fitted(self)
        y = check_vector(y, "y", positive=True)
        return np.exp(self.intercept_) * y**self.slope_


# --------------------------------------------------------------------------
# experiment driver
# --------------------------------------------------------------------------

def parse_y_grid(spec: str) -> tuple[float, float, int]:
    """``geom:ymin,ymax,count``."""
    kind, _, rest = spec.partition(":")
    parts = rest.split(",")
    if kind != "geom" or len(parts) != 3:
        raise ValueError(f"bad y grid {spec!r}; expected geom:ymin,ymax,count")
    return float(parts[0]), float(parts[1]), int(parts[2])


@dataclass(frozen=True)
class ExperimentConfig:
    lift: LiftSpec
    testfn: SiegelTestFn
    density: DensitySpec = field(default_factory=default_density)
    y_grid: tuple[float, float, int] = (1e-4, 1e-1, 20)
    quad_tol: float = DEFAULT_TOL
    seed: int = 0
    workers: int = 1
    mc_samples: int = 0

    def __post_init__(self):
        ymin, ymax, count = self.y_grid
        if not 0 < ymin < ymax < 1:
            raise ValueError("y grid needs 0 < ymin < ymax < 1")
        if count < 2:
            raise ValueError("y grid needs at least two points")
        check_positive(self.quad_tol, "quad_tol")
        check_int(self.workers, "workers", min_value=1)
        if self.mc_samples and self.mc_samples < 1000:
            raise ValueError("mc_samples must be 0 or at least 1000")

    def ys(self) -> np.ndarray:
        ymin, ymax, count = self.y_grid
        return np.geomspace(ymin, ymax, count)

    def echo(self) -> dict:
        return {"lift": self.lift.name, "psi": self.testfn.spec(), "density": self.density.name,
                "y_grid": list(self.y_grid), "quad_tol": self.quad_tol, "seed": self.seed,
                "mc_samples": self.mc_samples}


@dataclass
class ExperimentResult:
    rows: list
    fit: Optional[DecayFit]
    mu_ref: float
    mc: Optional[tuple[float, float]] = None

    def summary(self, config: Mapping) -> dict:
        out = dict(self.fit.as_dict()) if self.fit else {"slope": None, "intercept": None,
                                                         "rsquared": None}
        out["mu_ref"] = self.mu_ref
        if self.mc is not None:
            out["mc_mean"], out["mc_stderr"] = self.mc
        out["config"] = dict(config)
        return out


def _nu_job(args):
    f, lift, density, y, tol = args
    return nu_y(f, lift, density, y, tol)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """nu_y over the y grid, error against ``int psi`` and the decay fit."""
    ys = cfg.ys()
    jobs = [(cfg.testfn, cfg.lift, cfg.density, float(y), cfg.quad_tol) for y in ys]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            nus = list(ex.map(_nu_job, jobs))
    else:
        nus = [_nu_job(j) for j in jobs]
    mu = cfg.testfn.psi_integral
    rows = [(float(y), nu, mu, abs(nu - mu)) for y, nu in zip(ys, nus)]
    try:
        fit = decay_fit([(r[0], r[3]) for r in rows])
    except ValueError:
        fit = None
    mc = None
    if cfg.mc_samples:
        mc = mu_Y_reference(cfg.testfn, cfg.mc_samples, cfg.seed, cfg.workers)
    return ExperimentResult(rows, fit, mu, mc)


def write_equidist(csv_fh: TextIO, json_fh: Optional[TextIO], result: ExperimentResult,
                   config: Mapping) -> None:
    write_csv(csv_fh, EQUIDIST_HEADER, result.rows, config)
    if json_fh is not None:
        write_json(json_fh, result.summary(config))


class EquidistributionExperiment(BaseEstimator):
    """Estimator front end to :func:`run_experiment`.

    ``fit(ys)`` evaluates nu_y on the given grid and stores ``table_``
    (rows of y, nu, mu_ref, abs_err) and the power-law fit in ``slope_``,
    ``intercept_`` and ``rsquared_``.
    """

    def __init__(self, lift: str = "quadratic", psi: str = "annulus:1,2",
                 quad_tol: float = DEFAULT_TOL, workers: int = 1):
        self.lift = lift
        self.psi = psi
        self.quad_tol = quad_tol
        self.workers = workers

    def fit(self, ys, _unused=None):
        from .fourier import psi_from_string
        from .lifts import lift_from_string

        ys = check_vector(ys, "ys", positive=True)
        if np.any(ys >= 1):
            raise ValueError("y values must lie in (0, 1)")
        lift = lift_from_string(self.lift)
        f = psi_from_string(self.psi)
        density = default_density()
        jobs = [(f, lift, density, float(y), self.quad_tol) for y in ys]
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as ex:
                nus = list(ex.map(_nu_job, jobs))
        else:
            nus = [_nu_job(j) for j in jobs]
        mu = f.psi_integral
        self.table_ = np.array([(y, nu, mu, abs(nu - mu)) for y, nu in zip(ys, nus)])
        est = DecayRateEstimator().fit(self.table_[:, 0], self.table_[:, 3])
        self.slope_, self.intercept_, self.rsquared_ = est.slope_, est.intercept_, est.rsquared_
        return self

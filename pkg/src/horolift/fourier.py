"""Siegel-transform test functions on Y and their torus Fourier coefficients.

For a radial bump ``psi`` on R^2 the function
``f(M, x) = sum_{j in Z^2} psi(j M + x)`` is invariant under ASL(2,Z) and its
torus coefficients have the closed form
``hat_f(M, m) = psi_hat(m M^{-T})``, with ``psi_hat(w) = int psi(p) e(-p.w) dp``.
The quadrature route below never uses that identity, so the two can be
checked against each other.

With ``affine=False`` the translate is ignored and the origin dropped:
``F(M) = sum_{j != 0} psi(j M)`` is a function on X (constant along every
torus fibre).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence, TextIO

import numpy as np
from scipy import integrate, special

from ._io import write_csv
from .geometry import inv2, iwasawa_batch, reduce_fundamental_batch
from .lifts import DensitySpec, sobolev_norm

QUAD_TOL = 1e-9
MAX_LEVEL = 14
LATTICE_POINT_CAP = 10**7
B_CSV_HEADER = ("n", "c", "l", "theta", "y", "re", "im", "bound", "ratio")
A_CSV_HEADER = ("k", "re", "im", "bound", "ratio")


class ConvergenceError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# smoothstep profile
# --------------------------------------------------------------------------

def smoothstep(t, order: int) -> np.ndarray:
    """C^order smoothstep on [0, 1], clamped outside.

    This is the polynomial ``t**(N+1) sum_k C(N+k, k) C(2N+1, N-k) (-t)**k``;
    it equals the regularized incomplete beta function ``I_t(N+1, N+1)``,
    which evaluates it without the cancellation of the alternating sum.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return special.betainc(order + 1, order + 1, t)


@lru_cache(maxsize=64)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class SiegelTestFn:
    """Siegel transform of a radial smoothstep bump.

    ``r0 > 0`` gives an annulus ``r0 <= |p| <= r1`` rising and falling over
    half its width each; ``r0 == 0`` gives a disc that is flat near the
    origin. The amplitude is scaled so that ``int psi = 1`` unless
    ``normalize`` is false.
    """

    r0: float
    r1: float
    order: int = 8
    affine: bool = True
    normalize: bool = True
    amplitude: float = field(init=False)
    psi_integral: float = field(init=False)

    def __post_init__(self):
        if not (0 <= self.r0 < self.r1):
            raise ValueError(f"need 0 <= r0 < r1, got r0={self.r0}, r1={self.r1}")
        if self.order < 1:
            raise ValueError("smoothstep order must be >= 1")
        mass = 2 * math.pi * self._radial_moment(np.array([0.0]), 1.0)[0]
        amp = 1.0 / mass if self.normalize else 1.0
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "psi_integral", amp * mass)

    # -- profile -----------------------------------------------------------
    @property
    def breakpoints(self) -> tuple[float, ...]:
        if self.r0 > 0:
            return (self.r0, 0.5 * (self.r0 + self.r1), self.r1)
        return (0.0, 0.5 * self.r1, self.r1)

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.r0 > 0:
            w = 0.5 * (self.r1 - self.r0)
            t = np.minimum(r - self.r0, self.r1 - r) / w
        else:
            t = (self.r1 - r) / (0.5 * self.r1)
        return smoothstep(t, self.order)

    def psi(self, r) -> np.ndarray:
        """psi as a function of the radius."""
        return self.amplitude * self.profile(r)

    @property
    def psi0(self) -> float:
        return float(self.psi(0.0))

    def _radial_moment(self, rho: np.ndarray, amp: float) -> np.ndarray:
        """``amp * int profile(r) J0(2 pi rho r) r dr`` by piecewise
        Gauss-Legendre, node count scaled with the oscillation."""
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        out = np.zeros(rho.shape)
        bps = self.breakpoints
        for a, b in zip(bps[:-1], bps[1:]):
            n = 24 + int(math.ceil(4 * float(rho.max(initial=0.0)) * (b - a)))
            x, w = _leggauss(min(n, 4000))
            r = 0.5 * (b - a) * x + 0.5 * (a + b)
            vals = self.profile(r) * r * 0.5 * (b - a) * w
            out += special.j0(2 * np.pi * np.outer(rho, r)) @ vals
        return amp * out

    def psi_hat(self, omega) -> np.ndarray:
        """Fourier transform of psi at frequency vectors ``omega`` (..., 2)."""
        omega = np.asarray(omega, dtype=float)
        rho = np.hypot(omega[..., 0], omega[..., 1])
        flat = rho.reshape(-1)
        return (2 * np.pi * self._radial_moment(flat, self.amplitude)).reshape(rho.shape)

    # -- evaluation on Y ---------------------------------------------------
    def evaluate(self, M, x, reduce: bool = True) -> np.ndarray:
        """``f(M, x)`` for stacks ``M`` (N, 2, 2) and ``x`` (N, 2).

        The lattice basis is first reduced to the fundamental domain, which
        keeps the enumeration box tight; ``reduce=False`` enumerates on the
        raw basis (same points, more candidates).
        """
        M = np.asarray(M, dtype=float).reshape(-1, 2, 2)
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        if reduce:
            _, M = reduce_fundamental_batch(M)
        u, v, theta = iwasawa_batch(M)
        return self.evaluate_iwasawa(u, v, theta, x)

    def evaluate_iwasawa(self, u, v, theta, x) -> np.ndarray:
        """``f`` at ``(n(u) a(v) k(theta), x)`` for arrays of coordinates."""
        u, v, theta = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (u, v, theta))
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        # j M + x = (j B + x k(-theta)) k(theta) with B = n(u) a(v); psi is radial
        cos, sin = np.cos(theta), np.sin(theta)
        s1 = x[:, 0] * cos - x[:, 1] * sin
        s2 = x[:, 0] * sin + x[:, 1] * cos
        if not self.affine:
            s1 = np.zeros_like(s1)
            s2 = np.zeros_like(s2)
        sv = np.sqrt(v)
        R = self.r1
        boxes = (2 * R / sv + 1) * (2 * R * sv + 1)
        if float(np.max(boxes, initial=0.0)) > LATTICE_POINT_CAP:
            raise OverflowError("lattice enumeration box exceeds the point cap")
        idx, j1, j2, w1, w2 = ball_points(sv, u / sv, 1.0 / sv, s1, s2, self.r1)
        vals = self.psi(np.hypot(w1, w2))
        if not self.affine:
            vals[(j1 == 0) & (j2 == 0)] = 0.0
        return np.bincount(idx, weights=vals, minlength=u.size)

    def __call__(self, M, x) -> float:
        return float(self.evaluate(np.asarray(M)[None], np.asarray(x)[None])[0])

    def torus_mean(self, M) -> np.ndarray:
        """``tilde f_0(M)``, the average of f over the torus fibre above M."""
        M = np.asarray(M, dtype=float).reshape(-1, 2, 2)
        if self.affine:
            return np.full(M.shape[0], self.psi_integral)
        return self.evaluate(M, np.zeros((M.shape[0], 2)))

    def spec(self) -> str:
        kind = "annulus" if self.r0 > 0 else "disc"
        head = f"{kind}:{self.r0:g},{self.r1:g}" if self.r0 > 0 else f"disc:{self.r1:g}"
        if self.order != 8:
            head += f":{self.order}"
        return head if self.affine else "lattice-" + head


def psi_from_string(spec: str, affine: bool = True) -> SiegelTestFn:
    """Parse ``annulus:r0,r1[:order]`` or ``disc:r1[:order]``; a leading
    ``lattice-`` selects the origin-free lattice sum on X."""
    spec = spec.strip()
    if spec.startswith("lattice-"):
        affine = False
        spec = spec[len("lattice-"):]
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    if not parts or len(parts) > 2:
        raise ValueError(f"bad test-function spec {spec!r}")
    order = int(parts[1]) if len(parts) == 2 else 8
    radii = [float(t) for t in parts[0].split(",")]
    if kind == "annulus" and len(radii) == 2:
        return SiegelTestFn(radii[0], radii[1], order=order, affine=affine)
    if kind == "disc" and len(radii) == 1:
        return SiegelTestFn(0.0, radii[0], order=order, affine=affine)
    raise ValueError(f"bad test-function spec {spec!r}")


# --------------------------------------------------------------------------
# lattice points in a ball
# --------------------------------------------------------------------------

def ball_points(alpha, beta, gamma, s1, s2, R):
    """All ``j`` in Z^2 with ``|j B + s| <= R`` for upper-triangular bases
    ``B = [[alpha, beta], [0, gamma]]`` (alpha, gamma > 0), one basis and
    shift per sample.

    Returns flat arrays ``(sample index, j1, j2, w1, w2)`` where
    ``w = j B + s``.
    """
    alpha, beta, gamma, s1, s2 = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(a, dtype=float)) for a in (alpha, beta, gamma, s1, s2)))
    lo = np.ceil((-R - s1) / alpha).astype(np.int64)
    hi = np.floor((R - s1) / alpha).astype(np.int64)
    cnt = np.maximum(hi - lo + 1, 0)
    idx = np.repeat(np.arange(alpha.size), cnt)
    start = np.repeat(np.cumsum(cnt) - cnt, cnt)
    j1 = np.repeat(lo, cnt) + (np.arange(idx.size) - start)
    w1 = j1 * alpha[idx] + s1[idx]
    half = np.sqrt(np.maximum(R * R - w1 * w1, 0.0))
    base = j1 * beta[idx] + s2[idx]
    g = gamma[idx]
    lo2 = np.ceil((-half - base) / g).astype(np.int64)
    hi2 = np.floor((half - base) / g).astype(np.int64)
    cnt2 = np.maximum(hi2 - lo2 + 1, 0)
    rows = np.repeat(np.arange(idx.size), cnt2)
    start2 = np.repeat(np.cumsum(cnt2) - cnt2, cnt2)
    j2 = np.repeat(lo2, cnt2) + (np.arange(rows.size) - start2)
    w2 = j2 * g[rows] + base[rows]
    return idx[rows], j1[rows], j2, w1[rows], w2


# --------------------------------------------------------------------------
# torus Fourier coefficients
# --------------------------------------------------------------------------

def _trapezoid_level(f: SiegelTestFn, M: np.ndarray, m: Sequence[int], N: int,
                     chunk: int = 2_000_000) -> complex:
    """Tensor trapezoid rule with N nodes per axis for
    ``int_{T^2} f((1, xi) M) e(-m.xi) dxi``.

    Summing f over the N x N grid expands into a sum of ``psi(p M / N)`` over
    all integer ``p`` (every lattice translate of every node), so the nodes
    are enumerated directly in that unfolded form.
    """
    u, v, _ = iwasawa_batch(M[None])
    sv = math.sqrt(float(v[0]))
    # M / N = n(u) a(v) k(theta) / N and psi is radial
    alpha, beta, gamma = sv / N, float(u[0]) / sv / N, 1.0 / sv / N
    R = f.r1
    lo, hi = math.ceil(-R / alpha), math.floor(R / alpha)
    per = max(1, int(chunk / (2 * R / gamma + 1)))
    m1, m2 = int(m[0]), int(m[1])
    total = 0.0 + 0.0j
    for start in range(lo, hi + 1, per):
        p1 = np.arange(start, min(start + per, hi + 1), dtype=np.int64)
        w1 = p1 * alpha
        half = np.sqrt(np.maximum(R * R - w1 * w1, 0.0))
        base = p1 * beta
        lo2 = np.ceil((-half - base) / gamma).astype(np.int64)
        cnt = np.maximum(np.floor((half - base) / gamma).astype(np.int64) - lo2 + 1, 0)
        rows = np.repeat(np.arange(p1.size), cnt)
        offs = np.arange(rows.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        p2 = lo2[rows] + offs
        vals = f.psi(np.hypot(w1[rows], p2 * gamma + base[rows]))
        phase = np.exp(-2j * np.pi * ((m1 * p1[rows] + m2 * p2) % N) / N)
        total += complex(np.dot(vals, phase))
    return total / (N * N)


def hat_f(f: SiegelTestFn, M, m, tol: float = QUAD_TOL, max_level: int = MAX_LEVEL,
          start_level: int = 4) -> complex:
    """Torus coefficient ``int f((1, xi) M) e(-m.xi) dxi`` by the periodic
    trapezoid rule, doubling the grid until successive values differ by less
    than ``tol``."""
    M = np.asarray(M, dtype=float)
    m = tuple(int(t) for t in m)
    if not f.affine:
        # constant along the fibre: the rule is exact at any grid size
        return complex(f.torus_mean(M)[0]) if m == (0, 0) else 0j
    prev = _trapezoid_level(f, M, m, 2**start_level)
    for level in range(start_level + 1, max_level + 1):
        cur = _trapezoid_level(f, M, m, 2**level)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise ConvergenceError(f"torus quadrature not converged at 2**{max_level} nodes per axis")


def hat_f_closed(f: SiegelTestFn, M, m) -> complex:
    """``psi_hat(m M^{-T})``."""
    M = np.asarray(M, dtype=float)
    m = np.asarray(m, dtype=float)
    if not f.affine:
        return complex(f.torus_mean(M)[0]) if not np.any(m) else 0j
    omega = m @ inv2(M).T
    return complex(f.psi_hat(omega[None])[0])


def torus_values(f: SiegelTestFn, M, N: int) -> np.ndarray:
    """``f((1, xi) M)`` on the grid ``xi = (a/N, b/N)``, shape (N, N)."""
    M = np.asarray(M, dtype=float)
    a, b = np.meshgrid(np.arange(N) / N, np.arange(N) / N, indexing="ij")
    xi = np.stack([a.ravel(), b.ravel()], axis=1)
    Ms = np.broadcast_to(M, (xi.shape[0], 2, 2))
    return f.evaluate(Ms, xi @ M).reshape(N, N)


def tilde_f_n(f: SiegelTestFn, M, n: int, method: str = "quadrature",
              tol: float = QUAD_TOL) -> complex:
    if n < 0:
        raise ValueError("n must be >= 0")
    if method == "closed":
        return hat_f_closed(f, M, (n, 0))
    if method == "quadrature":
        return hat_f(f, M, (n, 0), tol=tol)
    raise ValueError(f"unknown method {method!r}")


def transpose_rule_check(f: SiegelTestFn, T, M, m, tol: float = QUAD_TOL) -> float:
    """``|hat_f(T M, m) - hat_f(M, m (T^{-1})^t)|`` by quadrature on both sides."""
    T = np.asarray(T)
    M = np.asarray(M, dtype=float)
    Tinv = np.array([[T[1, 1], -T[0, 1]], [-T[1, 0], T[0, 0]]], dtype=np.int64)
    m2 = np.asarray(m, dtype=np.int64) @ Tinv.T
    return abs(hat_f(f, T @ M, m, tol=tol) - hat_f(f, M, m2, tol=tol))


# --------------------------------------------------------------------------
# coefficients along the horocycle
# --------------------------------------------------------------------------

def _iwasawa_matrix(u, v, theta) -> np.ndarray:
    """Stack of ``n(u) a(v) k(theta)`` for arrays ``u`` and scalars v, theta."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    sv = math.sqrt(v)
    c, s = math.cos(theta), math.sin(theta)
    B = np.empty((u.size, 2, 2))
    B[:, 0, 0] = sv * c + u / sv * s
    B[:, 0, 1] = -sv * s + u / sv * c
    B[:, 1, 0] = s / sv
    B[:, 1, 1] = c / sv
    return B


def b_coeff(f: SiegelTestFn, n: int, c: int, l: int, theta: float, y: float,
            method: str = "closed", tol: float = QUAD_TOL, max_level: int = 16) -> complex:
    """``int_0^1 tilde f_n(u, sin(theta)**2 / (c**2 y), theta) e(-l u) du``.

    Periodic trapezoid in ``u`` with doubling; ``tilde f_n`` itself comes
    from ``method`` (closed form by default).
    """
    if n < 0 or c < 1:
        raise ValueError("need n >= 0 and c >= 1")
    if y <= 0:
        raise ValueError("y must be positive")
    s = math.sin(theta)
    if abs(s) < 1e-12:
        raise ValueError("theta must avoid multiples of pi")
    v = s * s / (c * c * y)

    def level(N):
        u = np.arange(N) / N
        vals = np.array([tilde_f_n(f, B, n, method=method)
                         for B in _iwasawa_matrix(u, v, theta)])
        return complex(np.mean(vals * np.exp(-2j * np.pi * l * u)))

    N = max(8, 4 * abs(l) + 4)
    N = 1 << (N - 1).bit_length()
    prev = level(N)
    while N < 2**max_level:
        N *= 2
        cur = level(N)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise ConvergenceError("u-quadrature for b_l did not converge")


def b_bound(n: int, c: int, l: int, theta: float, y: float, m: int = 2) -> float:
    """Shape of the decay bound for ``b_l`` with unit norm factor:
    ``min(1, a**m)`` for ``l == 0`` and ``l**-2 n**-4 min(1, a**(m-4))``
    otherwise (``m >= 4``), where ``a = |sin theta| / (n c sqrt(y))``."""
    a = abs(math.sin(theta)) / (n * c * math.sqrt(y))
    if l == 0:
        return min(1.0, a**m)
    if m < 4:
        raise ValueError("the l != 0 bound needs m >= 4")
    return l**-2 * n**-4.0 * min(1.0, a ** (m - 4))


def a_coeff(density: DensitySpec, k: int) -> complex:
    """``int rho(u) e(-k u) du`` over the support of rho."""
    a, b = density.support

    def rho(x):
        return float(density.rho(np.array([x]))[0])

    if k == 0:
        re, _ = integrate.quad(rho, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        return complex(re, 0.0)
    w = 2 * math.pi * k
    re, _ = integrate.quad(rho, a, b, weight="cos", wvar=w, epsabs=1e-15, limit=800)
    im, _ = integrate.quad(rho, a, b, weight="sin", wvar=w, epsabs=1e-15, limit=800)
    return complex(re, -im)


def a_bound(density: DensitySpec, k: int, eta: float = 0.5) -> float:
    """``(1 + |k|)**(-1-eta) ||rho||_{W11}**(1-eta) ||rho||_{W21}**eta``."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    w11 = sobolev_norm(density, 1)
    w21 = sobolev_norm(density, 2)
    return (1 + abs(k)) ** (-1 - eta) * w11 ** (1 - eta) * w21**eta


def write_b_table(fh: TextIO, rows: Sequence[tuple], config: Optional[Mapping] = None) -> None:
    """Rows are ``(n, c, l, theta, y, value, bound)``."""
    out = ((n, c, l, th, y, z.real, z.imag, bd, abs(z) / bd if bd > 0 else math.nan)
           for n, c, l, th, y, z, bd in rows)
    write_csv(fh, B_CSV_HEADER, out, config)


def write_a_table(fh: TextIO, rows: Sequence[tuple], config: Optional[Mapping] = None) -> None:
    """Rows are ``(k, value, bound)``."""
    out = ((k, z.real, z.imag, bd, abs(z) / bd) for k, z, bd in rows)
    write_csv(fh, A_CSV_HEADER, out, config)


# --------------------------------------------------------------------------
# norms and decay constants
# --------------------------------------------------------------------------

def _generator_flow(X: int, t: float):
    """``exp(t X_i)`` for the basis X1..X5 as ``(E, s)``."""
    E, s = np.eye(2), np.zeros(2)
    if X == 1:
        E = np.array([[1.0, t], [0.0, 1.0]])
    elif X == 2:
        E = np.array([[1.0, 0.0], [t, 1.0]])
    elif X == 3:
        E = np.diag([math.exp(t), math.exp(-t)])
    elif X == 4:
        s = np.array([t, 0.0])
    elif X == 5:
        s = np.array([0.0, t])
    return E, s


def _derivative(f, M, x, word: tuple, h: float) -> np.ndarray:
    if not word:
        return f.evaluate(M, x)
    E_p, s_p = _generator_flow(word[0], h)
    E_m, s_m = _generator_flow(word[0], -h)
    rest = word[1:]
    plus = _derivative(f, M @ E_p, x @ E_p + s_p, rest, h)
    minus = _derivative(f, M @ E_m, x @ E_m + s_m, rest, h)
    return (plus - minus) / (2 * h)


def cb_norm(f: SiegelTestFn, m: int, M: np.ndarray, x: np.ndarray,
            h: float = 1e-3) -> float:
    """Sampled estimate of ``sum_{deg D <= m} ||D f||_inf`` with D running
    over monomials in X1..X5, by nested central differences at the given
    sample points (stacks ``M`` (N,2,2), ``x`` (N,2))."""
    if m > 3:
        raise ValueError("finite-difference norms are limited to m <= 3")
    from itertools import product as _product

    total = 0.0
    for deg in range(m + 1):
        for word in _product(range(1, 6), repeat=deg):
            total += float(np.max(np.abs(_derivative(f, M, x, word, h))))
    return total

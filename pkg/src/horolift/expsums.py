"""Twisted Kloosterman-type sums and their cancellation bounds.

Three sums over residues modulo ``c`` are evaluated exactly:

* ``S_c(k, l, n)``: sum over d in [0, c) coprime to c of
  ``e((l*inv(d) - k*d)/c - n*c*Xi(-d/c))``.
* ``U_c(h, k, l)``: sum over q in [1, c] of ``e((l*(inv(q+h) - inv(q)) + k*q)/c)``.
* ``T_c(h, l, n)``: sum over d of ``a_d * b_d`` with the shifted phases of a
  Weyl differencing step.

Terms whose modular inverses do not exist are dropped. The rational part of
every phase is reduced to a residue mod c in integer arithmetic and looked up
in a table of c-th roots of unity; only the ``Xi`` part is a float.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Mapping, Optional, Sequence, TextIO

import numpy as np

from . import arith
from ._io import write_csv
from ._validation import check_int, check_modulus
from .lifts import LiftSpec

DEFAULT_EPS = 0.05
DIRECT_CAP = 10**6
FAST_CAP = 10**8
_INT64_SAFE = 3_000_000_000  # c*c must fit in int64


@dataclass(frozen=True)
class ExpSumParams:
    c: int
    h: int = 0
    k: int = 0
    l: int = 0
    n: int = 0

    def __post_init__(self):
        check_modulus(self.c)
        for name in ("h", "k", "l"):
            check_int(getattr(self, name), name)
        check_int(self.n, "n", min_value=0)


@dataclass(frozen=True)
class SumValue:
    re: float
    im: float
    terms: int

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    def __abs__(self) -> float:
        return math.hypot(self.re, self.im)

    @classmethod
    def from_complex(cls, z: complex, terms: int) -> "SumValue":
        return cls(float(z.real), float(z.imag), int(terms))


@dataclass(frozen=True)
class BoundReport:
    params: ExpSumParams
    u: int
    v: int
    value: SumValue
    observed: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.observed / self.bound


# --------------------------------------------------------------------------
# residue tables
# --------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def inverse_table(c: int) -> np.ndarray:
    """``inv[r]`` is the inverse of r mod c, or -1 if r is not a unit.
    For c == 1 the single entry is 0."""
    if c == 1:
        return np.zeros(1, dtype=np.int64)
    if c >= _INT64_SAFE:
        return np.array([-1 if (x := arith.mod_inverse(r, c)) is None else x
                         for r in range(c)], dtype=np.int64)
    r = np.arange(c, dtype=np.int64)
    units = np.gcd(r, c) == 1
    # Euler: r**(phi(c)-1) is the inverse of every unit r.
    e = arith.euler_phi(c) - 1
    base, out = r.copy(), np.ones(c, dtype=np.int64)
    while e:
        if e & 1:
            out = out * base % c
        base = base * base % c
        e >>= 1
    out[~units] = -1
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4096)
def _roots(c: int) -> np.ndarray:
    roots = np.exp(2j * np.pi * np.arange(c) / c)
    roots.setflags(write=False)
    return roots


def _check_direct(c: int) -> None:
    if c > DIRECT_CAP:
        raise ValueError(f"c={c} exceeds the direct-evaluation cap {DIRECT_CAP}")


def _xi_phase(lift: LiftSpec, x: np.ndarray) -> np.ndarray:
    vals = np.asarray(lift.Xi(x), dtype=float)
    if vals.shape != x.shape or not np.all(np.isfinite(vals)):
        raise ValueError("Xi evaluation failed on the required points")
    return vals


# --------------------------------------------------------------------------
# evaluators
# --------------------------------------------------------------------------

def eval_S(p: ExpSumParams, lift: LiftSpec) -> SumValue:
    """Direct evaluation of ``S_c(k, l, n)``."""
    c = p.c
    _check_direct(c)
    inv = inverse_table(c)
    d = np.nonzero(inv >= 0)[0]
    r = ((p.l % c) * inv[d] - (p.k % c) * d) % c
    if p.n == 0:
        total = _roots(c)[r].sum()
    else:
        smooth = p.n * c * _xi_phase(lift, -d / c)
        angle = 2 * np.pi * (r / c - np.mod(smooth, 1.0))
        total = np.exp(1j * angle).sum()
    return SumValue.from_complex(complex(total), d.size)


def _u_direct(c: int, h: int, k: int, l: int) -> tuple[complex, int]:
    inv = inverse_table(c)
    q = np.arange(1, c + 1, dtype=np.int64) % c
    a = inv[q]
    b = inv[(q + h) % c]
    ok = (a >= 0) & (b >= 0)
    qq = q[ok]
    r = ((l % c) * (b[ok] - a[ok]) + (k % c) * qq) % c
    return complex(_roots(c)[r].sum()), int(qq.size)


def eval_U(c: int, h: int, k: int, l: int) -> SumValue:
    """Direct evaluation of ``U_c(h, k, l)``."""
    c = check_modulus(c)
    _check_direct(c)
    z, terms = _u_direct(c, h, k, l)
    return SumValue.from_complex(z, terms)


@lru_cache(maxsize=200_000)
def _u_prime_power(q: int, h: int, k: int, l: int) -> tuple[complex, int]:
    return _u_direct(q, h, k, l)


def _u_blocks(blocks: Sequence[int], h: int, k: int, l: int) -> tuple[complex, int]:
    q1 = blocks[0]
    if len(blocks) == 1:
        return _u_prime_power(q1, h % q1, k % q1, l % q1)
    q2 = math.prod(blocks[1:])
    b1, b2 = arith.crt_bezout(q1, q2)
    z1, t1 = _u_prime_power(q1, h % q1, k * b2 % q1, l * b2 % q1)
    z2, t2 = _u_blocks(blocks[1:], h, k * b1 % q2, l * b1 % q2)
    return z1 * z2, t1 * t2


def eval_U_fast(c: int, h: int, k: int, l: int) -> SumValue:
    """``U_c`` through the multiplicativity
    ``U_{q1 q2}(h,k,l) = U_{q1}(h, k b2, l b2) U_{q2}(h, k b1, l b1)`` for
    coprime ``q1, q2`` with ``q1 b1 + q2 b2 = 1``; each prime-power block is
    summed directly (and memoized)."""
    c = check_modulus(c)
    if c > FAST_CAP:
        raise ValueError(f"c={c} exceeds the fast-path cap {FAST_CAP}")
    if c == 1:
        return SumValue(1.0, 0.0, 1)
    blocks = [p**e for p, e in arith.factorize(c)]
    if max(blocks) > DIRECT_CAP:
        raise ValueError(f"prime-power block {max(blocks)} too large for direct summation")
    z, terms = _u_blocks(blocks, h, k, l)
    return SumValue.from_complex(z, terms)


def t_terms(c: int, h: int, l: int, n: int, lift: LiftSpec,
            start: int = 1, stop: Optional[int] = None) -> np.ndarray:
    """The products ``a_d * b_d`` for ``start <= d <= stop`` (default
    ``1..c``); undefined ``a_d`` contribute 0."""
    c = check_modulus(c)
    _check_direct(c)
    stop = c if stop is None else stop
    d = np.arange(start, stop + 1, dtype=np.int64)
    if d.size == 0:
        return np.zeros(0, dtype=complex)
    inv = inverse_table(c)
    a_inv = inv[d % c]
    b_inv = inv[(d + h) % c]
    ok = (a_inv >= 0) & (b_inv >= 0)
    r = ((l % c) * (b_inv - a_inv)) % c
    out = np.where(ok, _roots(c)[r], 0)
    if n:
        smooth = n * c * (_xi_phase(lift, -(d + h) / c) - _xi_phase(lift, -d / c))
        out = out * np.exp(-2j * np.pi * np.mod(smooth, 1.0))
    return out


def eval_T(c: int, h: int, l: int, n: int, lift: LiftSpec) -> SumValue:
    """Direct evaluation of ``T_c(h, l, n) = sum_{d=1}^c a_d b_d``."""
    terms = t_terms(c, h, l, n, lift)
    return SumValue.from_complex(complex(terms.sum()), int(np.count_nonzero(terms)))


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------

def bound_U(c: int, h: int, k: int, l: int, eps: float = DEFAULT_EPS) -> float:
    """``c**eps u**1/2 (u,g)**1/2 v**2/3 (v,g)**1/3`` with ``g = gcd(k, h l)``
    and implied constant 1; ``gcd(x, 0) = |x|``."""
    c = check_modulus(c)
    u, v = arith.squarefree_squarefull_split(c)
    g = math.gcd(k, h * l)
    return (c**eps * u**0.5 * math.gcd(u, g) ** 0.5
            * v ** (2 / 3) * math.gcd(v, g) ** (1 / 3))


def bound_S(c: int, k: int, l: int, n: int, lift: LiftSpec,
            eps: float = DEFAULT_EPS) -> float:
    """Cancellation bound for ``S_c(k, l, n)`` with implied constant 1.

    ``l == 0``: ``C n**1/2 c**(1 - 1/D + eps)``.
    ``l != 0``: ``(1 + sup|Xi''|**1/2) c**(5/8 + eps) u**1/4 v**1/3 n**1/2
    (u,l)**1/4 (v,l)**1/6``.
    """
    c = check_modulus(c)
    if n < 1:
        raise ValueError("the S bound needs n >= 1")
    if l == 0:
        return lift.C * n**0.5 * c ** (1 - 1 / lift.D + eps)
    u, v = arith.squarefree_squarefull_split(c)
    return ((1 + lift.supXi2d**0.5) * c ** (5 / 8 + eps) * u**0.25 * v ** (1 / 3)
            * n**0.5 * math.gcd(u, l) ** 0.25 * math.gcd(v, l) ** (1 / 6))


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

SWEEP_KINDS = ("U", "S-l0", "S-lnz")
CSV_HEADER = ("c", "u", "v", "h", "k", "l", "n", "re", "im", "abs", "bound", "ratio")


@dataclass(frozen=True)
class SweepSummary:
    reports: list
    max_ratio: Optional[float]
    slope: Optional[float]
    blocks: list  # (block index, c at max, max ratio)


def _grid_params(kind: str, grid: Mapping[str, Iterable[int]]) -> list[ExpSumParams]:
    cs = sorted(set(grid.get("c", ())))
    hs = list(grid.get("h", (0,)))
    ks = list(grid.get("k", (0,)))
    ls = list(grid.get("l", (0,)))
    ns = list(grid.get("n", (1,)))
    if kind == "U":
        return [ExpSumParams(c, h, k, l, 0) for c, h, k, l in product(cs, hs, ks, ls)]
    if kind == "S-l0":
        return [ExpSumParams(c, 0, k, 0, n) for c, k, n in product(cs, ks, ns)]
    if kind == "S-lnz":
        return [ExpSumParams(c, 0, k, l, n)
                for c, k, l, n in product(cs, ks, ls, ns) if l != 0]
    raise ValueError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")


def _evaluate(kind: str, p: ExpSumParams, lift: LiftSpec, eps: float) -> BoundReport:
    u, v = arith.squarefree_squarefull_split(p.c)
    if kind == "U":
        val = eval_U_fast(p.c, p.h, p.k, p.l)
        bound = bound_U(p.c, p.h, p.k, p.l, eps)
    else:
        val = eval_S(p, lift)
        bound = bound_S(p.c, p.k, p.l, p.n, lift, eps)
    return BoundReport(p, u, v, val, abs(val), bound)


def _evaluate_chunk(args):
    kind, chunk, lift, eps = args
    return [_evaluate(kind, p, lift, eps) for p in chunk]


def dyadic_slope(reports: Sequence[BoundReport]) -> tuple[Optional[float], list]:
    """Slope of log(max ratio per dyadic c-block) against log(c at the max)."""
    best: dict[int, tuple[float, int]] = {}
    for rep in reports:
        j = rep.params.c.bit_length() - 1
        if j not in best or rep.ratio > best[j][0]:
            best[j] = (rep.ratio, rep.params.c)
    blocks = [(j, best[j][1], best[j][0]) for j in sorted(best)]
    usable = [(c, r) for _, c, r in blocks if r > 0]
    if len(usable) < 2:
        return None, blocks
    x = np.log([c for c, _ in usable])
    y = np.log([r for _, r in usable])
    slope = float(np.polyfit(x, y, 1)[0])
    return slope, blocks


def sweep_verify(kind: str, grid: Mapping[str, Iterable[int]], lift: LiftSpec,
                 eps: float = DEFAULT_EPS, workers: int = 1) -> SweepSummary:
    """Evaluate every sum on the grid against its bound.

    ``grid`` maps any of ``c, h, k, l, n`` to integer iterables. Results are
    ordered by parameter tuple regardless of ``workers``.
    """
    params = sorted(_grid_params(kind, grid),
                    key=lambda p: (p.c, p.h, p.k, p.l, p.n))
    if not params:
        return SweepSummary([], None, None, [])
    if workers > 1 and len(params) > 1:
        size = math.ceil(len(params) / (4 * workers))
        chunks = [params[i:i + size] for i in range(0, len(params), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_evaluate_chunk, [(kind, ch, lift, eps) for ch in chunks])
            reports = [r for part in parts for r in part]
    else:
        reports = [_evaluate(kind, p, lift, eps) for p in params]
    slope, blocks = dyadic_slope(reports)
    return SweepSummary(reports, max(r.ratio for r in reports), slope, blocks)


def write_sweep_csv(fh: TextIO, reports: Sequence[BoundReport],
                    config: Optional[Mapping] = None) -> None:
    rows = (
        (r.params.c, r.u, r.v, r.params.h, r.params.k, r.params.l, r.params.n,
         r.value.re, r.value.im, r.observed, r.bound, r.ratio)
        for r in reports
    )
    write_csv(fh, CSV_HEADER, rows, config)

"""ASL(2,R) arithmetic, Iwasawa coordinates and reduction to the standard
fundamental domain of SL(2,Z).

Conventions: elements are pairs ``(M, x)`` with ``x`` a row vector and
``(M, x)(M', x') = (MM', xM' + x')``. A matrix ``M`` is identified with
the point ``z = M.i`` of the upper half plane, which is ``u + iv`` in the
Iwasawa decomposition ``M = n(u) a(v) k(theta)``; left multiplication by
``T`` in SL(2,Z) is the Moebius action on ``z``.

The reduced representative has ``-1/2 <= u < 1/2``, ``|z| >= 1`` with
``u <= 0`` on the unit circle, and ``theta`` in ``[-pi/2, pi/2)`` (fixing the
sign ambiguity from ``-I``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_mat2
from .lifts import LiftSpec

EPS = 1e-9
MAX_REDUCTION_STEPS = 1000

I2 = np.eye(2)
S_MATRIX = np.array([[0, -1], [1, 0]], dtype=np.int64)


class IwasawaCoords(NamedTuple):
    u: float
    v: float
    theta: float


class YPoint(NamedTuple):
    Mred: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True, eq=False)
class AslElement:
    M: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float).reshape(2, 2))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(2))

    def __mul__(self, other: "AslElement") -> "AslElement":
        return mul(self, other)

    def inverse(self) -> "AslElement":
        Minv = inv2(self.M)
        return AslElement(Minv, -self.x @ Minv)

    @classmethod
    def identity(cls) -> "AslElement":
        return cls(I2, np.zeros(2))


def inv2(M: np.ndarray) -> np.ndarray:
    """Inverse of a unimodular 2x2 matrix (adjugate)."""
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]], dtype=float)


def mul(g: AslElement, g2: AslElement) -> AslElement:
    return AslElement(g.M @ g2.M, g.x @ g2.M + g2.x)


def n_of(x: float) -> np.ndarray:
    return np.array([[1.0, x], [0.0, 1.0]])


def a_of(y: float) -> np.ndarray:
    if y <= 0:
        raise ValueError(f"a(y) needs y > 0, got {y}")
    s = math.sqrt(y)
    return np.array([[s, 0.0], [0.0, 1.0 / s]])


def k_of(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def lift_point(lift: LiftSpec, x: float, y: float) -> AslElement:
    """``(1, xi(x)) n(x) a(y)``."""
    M = n_of(x) @ a_of(y)
    xi = lift.xi(np.array([float(x)]))[0]
    return AslElement(M, xi @ M)


def to_iwasawa(M) -> IwasawaCoords:
    M = check_mat2(M)
    (a, b), (c, d) = M
    r2 = c * c + d * d
    theta = math.atan2(c, d)
    if theta >= math.pi:
        theta -= 2 * math.pi
    return IwasawaCoords(float((a * c + b * d) / r2), float(1.0 / r2), float(theta))


def from_iwasawa(coords: IwasawaCoords) -> np.ndarray:
    u, v, theta = coords
    if v <= 0:
        raise ValueError(f"Iwasawa v must be positive, got {v}")
    return n_of(u) @ a_of(v) @ k_of(theta)


def iwasawa_batch(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``(u, v, theta)`` for an array of matrices shaped (..., 2, 2)."""
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    r2 = c * c + d * d
    theta = np.arctan2(c, d)
    theta = np.where(theta >= np.pi, theta - 2 * np.pi, theta)
    return (a * c + b * d) / r2, 1.0 / r2, theta


def _left(T: np.ndarray, step: np.ndarray, mask: np.ndarray) -> None:
    """In-place ``T[mask] = step[mask] @ T[mask]`` for stacks of 2x2."""
    if np.any(mask):
        T[mask] = np.einsum("nij,njk->nik", step[mask], T[mask])


def reduce_fundamental_batch(M: np.ndarray, eps: float = EPS):
    """Reduce a stack of unimodular matrices (N, 2, 2).

    Returns integer ``T`` (N, 2, 2) and ``Mred = T @ M`` with the reduced
    point in the standard fundamental domain; see the module docstring for
    the boundary and sign conventions.
    """
    M = np.asarray(M, dtype=float)
    N = M.shape[0]
    T = np.broadcast_to(np.eye(2, dtype=np.int64), (N, 2, 2)).copy()
    cur = M.copy()
    active = np.ones(N, dtype=bool)
    step = np.zeros((N, 2, 2), dtype=np.int64)
    for _ in range(MAX_REDUCTION_STEPS):
        if not np.any(active):
            break
        u, v, _ = iwasawa_batch(cur)
        shift = np.floor(u + 0.5).astype(np.int64)
        step[:] = np.eye(2, dtype=np.int64)
        step[:, 0, 1] = -shift
        moved = active & (shift != 0)
        _left(T, step, moved)
        cur[moved] = np.einsum("nij,njk->nik", step[moved].astype(float), cur[moved])
        u = u - shift
        invert = active & (u * u + v * v < 1.0 - eps)
        step[:] = S_MATRIX
        _left(T, step, invert)
        cur[invert] = np.einsum("ij,njk->nik", S_MATRIX.astype(float), cur[invert])
        active = invert
    else:
        raise RuntimeError("fundamental-domain reduction did not converge; invalid input?")

    # boundary conventions
    u, v, _ = iwasawa_batch(cur)
    right_edge = u >= 0.5 - eps
    step[:] = np.eye(2, dtype=np.int64)
    step[:, 0, 1] = -1
    _left(T, step, right_edge)
    cur[right_edge] = np.einsum("ij,njk->nik", step[0].astype(float), cur[right_edge])
    u, v, _ = iwasawa_batch(cur)
    on_circle = (np.abs(u * u + v * v - 1.0) <= eps) & (u > eps)
    step[:] = S_MATRIX
    _left(T, step, on_circle)
    cur[on_circle] = np.einsum("ij,njk->nik", S_MATRIX.astype(float), cur[on_circle])
    # sign: theta in [-pi/2, pi/2)
    _, _, theta = iwasawa_batch(cur)
    flip = (theta >= np.pi / 2) | (theta < -np.pi / 2)
    T[flip] *= -1
    cur[flip] *= -1
    return T, cur


def reduce_fundamental(M) -> tuple[np.ndarray, np.ndarray]:
    """Integer ``T`` in SL(2,Z) and ``Mred = T M`` in the fundamental domain."""
    M = check_mat2(M)
    T, Mred = reduce_fundamental_batch(M[None])
    return T[0], Mred[0]


def y_coordinates(g: AslElement) -> YPoint:
    """Canonical label of the coset ``Gamma g``: the reduced matrix and the
    torus coordinate ``xi`` in [0,1)^2 with ``g ~ (1, xi) Mred``."""
    _, Mred = reduce_fundamental(g.M)
    xi = g.x @ inv2(Mred)
    xi = xi - np.floor(xi)
    xi[xi >= 1.0] = 0.0
    return YPoint(Mred, xi)


def random_sl2z(rng: np.random.Generator, steps: int = 4, max_shift: int = 3) -> np.ndarray:
    """Random word in the generators n(1) and S."""
    T = np.eye(2, dtype=np.int64)
    for _ in range(steps):
        t = int(rng.integers(-max_shift, max_shift + 1))
        T = np.array([[1, t], [0, 1]], dtype=np.int64) @ T
        if rng.random() < 0.5:
            T = S_MATRIX @ T
    return T

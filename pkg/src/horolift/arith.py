"""Exact integer primitives: gcd, modular inverses, factorization, Möbius,
square-free/square-full splitting, CRT Bezout pairs, Ramanujan sums.

Everything here works on Python ints, so intermediates never overflow.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple, Optional

FACTOR_LIMIT = 10**12

Factorization = tuple  # tuple[tuple[int, int], ...], ascending primes


class SquarefreeSplit(NamedTuple):
    u: int  # square-free part
    v: int  # square-full part


def gcd(a: int, b: int) -> int:
    return math.gcd(a, b)


def mod_inverse(a: int, c: int) -> Optional[int]:
    """Inverse of ``a`` modulo ``c`` in ``[0, c)``, or ``None`` when
    ``gcd(a, c) > 1``. The trivial modulus returns 0."""
    if c < 1:
        raise ValueError(f"modulus must be >= 1, got {c}")
    if c == 1:
        return 0
    try:
        return pow(a, -1, c)
    except ValueError:
        return None


def _wheel():
    yield 2
    yield 3
    yield 5
    steps = (4, 2, 4, 2, 4, 6, 2, 6)
    p = 7
    while True:
        for s in steps:
            yield p
            p += s


@lru_cache(maxsize=65536)
def factorize(n: int) -> Factorization:
    """Prime factorization of ``1 <= n <= 10**12`` by trial division on a
    2-3-5 wheel. Returns ``((p1, e1), (p2, e2), ...)`` with ``p1 < p2 < ...``."""
    if n < 1:
        raise ValueError(f"factorize needs n >= 1, got {n}")
    if n > FACTOR_LIMIT:
        raise OverflowError(f"n={n} exceeds desk-scale cap {FACTOR_LIMIT}")
    out = []
    for p in _wheel():
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
    if n > 1:
        out.append((n, 1))
    return tuple(out)


def mobius(n: int) -> int:
    fac = factorize(n)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def euler_phi(n: int) -> int:
    out = n
    for p, _ in factorize(n):
        out -= out // p
    return out


def squarefree_squarefull_split(c: int) -> SquarefreeSplit:
    u = 1
    for p, e in factorize(c):
        if e == 1:
            u *= p
    return SquarefreeSplit(u, c // u)


def crt_bezout(q1: int, q2: int) -> tuple[int, int]:
    """Return ``(b1, b2)`` with ``q1*b1 + q2*b2 == 1``.

    ``b1`` is the inverse of ``q1`` mod ``q2`` taken in ``[0, q2)``, which
    makes the pair the minimal one (``|b1| < q2``, ``|b2| < q1``) whenever
    both moduli exceed 1.
    """
    if q1 < 1 or q2 < 1:
        raise ValueError("crt_bezout needs positive moduli")
    if math.gcd(q1, q2) != 1:
        raise ValueError(f"moduli {q1} and {q2} are not coprime")
    b1 = pow(q1, -1, q2) if q2 > 1 else 0
    b2 = (1 - q1 * b1) // q2
    return b1, b2


def divisors(c: int) -> list[int]:
    divs = [1]
    for p, e in factorize(c):
        divs = [d * p**i for d in divs for i in range(e + 1)]
    return sorted(divs)


def ramanujan_sum(c: int, k: int) -> int:
    """c_c(k) = sum over d | gcd(c, k) of d * mu(c / d)."""
    if c < 1:
        raise ValueError(f"modulus must be >= 1, got {c}")
    g = math.gcd(c, k)
    return sum(d * mobius(c // d) for d in divisors(g))

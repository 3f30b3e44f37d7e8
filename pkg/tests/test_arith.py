import cmath
import math

import pytest
from hypothesis import given, strategies as st

from horolift import arith


def brute_phi(n):
    return sum(1 for k in range(1, n + 1) if math.gcd(k, n) == 1)


def brute_mobius(n):
    m, p, sign = n, 2, 1
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            sign = -sign
        p += 1
    return -sign if m > 1 else sign


@given(st.integers(1, 5000))
def test_factorize_reconstructs(n):
    fac = arith.factorize(n)
    assert math.prod(p**e for p, e in fac) == n
    assert all(all(p % d for d in range(2, math.isqrt(p) + 1)) for p, _ in fac)
    assert [p for p, _ in fac] == sorted(p for p, _ in fac)


@given(st.integers(1, 3000))
def test_phi_and_mobius_against_brute_force(n):
    assert arith.euler_phi(n) == brute_phi(n)
    assert arith.mobius(n) == brute_mobius(n)


def test_factorize_limit():
    assert arith.factorize(999_999_999_989) == ((999_999_999_989, 1),)
    with pytest.raises(OverflowError):
        arith.factorize(10**12 + 1)


@given(st.integers(-100, 100), st.integers(1, 200))
def test_mod_inverse(a, c):
    inv = arith.mod_inverse(a, c)
    if math.gcd(a, c) != 1:
        assert inv is None
    elif c == 1:
        assert inv == 0
    else:
        assert 0 <= inv < c and (a * inv) % c == 1


@given(st.integers(1, 300), st.integers(1, 300))
def test_crt_bezout(q1, q2):
    if math.gcd(q1, q2) != 1:
        with pytest.raises(ValueError):
            arith.crt_bezout(q1, q2)
        return
    b1, b2 = arith.crt_bezout(q1, q2)
    assert q1 * b1 + q2 * b2 == 1


@given(st.integers(1, 5000))
def test_squarefree_squarefull_split(c):
    u, v = arith.squarefree_squarefull_split(c)
    assert u * v == c and math.gcd(u, v) == 1
    assert arith.mobius(u) != 0
    assert all(e >= 2 for _, e in arith.factorize(v))


def test_split_examples():
    assert arith.squarefree_squarefull_split(72) == (1, 72)
    assert arith.squarefree_squarefull_split(60) == (15, 4)
    assert arith.squarefree_squarefull_split(1) == (1, 1)


@given(st.integers(1, 2000))
def test_divisors(n):
    divs = arith.divisors(n)
    assert divs == [d for d in range(1, n + 1) if n % d == 0]


@given(st.integers(1, 150), st.integers(-40, 40))
def test_ramanujan_sum_against_exponential_sum(c, k):
    direct = sum(cmath.exp(2j * math.pi * k * q / c) for q in range(c) if math.gcd(q, c) == 1)
    assert abs(arith.ramanujan_sum(c, k) - direct) < 1e-9
    assert abs(direct.imag) < 1e-9

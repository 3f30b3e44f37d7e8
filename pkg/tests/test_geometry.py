import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from horolift import geometry as geo
from horolift.lifts import quadratic_lift

finite = st.floats(-3, 3, allow_nan=False)


def sl2_from(a, b, c):
    """Unimodular matrix with first column (a, c) completed by b."""
    if abs(a) < 0.2:
        a = 0.2 + abs(a)
    return np.array([[a, b], [c, (1 + b * c) / a]])


@given(finite, st.floats(0.05, 20), st.floats(-math.pi / 2, math.pi / 2 - 1e-9))
def test_iwasawa_round_trip(u, v, theta):
    M = geo.from_iwasawa((u, v, theta))
    back = geo.to_iwasawa(M)
    assert np.allclose(back, (u, v, theta), atol=1e-10, rtol=1e-10)
    assert np.abs(geo.from_iwasawa(back) - M).max() <= 1e-10 * max(1, np.abs(M).max())


def test_iwasawa_of_rotation():
    assert geo.to_iwasawa(geo.k_of(math.pi / 2)) == pytest.approx((0.0, 1.0, math.pi / 2))


@given(finite, finite, finite, finite, finite, finite)
def test_group_law_associativity(a, b, c, x1, x2, x3):
    g1 = geo.AslElement(sl2_from(a, b, c), [x1, x2])
    g2 = geo.AslElement(sl2_from(b, c, a), [x2, x3])
    g3 = geo.AslElement(sl2_from(c, a, b), [x3, x1])
    lhs, rhs = (g1 * g2) * g3, g1 * (g2 * g3)
    scale = max(1.0, np.abs(lhs.M).max(), np.abs(lhs.x).max())
    assert np.abs(lhs.M - rhs.M).max() <= 1e-12 * scale * 10
    assert np.abs(lhs.x - rhs.x).max() <= 1e-12 * scale * 10


def test_inverse_and_identity():
    g = geo.AslElement(sl2_from(1.3, 0.4, -0.7), [0.2, 0.9])
    e = g * g.inverse()
    assert np.allclose(e.M, np.eye(2)) and np.allclose(e.x, 0)
    assert np.allclose((geo.AslElement.identity() * g).M, g.M)


def test_reduce_known_point():
    z = complex(2.3, 0.8)
    M = geo.n_of(z.real) @ geo.a_of(z.imag)
    T, Mred = geo.reduce_fundamental(M)
    u, v, theta = geo.to_iwasawa(Mred)
    assert (u, v) == pytest.approx((-0.410958904109589, 1.095890410958904))
    assert round(np.linalg.det(T)) == 1 and np.allclose(T @ M, Mred)
    assert -math.pi / 2 <= theta < math.pi / 2


@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(-3, 3))
def test_reduced_point_lies_in_domain(u, v, theta):
    T, Mred = geo.reduce_fundamental(geo.from_iwasawa((u, v, theta)))
    ur, vr, tr = geo.to_iwasawa(Mred)
    assert -0.5 - 1e-9 <= ur < 0.5
    assert ur * ur + vr * vr >= 1 - 1e-9
    assert -math.pi / 2 <= tr < math.pi / 2
    assert np.issubdtype(T.dtype, np.integer)


def test_y_coordinates_gamma_invariant(rng):
    worst = 0.0
    for _ in range(300):
        M = geo.from_iwasawa((rng.uniform(-2, 2), rng.uniform(0.05, 3), rng.uniform(-3, 3)))
        g = geo.AslElement(M, rng.uniform(-2, 2, 2))
        gamma = geo.AslElement(geo.random_sl2z(rng), rng.integers(-3, 4, 2))
        a, b = geo.y_coordinates(g), geo.y_coordinates(gamma * g)
        d = np.abs(a.xi - b.xi)
        d = np.minimum(d, 1 - d)
        worst = max(worst, np.abs(a.Mred - b.Mred).max(), d.max())
    assert worst <= 1e-9


def test_lift_point():
    lift = quadratic_lift()
    g = geo.lift_point(lift, 0.4, 0.25)
    assert np.allclose(g.M, [[0.5, 0.8], [0, 2]])
    assert np.allclose(g.x, np.array([0.2, -0.04]) @ g.M)


def test_bad_inputs():
    with pytest.raises(ValueError):
        geo.a_of(0.0)
    with pytest.raises(ValueError):
        geo.to_iwasawa(np.eye(2) * 2)
    with pytest.raises(ValueError):
        geo.from_iwasawa((0, -1, 0))

from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from mlmoments import DomainError, MultiIndex
from mlmoments.polybasis import (hermite, hermite_multi, hermite_norm,
                                 legendre, legendre_interval_weight,
                                 legendre_interval_weights, legendre_multi,
                                 legendre_norm, legendre_primitive1,
                                 legendre_primitive2, tl_weight_poly)

RNG = np.random.default_rng(seed=20240601)


@pytest.fixture
def gauss_legendre():
    "Gauss-Legendre rule mapped to [0, 1], exact for polynomials of degree < 60"
    nodes, weights = leggauss(30)
    return (nodes + 1.0)/2.0, weights/2.0


@pytest.fixture
def gauss_hermite():
    "Gauss-Hermite rule for the standard normal measure"
    nodes, weights = hermegauss(30)
    return nodes, weights/np.sqrt(2*np.pi)


def test_legendre_closed_forms():
    t = np.linspace(0.0, 1.0, 11)
    assert np.allclose(legendre(1, t), 1.0)
    assert np.allclose(legendre(2, t), 2*t - 1)
    assert np.allclose(legendre(3, t), 6*t**2 - 6*t + 1)
    assert np.allclose(legendre(4, t), 20*t**3 - 30*t**2 + 12*t - 1)
    assert legendre(2, 0.75) == 0.5
    assert isinstance(legendre(3, 0.5), float)


def test_legendre_orthogonality(gauss_legendre):
    t, w = gauss_legendre
    for r in range(1, 9):
        for s in range(1, 9):
            value = np.sum(w*legendre(r, t)*legendre(s, t))
            expected = 1/(2*r - 1) if r == s else 0.0
            assert np.isclose(value, expected, atol=1e-12)


def test_legendre_domain():
    # order below 1
    with pytest.raises(DomainError):
        _ = legendre(0, 0.5)
    # point outside [0, 1]
    with pytest.raises(DomainError):
        _ = legendre(2, 1.5)
    # NaN
    with pytest.raises(DomainError):
        _ = legendre(2, np.nan)
    # non-integer order
    with pytest.raises(DomainError):
        _ = legendre(2.5, 0.5)


@given(r=st.integers(1, 12), t=st.floats(0.0, 1.0))
def test_legendre_bounded_and_reflected(r, t):
    value = legendre(r, t)
    assert abs(value) <= 1 + 1e-12
    assert np.isclose(legendre(r, 1.0 - t), (-1)**(r - 1)*value, atol=1e-10)


def test_legendre_multi():
    t = RNG.random((50, 3))
    alpha = MultiIndex((2, 1, 3))
    expected = legendre(2, t[:, 0])*legendre(3, t[:, 2])
    assert np.allclose(legendre_multi(alpha, t), expected)
    # plain tuples are accepted, a single point gives a float
    assert legendre_multi((2, 2), [0.75, 0.25]) == pytest.approx(-0.25)
    # wrong dimension
    with pytest.raises(DomainError):
        _ = legendre_multi((2, 1), t)


def test_legendre_norm(gauss_legendre):
    assert legendre_norm((1, 1)) == 1.0
    assert legendre_norm((2, 3)) == pytest.approx(1/15)
    t, w = gauss_legendre
    value = np.sum(w*legendre(3, t)**2)*np.sum(w*legendre(2, t)**2)
    assert legendre_norm(MultiIndex((3, 2))) == pytest.approx(value)


def test_primitives():
    x = np.linspace(0.0, 1.0, 21)
    eps = 1e-6
    for r in range(1, 7):
        # K_r' = L_r, J_r' = K_r
        xm = x[1:-1]
        dk = (legendre_primitive1(r, xm + eps) - legendre_primitive1(r, xm - eps))/(2*eps)
        dj = (legendre_primitive2(r, xm + eps) - legendre_primitive2(r, xm - eps))/(2*eps)
        assert np.allclose(dk, legendre(r, xm), atol=1e-6)
        assert np.allclose(dj, legendre_primitive1(r, xm), atol=1e-6)
        assert legendre_primitive1(r, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert legendre_primitive2(r, 0.0) == pytest.approx(0.0, abs=1e-15)
        if r >= 2:
            assert legendre_primitive1(r, 1.0) == pytest.approx(0.0, abs=1e-13)
    assert legendre_primitive1(2, 0.5) == pytest.approx(-0.25)
    assert legendre_primitive2(2, 1.0) == pytest.approx(-1/6)
    assert legendre_primitive1(1, 0.3) == pytest.approx(0.3)


def test_interval_weights():
    for n in (1, 2, 5, 17):
        w1 = legendre_interval_weights(1, n)
        assert np.allclose(w1, 1/n)
        for r in range(2, 6):
            w = legendre_interval_weights(r, n)
            assert w.shape == (n,)
            assert np.sum(w) == pytest.approx(0.0, abs=1e-13)
            assert np.allclose(w, [legendre_interval_weight(r, i, n) for i in range(1, n + 1)])
    assert legendre_interval_weight(2, 1, 2) == pytest.approx(-0.25)
    assert legendre_interval_weight(2, 2, 2) == pytest.approx(0.25)
    # i out of range
    with pytest.raises(DomainError):
        _ = legendre_interval_weight(2, 0, 3)
    with pytest.raises(DomainError):
        _ = legendre_interval_weight(2, 4, 3)
    # empty sample
    with pytest.raises(DomainError):
        _ = legendre_interval_weights(2, 0)


def test_hermite_closed_forms():
    x = np.linspace(-3.0, 3.0, 13)
    assert np.allclose(hermite(0, x), 1.0)
    assert np.allclose(hermite(1, x), x)
    assert np.allclose(hermite(2, x), x**2 - 1)
    assert np.allclose(hermite(3, x), x**3 - 3*x)
    assert np.allclose(hermite(4, x), x**4 - 6*x**2 + 3)
    assert hermite(2, 2.0) == 3.0
    with pytest.raises(DomainError):
        _ = hermite(-1, 0.0)


def test_hermite_orthogonality(gauss_hermite):
    x, w = gauss_hermite
    for r in range(7):
        for s in range(7):
            value = np.sum(w*hermite(r, x)*hermite(s, x))
            expected = factorial(r) if r == s else 0.0
            assert np.isclose(value, expected, atol=1e-9)


def test_hermite_multi():
    x = RNG.standard_normal((40, 2))
    # raw degrees
    assert np.allclose(hermite_multi((1, 2), x), x[:, 0]*(x[:, 1]**2 - 1))
    # L-moment indices map to degrees alpha - 1
    assert np.allclose(hermite_multi(MultiIndex((1, 1)), x), 1.0)
    assert np.allclose(hermite_multi(MultiIndex((2, 3)), x), x[:, 0]*(x[:, 1]**2 - 1))
    assert hermite_norm((2, 3)) == 12.0
    with pytest.raises(DomainError):
        _ = hermite_multi((1,), x)


def test_tl_weight_poly():
    u = np.linspace(0.0, 1.0, 17)
    # no trimming gives back the shifted Legendre polynomials
    for r in range(1, 7):
        assert np.allclose(tl_weight_poly(r, 0, 0, u), legendre(r, u))
    assert tl_weight_poly(1, 1, 1, 0.5) == pytest.approx(1.5)
    # symmetric trimming keeps the reflection symmetry
    for r in range(1, 5):
        assert np.allclose(tl_weight_poly(r, 2, 2, 1 - u), (-1)**(r - 1)*tl_weight_poly(r, 2, 2, u))
    # weight of the mean integrates to 1
    nodes, weights = leggauss(20)
    t = (nodes + 1)/2
    assert np.sum(weights/2*tl_weight_poly(1, 1, 2, t)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        _ = tl_weight_poly(1, -1, 0, 0.5)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import fn
from matkowski.errors import NonFunctionG, VanishingDerivative
from matkowski.families import FamilyParams, TAGS, build_family, random_params
from matkowski.fncore import Grid, Interval, constant_fn, linear_fn
from matkowski.means import SolutionTuple, eq1_residual
from matkowski.reduction import (
    Anchors,
    ReducedSystem,
    adaptive_simpson,
    derive_system,
    reconstruct_tuple,
    round_trip_error,
    system_residual,
)

I11 = Interval(-1.0, 1.0)
X = np.linspace(-0.8, 0.8, 9)


def trivial_quadratic():
    return build_family(FamilyParams("P2_1", {"A": 1, "D1": 1, "D2": 1}, I11))


def affine_F(g1, g2, I=Interval(0.0, 1.0)):
    return build_family(FamilyParams("Main1_AffineF", {"A": 2, "B": 3}, I, (g1, g2)))


def system(phi, psi1, psi2, Psi1, Psi2, I=I11):
    return ReducedSystem(*(fn(f, I.lo, I.hi) for f in (phi, psi1, psi2, Psi1, Psi2)), I)


# --- derivation ------------------------------------------------------------------------

def test_trivial_quadratic_system():
    s = derive_system(trivial_quadratic())
    np.testing.assert_allclose(s.phi(X), X, atol=1e-12)
    np.testing.assert_allclose(s.psi1(X), 0.0, atol=1e-12)
    np.testing.assert_allclose(s.psi2(X), 2.0, atol=1e-12)
    np.testing.assert_allclose(s.Psi1(X), 0.0, atol=1e-12)
    np.testing.assert_allclose(s.Psi2(X), 0.0, atol=1e-12)


def test_affine_F_equal_inner_functions():
    s = derive_system(affine_F("exp", "exp"))
    x = np.linspace(0.1, 0.9, 5)
    np.testing.assert_allclose(s.phi(x), 1.0, rtol=1e-12)
    np.testing.assert_allclose(s.psi1(x), 0.0, atol=1e-12)


def test_linear_inner_functions():
    F = linear_fn(2.0, 0.0, I11)
    z = constant_fn(0.0, I11)
    t = SolutionTuple(F, z, z, linear_fn(1.0, 0.0, Interval(-3, 3)),
                      linear_fn(1.0, 0.0, I11), linear_fn(2.0, 0.0, I11), I11, Interval(-3, 3))
    s = derive_system(t)
    np.testing.assert_allclose(s.psi1(X), 0.5)
    np.testing.assert_allclose(s.psi2(X), 1.5)


def test_vanishing_inner_derivative():
    t = trivial_quadratic()
    flat = fn(lambda x: 1e-10 * x, -1, 1, (lambda x: 1e-10 + 0 * x,))
    bad = SolutionTuple(t.F, t.f1, t.f2, t.G, flat, t.g2, t.I, t.sum_domain)
    with pytest.raises(VanishingDerivative):
        derive_system(bad)


@pytest.mark.parametrize("tag", ["T1", "P1_2", "P2_2", "H2_1", "Main1_AffineG"])
def test_identities_between_components(tag):
    t = build_family(random_params(tag, np.random.default_rng(11)))
    s = derive_system(t)
    x = t.I.sample(20)
    dg1, dg2 = t.g1.derivative(1)(x), t.g2.derivative(1)(x)
    np.testing.assert_allclose(s.psi2(x) + s.psi1(x), 2 / dg1, rtol=1e-9)
    np.testing.assert_allclose(s.psi2(x) - s.psi1(x), 2 / dg2, rtol=1e-9)
    # the plus-equation on the diagonal: 2 phi(x) psi1(x) = 2 Psi1(x)
    np.testing.assert_allclose(s.phi(x) * s.psi1(x), s.Psi1(x),
                               atol=1e-7 * (1 + np.max(np.abs(s.Psi1(x)))))


# --- system residuals -----------------------------------------------------------------------

def test_constant_phi_solves_minus_equation():
    s = system(lambda x: 3.0 + 0 * x, np.sin, np.cos, lambda x: 3 * np.sin(x),
               lambda x: 3 * np.cos(x) + 7)
    plus, minus = system_residual(s, Grid.uniform(I11, 20))
    assert minus.max_abs < 1e-12
    assert plus.max_abs < 1e-12


def test_system_residual_value():
    s = system(lambda x: x, lambda x: 1 + 0 * x, lambda x: 0 * x, lambda x: 0 * x,
               lambda x: 0 * x, I=Interval(-1, 3))
    plus, _ = system_residual(s, Grid(Interval(-1, 3), [0.0, 2.0], 0.0))
    X, Y, R = plus.samples
    at = (X == 0.0) & (Y == 2.0)
    assert R[at][0] == pytest.approx(2.0)  # phi(1) * (1 + 1)
    assert plus.max_abs == pytest.approx(4.0)  # phi(2) * (1 + 1) at x = y = 2
    assert plus.argmax_point == (2.0, 2.0)


@pytest.mark.parametrize("tag", [t for t in TAGS if not t.startswith("Main1")])
def test_family_systems_vanish(tag):
    t = build_family(random_params(tag, np.random.default_rng(3)))
    plus, minus = system_residual(derive_system(t), Grid.chebyshev(t.I.shrink(0.02), 30))
    assert max(plus.max_abs, minus.max_abs) < 1e-6


# --- reconstruction ------------------------------------------------------------------------

def test_trivial_quadratic_round_trip():
    t = trivial_quadratic()
    r = reconstruct_tuple(derive_system(t), Anchors(0.0))
    x = np.linspace(-0.9, 0.9, 11)
    np.testing.assert_allclose(r.F(x), x ** 2, atol=1e-10)
    np.testing.assert_allclose(r.g1(x), x, atol=1e-10)
    np.testing.assert_allclose(r.f2(x), 0.0, atol=1e-10)
    np.testing.assert_allclose(r.G(2 * x * 0.9), (0.9 * x) ** 2, atol=1e-8)
    assert eq1_residual(r, Grid.uniform(r.I.shrink(0.05), 20)).max_abs < 1e-8


def test_zero_system_gives_affine_inner_functions():
    z = lambda x: 0 * x
    s = system(z, z, lambda x: 2 + 0 * x, z, z)
    r = reconstruct_tuple(s, Anchors(0.0))
    np.testing.assert_allclose(r.F(X), 0.0, atol=1e-14)
    np.testing.assert_allclose(r.g1(X), X, atol=1e-12)
    np.testing.assert_allclose(r.g2(X), X, atol=1e-12)
    np.testing.assert_allclose(r.G(np.array([-1.0, 0.5])), 0.0, atol=1e-12)


def test_inconsistent_system_rejected():
    # f1 = x^2 with g1 = g2 = x makes G(u) multivalued
    z = lambda x: 0 * x
    s = system(z, z, lambda x: 2 + 0 * x, lambda x: -2 * x, lambda x: -2 * x)
    with pytest.raises(NonFunctionG):
        reconstruct_tuple(s, Anchors(0.0))


def test_anchor_outside_interval():
    with pytest.raises(ValueError):
        reconstruct_tuple(derive_system(trivial_quadratic()), Anchors(5.0))


@pytest.mark.parametrize("tag", ["T2", "P2_1", "H2_3"])
def test_round_trip_of_families(tag):
    t = build_family(random_params(tag, np.random.default_rng(21)))
    assert round_trip_error(t)["sup"] < 1e-5


# --- quadrature ------------------------------------------------------------------------------

def test_simpson_examples():
    assert adaptive_simpson(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert adaptive_simpson(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, abs=1e-10)
    assert adaptive_simpson(np.exp, 1.0, 0.0) == pytest.approx(1 - math.e, abs=1e-10)
    assert adaptive_simpson(np.exp, 0.5, 0.5) == 0.0


@given(st.floats(-3, 3), st.floats(0.01, 2), st.integers(0, 6))
def test_simpson_polynomials(a, w, p):
    b = a + w
    exact = (b ** (p + 1) - a ** (p + 1)) / (p + 1)
    assert adaptive_simpson(lambda x: x ** p, a, b) == pytest.approx(exact, abs=1e-9 * (1 + abs(exact)))

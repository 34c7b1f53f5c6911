import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import fn
from matkowski import catalog
from matkowski.errors import (
    NotMonotone,
    OutOfRange,
    SeedInvalid,
    TooCloseToBoundary,
    VanishingFirstDerivative,
)
from matkowski.fncore import (
    Grid,
    Interval,
    RealFn,
    derive_num,
    invert_monotone,
    safe_subinterval,
    schwarzian_num,
    sum_fn,
)


# --- Interval / Grid ---------------------------------------------------------

def test_interval_rejects_empty():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)


def test_sampling_stays_inside_margin():
    I = Interval(0.0, 1.0)
    pts = I.sample(100)
    assert np.all(pts > I.lo) and np.all(pts < I.hi)
    assert pts[0] >= I.lo + I.margin and pts[-1] <= I.hi - I.margin
    assert I.margin == pytest.approx(1e-6)


def test_unbounded_interval_is_clamped():
    I = Interval(-math.inf, math.inf)
    pts = I.sample(51)
    assert np.all(np.isfinite(pts))
    assert abs(pts[0]) <= 1e8 and abs(pts[-1]) <= 1e8
    assert I.margin == 1e-6


@pytest.mark.parametrize("kind", ["chebyshev", "uniform"])
def test_grid_points_increasing_and_inside(kind):
    I = Interval(-2.0, 3.0)
    g = getattr(Grid, kind)(I, 50)
    assert np.all(np.diff(g.points) > 0)
    assert np.all(I.contains(g.points, g.margin))
    spec = g.spec()
    assert spec["n"] == 50 and spec["kind"] == kind


# --- invert_monotone -----------------------------------------------------------

def test_invert_exp():
    x = invert_monotone(fn(np.exp, -5, 5), 1.0, tol=1e-12)
    assert x == pytest.approx(0.0, abs=1e-11)
    assert abs(math.exp(x) - 1.0) <= 2e-12


def test_invert_cubic_plus_linear():
    assert invert_monotone(fn(lambda x: x ** 3 + x, -3, 3), 2.0) == pytest.approx(1.0, abs=1e-12)


def test_invert_log():
    assert invert_monotone(fn(np.log, 0.1, 10), 0.0) == pytest.approx(1.0, abs=1e-12)


def test_invert_out_of_range():
    with pytest.raises(OutOfRange):
        invert_monotone(fn(np.exp, -5, 5), -1.0)


def test_invert_not_monotone():
    with pytest.raises(NotMonotone):
        invert_monotone(fn(np.cosh, -1, 1), 1.2)


def test_invert_is_vectorised():
    ys = np.linspace(-0.9, 0.9, 7)
    xs = invert_monotone(fn(np.tanh, -3, 3), ys)
    np.testing.assert_allclose(np.tanh(xs), ys, atol=1e-12)


@given(st.sampled_from(["exp", "cube_plus_x", "arctan", "sinh", "neg_id", "exp_neg"]),
       st.floats(-1.5, 1.5))
def test_invert_round_trip(name, x):
    f = catalog.get(name, Interval(-2, 2))
    y = float(f(x))
    tol = 1e-12
    x_back = invert_monotone(f, y, tol)
    assert abs(float(f(x_back)) - y) <= tol * (1 + abs(y))


# --- derive_num ------------------------------------------------------------------

def test_derivative_of_square():
    assert derive_num(fn(lambda x: x ** 2), 3.0, 1) == pytest.approx(6.0, rel=1e-9)


def test_derivative_of_sin():
    assert derive_num(fn(np.sin), 0.0, 1) == pytest.approx(1.0, rel=1e-9)


def test_third_derivative_of_exp():
    assert derive_num(fn(np.exp), 1.0, 3) == pytest.approx(math.e, rel=1e-5)


def test_fourth_derivative_of_sin():
    assert derive_num(fn(np.sin), 0.7, 4) == pytest.approx(math.sin(0.7), rel=1e-4)


def test_analytic_derivative_preferred():
    sentinel = fn(np.sin, derivs=(lambda x: np.full_like(x, 42.0),))
    assert derive_num(sentinel, 0.3, 1) == 42.0


def test_too_close_to_boundary():
    with pytest.raises(TooCloseToBoundary):
        derive_num(fn(np.log, 0.0, 10.0), 1e-6, 1)


@pytest.mark.parametrize("name", ["exp", "ln", "tanh", "arctan", "cube_plus_exp", "sin_plus_2x",
                                  "x_exp_x", "sqrt", "neg_reciprocal"])
def test_catalog_analytic_derivatives_match_finite_differences(name):
    f = catalog.get(name, Interval(0.2, 3.0))
    assert f.check_derivatives(32) < 1e-5


# --- schwarzian_num --------------------------------------------------------------

def test_schwarzian_tan():
    f = fn(lambda x: np.tan(2 * x), -math.pi / 4, math.pi / 4)
    assert schwarzian_num(f, 0.3) == pytest.approx(8.0, rel=1e-5)


def test_schwarzian_tanh():
    assert schwarzian_num(fn(np.tanh), 0.5) == pytest.approx(-2.0, rel=1e-5)


def test_schwarzian_mobius_vanishes():
    f = fn(lambda x: (2 * x + 1) / (x + 3), -3, np.inf)
    assert abs(schwarzian_num(f, 1.0)) < 1e-6


def test_schwarzian_refuses_flat_points():
    with pytest.raises(VanishingFirstDerivative):
        schwarzian_num(fn(lambda x: x ** 3), 0.0)


@given(a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2), d=st.floats(-2, 2),
       base=st.sampled_from(["tan", "tanh", "id", "exp"]))
def test_schwarzian_invariant_under_mobius(a, b, c, d, base):
    from hypothesis import assume
    assume(abs(a * d - b * c) > 0.1)
    f = {"tan": np.tan, "tanh": np.tanh, "id": lambda x: x, "exp": np.exp}[base]
    xs = np.linspace(-0.9, 0.9, 9)
    fx = f(xs)
    keep = np.abs(c * fx + d) > 0.3
    assume(keep.sum() >= 3)
    g_f = fn(lambda x: (a * f(x) + b) / (c * f(x) + d))
    s_f = schwarzian_num(fn(f), xs[keep])
    s_gf = schwarzian_num(g_f, xs[keep])
    assert np.all(np.abs(s_gf - s_f) < 1e-4 * (1 + np.abs(s_f)))


# --- safe_subinterval ------------------------------------------------------------

def test_safe_subinterval_no_singularity():
    I = safe_subinterval([fn(lambda x: x ** 2)], 0.0, Interval(-1, 1))
    assert (I.lo, I.hi) == (-1.0, 1.0)


def test_safe_subinterval_tan_poles():
    I = safe_subinterval([fn(np.tan, hint="increasing")], 0.0, Interval(-3, 3))
    assert I.lo == pytest.approx(-math.pi / 2, abs=1e-4) and I.lo > -math.pi / 2
    assert I.hi == pytest.approx(math.pi / 2, abs=1e-4) and I.hi < math.pi / 2


def test_safe_subinterval_tan_without_hint_detects_pole():
    I = safe_subinterval([fn(np.tan)], 0.0, Interval(-3, 3))
    assert -math.pi / 2 < I.lo < -math.pi / 2 + 1e-4
    assert math.pi / 2 - 1e-4 < I.hi < math.pi / 2


def test_safe_subinterval_log_domain():
    I = safe_subinterval([fn(lambda x: np.log(x - 1))], 2.0, Interval(0, 5))
    assert 1.0 < I.lo < 1.0 + 1e-4
    assert I.hi == 5.0


def test_safe_subinterval_guard_sign_change():
    I = safe_subinterval([fn(lambda x: x)], 0.0, Interval(-2, 2), nonzero=[fn(lambda x: x - 1)])
    assert I.hi < 1.0 and I.hi == pytest.approx(1.0, abs=1e-4)


def test_safe_subinterval_bad_seed():
    with pytest.raises(SeedInvalid):
        safe_subinterval([fn(lambda x: np.log(x - 1))], 0.5, Interval(0, 5))


@given(st.floats(-1.4, 1.4), st.floats(0.1, 4), st.floats(0.1, 4))
def test_safe_subinterval_contains_seed(seed, left, right):
    req = Interval(seed - left, seed + right)
    I = safe_subinterval([fn(np.tan, hint="increasing")], seed, req)
    assert req.lo <= I.lo < seed < I.hi <= req.hi
    xs = I.sample(200)
    assert np.all(np.diff(np.tan(xs)) > 0)


# --- helpers ---------------------------------------------------------------------

def test_sum_fn_keeps_common_derivatives():
    I = Interval(0.5, 2.0)
    s = sum_fn([(2.0, catalog.get("exp", I)), (-1.0, catalog.get("ln", I))], I)
    x = 1.3
    assert s(x) == pytest.approx(2 * math.exp(x) - math.log(x))
    assert s.derivative(1)(x) == pytest.approx(2 * math.exp(x) - 1 / x)
    assert s.n_analytic >= 3


def test_realfn_scalar_and_array():
    f = fn(lambda x: x * 0 + 1.0)
    assert isinstance(f(0.2), float)
    assert f(np.zeros(3)).shape == (3,)
    assert isinstance(RealFn(np.sin, Interval(-1, 1))(0.1), float)

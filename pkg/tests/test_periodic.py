import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levyhom.errors import UnsupportedDimension, ValidationError
from levyhom.periodic import (UNBOUNDED, PeriodicCoefficient, eval_periodic, mean_value,
                              shifted_coefficient, wrap)
from levyhom.quadrature import QuadratureConfig, integrate_singular

E1 = PeriodicCoefficient.example1


def example1_mean(g):
    # closed-form antiderivative oracle
    return 2 * 4 ** (g - 1) * (2 - g) / (1 - g)


def test_eval_examples():
    assert eval_periodic(PeriodicCoefficient.constant(3), 17.25) == 3
    assert eval_periodic(E1(0.5), 1 / 16) == pytest.approx(4, rel=1e-15)
    assert eval_periodic(E1(0.5), 2.0625) == eval_periodic(E1(0.5), 1 / 16)
    assert eval_periodic(E1(0.5), 0.6) == pytest.approx(2, rel=1e-15)


def test_singular_point_returns_sentinel():
    assert eval_periodic(E1(0.5), 0.0) is UNBOUNDED
    assert eval_periodic(E1(0.5), 3.0) is UNBOUNDED
    assert eval_periodic(shifted_coefficient(E1(0.5), 0.5), 0.5) is UNBOUNDED


def test_construction_guards():
    for g in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValidationError):
            E1(g)
    with pytest.raises(ValidationError):
        PeriodicCoefficient.smooth_cosine(1.0, 1.0)
    with pytest.raises(ValidationError):
        PeriodicCoefficient.constant(0.0)


def test_wrap_tiny_negative():
    assert wrap(-1e-19) == 0.0
    assert 0.0 <= float(wrap(-1e-300)) < 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50, allow_nan=False), st.integers(-1000, 1000))
def test_periodicity_bit_identical(x, k):
    # x is a dyadic rational so that x + k is exact
    x = math.ldexp(round(math.ldexp(x, 20)), -20)
    for a in (E1(0.3), PeriodicCoefficient.smooth_cosine(0.4, 1.0),
              shifted_coefficient(E1(0.7), 0.5)):
        assert a(np.float64(x + k)) == a(np.float64(x))


def test_periodicity_thousand_pairs():
    rng = np.random.default_rng(7)
    x = np.ldexp(np.round(np.ldexp(rng.uniform(-10, 10, 1000), 30)), -30)
    k = rng.integers(-10**6, 10**6, 1000).astype(float)
    a = E1(0.45)
    np.testing.assert_array_equal(a(x + k), a(x))


def test_symmetry_about_half():
    x = np.linspace(0.001, 0.999, 777)
    a = E1(0.6)
    np.testing.assert_allclose(a(x), a(1 - x), rtol=1e-13)


@pytest.mark.parametrize("g", [0.5, 0.25, 0.8])
def test_mean_example1(g):
    assert mean_value(E1(g)) == pytest.approx(example1_mean(g), rel=1e-8)


def test_mean_example_values():
    assert mean_value(E1(0.5)) == pytest.approx(3.0, rel=1e-8)
    assert mean_value(E1(0.25)) == pytest.approx(2 * 4 ** -0.75 * (1.75 / 0.75), rel=1e-8)
    assert mean_value(PeriodicCoefficient.constant(2.5)) == 2.5
    assert mean_value(PeriodicCoefficient.smooth_cosine(0.5, 1.2)) == pytest.approx(1.2, rel=1e-12)


def test_tensor_mean():
    a = PeriodicCoefficient.tensor([PeriodicCoefficient.smooth_cosine(0.5, 1.0), E1(0.5)])
    assert mean_value(a) == pytest.approx(3.0, rel=1e-8)
    assert a(np.array([[0.25, 0.1]]))[0] == pytest.approx(1.0 * 0.1 ** -0.5)


@pytest.mark.parametrize("j", [1, 3, 6])
def test_scale_mean_identity(j):
    delta = 2.0 ** -j
    a = E1(0.4)
    sing = [0.0, delta]
    kinks = [delta / 4, 3 * delta / 4]
    out = integrate_singular(lambda h: a(h / delta), 0.0, delta, sing, QuadratureConfig(), kinks)
    assert out.value / delta == pytest.approx(example1_mean(0.4), rel=1e-8)


@pytest.mark.parametrize("g", [0.3, 0.45])
def test_lp_membership(g):
    a = E1(g)
    cfg = QuadratureConfig()
    ok = integrate_singular(lambda x: a(x) ** 2, 0, 1, [0.0, 1.0], cfg, a.kinks)
    assert ok.converged
    assert a.p_max == pytest.approx(1 / g)


@pytest.mark.parametrize("g,p", [(0.5, 2.0), (0.4, 3.0), (0.6, 2.0)])
def test_lp_divergent_at_or_above_pmax(g, p):
    a = E1(g)
    out = integrate_singular(lambda x: a(x) ** p, 0, 1, [0.0, 1.0], QuadratureConfig(), a.kinks)
    assert out.divergent


def test_shift():
    b = shifted_coefficient(E1(0.5), 0.5)
    assert float(b(0.5 + 1 / 16)) == pytest.approx(4.0)
    assert b.singular_points == (0.5,)
    c = PeriodicCoefficient.constant(2.0)
    assert shifted_coefficient(c, 0.3) == c
    with pytest.raises(UnsupportedDimension):
        shifted_coefficient(PeriodicCoefficient.constant(1.0, dim=2), 0.5)


def test_round_trip_dict():
    for a in (E1(0.3), PeriodicCoefficient.smooth_cosine(0.5, 1.0),
              PeriodicCoefficient.constant(2.0, 2), shifted_coefficient(E1(0.3), 0.5),
              PeriodicCoefficient.tensor([E1(0.2), PeriodicCoefficient.constant(1.0)])):
        assert PeriodicCoefficient.from_dict(a.to_dict()) == a

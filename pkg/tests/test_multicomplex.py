import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcfdtd import multicomplex as mc
from mcfdtd.multicomplex import ImaginaryIndex, Multicomplex

small = st.floats(-1.0, 1.0, allow_nan=False, allow_subnormal=False)


@st.composite
def element(draw, lo=0, hi=3):
    n = draw(st.integers(lo, hi))
    return Multicomplex(draw(st.lists(small, min_size=1 << n, max_size=1 << n)))


def test_basis_bookkeeping():
    assert mc.mask_of(1, 3) == 0b101
    assert mc.units_of(0b110) == (2, 3)
    assert mc.order_of(8) == 3
    with pytest.raises(ValueError):
        mc.order_of(6)
    assert str(ImaginaryIndex.of(1, 2)).endswith("12")
    with pytest.raises(ValueError):
        ImaginaryIndex(1 << mc.MAX_ORDER)


def test_unit_products():
    j = [Multicomplex.unit(k, 3) for k in (1, 2, 3)]
    for a in j:
        assert (a * a).real == -1.0
    j123 = j[0] * j[1] * j[2]
    assert j123.im(1, 2, 3) == 1.0
    # (j1 j2)^2 = +1
    assert ((j[0] * j[1]) ** 2).real == 1.0


def test_promotion_keeps_value():
    z = Multicomplex([1.5, -2.0])
    p = z.promote(3)
    assert p.order == 3 and p.real == 1.5 and p.im(1) == -2.0
    assert np.count_nonzero(p.coeffs) == 2
    assert z + Multicomplex.unit(2, 2) == Multicomplex([1.5, -2.0, 1.0, 0.0])


def test_real_elements_take_exact_paths():
    x = np.array([[0.7], [1.3]])
    arr = mc.promote(x, 2)
    assert np.array_equal(mc.sin(arr)[:, 0], np.sin(x[:, 0]))
    assert np.array_equal(mc.inv(arr)[:, 0], 1.0 / x[:, 0])
    assert not np.any(mc.inv(arr)[:, 1:])


def test_division_by_zero_raises():
    with pytest.raises(mc.NotInvertible):
        Multicomplex.from_real(0.0, 2).inv()
    with pytest.raises(mc.NotInvertible):
        mc.inv(np.zeros((3, 1)))


def test_huge_and_tiny_values_invert():
    for s in (1e-200, 1e200):
        z = Multicomplex([s, 0.5 * s, 0.25 * s, 0.0])
        one = z * z.inv()
        assert abs(one.real - 1.0) < 1e-15 and np.abs(one.coeffs[1:]).max() < 1e-15


@settings(max_examples=300, deadline=None)
@given(element(1, 3))
def test_exp_log_roundtrip(z):
    w = (z * 0.5 + 2.0).log().exp()
    assert np.allclose(w.coeffs, (z * 0.5 + 2.0).coeffs, atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(element(0, 3))
def test_sqrt_squares_back(z):
    y = z * 0.3 + 1.5
    r = y.sqrt()
    assert np.allclose((r * r).coeffs, y.coeffs, atol=1e-13)


@settings(max_examples=300, deadline=None)
@given(element(0, 3), st.integers(0, 5))
def test_integer_power_matches_repeated_product(z, p):
    ref = Multicomplex.from_real(1.0, z.order)
    for _ in range(p):
        ref = ref * z
    assert np.allclose((z**p).coeffs, ref.coeffs, atol=1e-13)


@settings(max_examples=300, deadline=None)
@given(small, small)
def test_order_one_log_matches_cmath(a, b):
    z = Multicomplex([a + 2.0, b])
    ref = cmath.log(complex(a + 2.0, b))
    got = z.log()
    assert abs(complex(got.real, got.im(1)) - ref) < 1e-13


def test_multicomplex_step_matches_high_precision_derivatives():
    # fourth derivative of exp(sin x) by the multicomplex step against mpmath
    x0, h = 0.4, 1e-3
    x = Multicomplex.from_real(x0, 4)
    for k in range(1, 5):
        x = x + Multicomplex.unit(k, 4, h)
    got = x.sin().exp().im(1, 2, 3, 4) / h**4
    ref = float(mpmath.diff(lambda t: mpmath.exp(mpmath.sin(t)), x0, 4))
    assert abs(got - ref) / abs(ref) < 1e-5
    # the truncation is O(h^2): a ten times smaller step is a hundred times closer
    x = Multicomplex.from_real(x0, 4)
    for k in range(1, 5):
        x = x + Multicomplex.unit(k, 4, h / 10)
    got2 = x.sin().exp().im(1, 2, 3, 4) / (h / 10) ** 4
    assert abs(got2 - ref) < abs(got - ref) / 50


def test_counting_tallies_schoolbook_product():
    a = mc.from_real(np.ones(10), 2)
    a[:, 3] = 0.5
    with mc.counting() as c:
        mc.mul(a, a)
    snap = c.snapshot()
    assert snap["muls"] == 10 * 16
    assert mc.op_counter() is None


def test_format_uses_unit_labels():
    s = str(Multicomplex([1.0, 0.0, 0.0, 2.0]))
    assert "j12" in s and s.startswith("1.0")
    assert math.isclose(float(Multicomplex([3.0, 0.0])), 3.0)

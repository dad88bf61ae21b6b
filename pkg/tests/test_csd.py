import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mcfdtd import csd
from mcfdtd.multicomplex import Multicomplex


def test_request_validation_and_units():
    req = csd.DerivativeRequest(((0, 2), (1, 1)))
    assert req.order == 3
    assert req.units() == {0: (1, 2), 1: (3,)}
    assert req.steps == (1e-5, 1e-5)
    assert csd.DerivativeRequest(((0, 1),)).steps == (1e-10,)
    for bad in [((0, 0),), ((0, 1), (0, 1)), ((0, 9),), ((0, -1),)]:
        with pytest.raises(ValueError):
            csd.DerivativeRequest(bad)
    with pytest.raises(ValueError):
        csd.DerivativeRequest(((0, 1),), (0.0,))
    with pytest.raises(ValueError):
        csd.FdScheme("sideways", 1e-3)


def test_stub_derivatives_match_symbolic():
    x, lam = sp.symbols("x lam", positive=True)
    b = sp.tan(2 * sp.pi * x / lam)
    for l0, w in [(0.125, 1.0), (0.05, 0.7)]:
        ref = csd.stub_derivatives(l0, w)
        for k in (1, 2):
            exact = float(sp.diff(b, x, k).subs({x: l0, lam: w}))
            assert math.isclose(ref[k], exact, rel_tol=1e-14)
    assert math.isclose(csd.stub_derivatives(0.125)[1], 4 * math.pi, rel_tol=1e-15)
    assert math.isclose(csd.stub_derivatives(0.125)[2], 16 * math.pi**2, rel_tol=1e-14)


def test_zeta_expansion_is_the_j1j2_part_over_h_squared():
    for h in (1e-1, 1e-3, 1e-6):
        x = Multicomplex.from_real(2 * math.pi * 0.125, 2)
        x = x + Multicomplex.unit(1, 2, 2 * math.pi * h) + Multicomplex.unit(2, 2, 2 * math.pi * h)
        direct = x.tan().im(1, 2) / h**2
        assert math.isclose(direct, csd.zeta_second_derivative(0.125, h), rel_tol=1e-12)


def test_mixed_partial_of_two_variable_function():
    f = lambda x, y: (x * y).sin() * x.exp()  # noqa: E731
    x0, y0 = 0.3, 0.7
    X, Y = sp.symbols("X Y")
    expr = sp.sin(X * Y) * sp.exp(X)
    req = csd.DerivativeRequest(((0, 2), (1, 1)), (1e-4, 1e-4))
    got = csd.csd_derivative(f, [x0, y0], req)
    ref = float(sp.diff(expr, X, 2, Y, 1).subs({X: x0, Y: y0}))
    assert math.isclose(got, ref, rel_tol=1e-7)


def test_csd_error_has_no_cancellation_floor():
    rows = csd.error_sweep(csd.stub_susceptance, 0.125, 4 * math.pi, "csd", [1e-8, 1e-12, 1e-20, 1e-100])
    assert all(e < 1e-13 for _, e, _ in rows)


def test_finite_difference_orders():
    exact = csd.stub_derivatives(0.1)
    fwd = csd.error_sweep(csd.stub_susceptance, 0.1, exact[1], "forward", [1e-2, 1e-3, 1e-4])
    ctr = csd.error_sweep(csd.stub_susceptance, 0.1, exact[1], "centered", [1e-2, 1e-3, 1e-4])
    assert abs(csd.log_slope(fwd) - 1) < 0.1
    assert abs(csd.log_slope(ctr) - 2) < 0.1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 10_000))
def test_centered_stencils_are_exact_on_polynomials(orders, seed):
    # the first truncation term involves the (m+2)-th derivative, so degree m+1 is exact
    rng = np.random.default_rng(seed)
    coeffs = [rng.normal(size=m + 2) for m in orders]
    x0 = rng.uniform(-1, 1, size=len(orders))
    h = 0.25
    approx = sum(w * math.prod(np.polyval(c, x + o * h) for c, x, o in zip(coeffs, x0, off))
                 for off, w in csd.centered_stencil(orders)) / h ** sum(orders)
    exact = math.prod(np.polyval(np.polyder(c, m), x) for c, m, x in zip(coeffs, orders, x0))
    assert math.isclose(approx, exact, rel_tol=1e-9, abs_tol=1e-9)


def test_sweep_csv_roundtrips_exact_decimals():
    rows = [(1e-3, 0.1 + 0.2, "csd")]
    text = csd.sweep_csv(rows, ["artifact test"])
    lines = text.splitlines()
    assert lines[0] == "# artifact test" and lines[1] == "h,abs_error,method"
    assert float(lines[2].split(",")[1]) == 0.1 + 0.2

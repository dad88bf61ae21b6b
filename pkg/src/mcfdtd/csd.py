"""Complex-step, multicomplex-step and finite-difference derivatives of scalar functions.

Functions passed to :func:`csd_derivative` must accept :class:`Multicomplex`
arguments (use its methods such as ``x.tan()``).  The finite-difference
routines call the same function with order-0 multicomplex values, so a single
definition serves both families.

Unit assignment is part of the public contract: the first requested parameter
with order ``m1`` receives units ``j1..j_m1``, the next ``j_(m1+1)..`` and so on.
"""
from __future__ import annotations

import csv
import io
import math
import numbers
from dataclasses import dataclass

from . import multicomplex as mc
from .multicomplex import Multicomplex

FD_KINDS = ("forward", "backward", "centered", "centered-second")
METHODS = ("csd", "mcsd") + FD_KINDS

CSV_HEADER = ("h", "abs_error", "method")


def default_step(order: int) -> float:
    """1e-10 for first-order complex steps, 1e-5 per unit above that."""
    return 1e-10 if order == 1 else 1e-5


@dataclass(frozen=True)
class DerivativeRequest:
    """Partial derivative ``d^P f / d xi_a^m_a ...`` with one step per parameter.

    ``multi_index`` pairs a parameter position (index into the nominal point)
    with its derivative order.  ``steps`` defaults per :func:`default_step`.
    """

    multi_index: tuple
    steps: tuple | None = None

    def __post_init__(self):
        mi = tuple((int(p), int(m)) for p, m in self.multi_index)
        if any(m < 0 for _, m in mi):
            raise ValueError("derivative orders must be non-negative")
        if len({p for p, _ in mi}) != len(mi):
            raise ValueError("each parameter may appear once in the multi-index")
        total = sum(m for _, m in mi)
        if total < 1:
            raise ValueError("at least one derivative is required")
        if total > mc.MAX_ORDER:
            raise ValueError(f"total order {total} exceeds the supported {mc.MAX_ORDER}")
        steps = self.steps
        if steps is None:
            steps = tuple(default_step(total) for _ in mi)
        steps = tuple(float(h) for h in steps)
        if len(steps) != len(mi):
            raise ValueError("one step per parameter in the multi-index")
        if any(not h > 0 for h in steps):
            raise ValueError("steps must be positive")
        object.__setattr__(self, "multi_index", mi)
        object.__setattr__(self, "steps", steps)

    @property
    def order(self) -> int:
        return sum(m for _, m in self.multi_index)

    def units(self) -> dict:
        """Parameter position -> tuple of assigned imaginary units."""
        out, nxt = {}, 1
        for p, m in self.multi_index:
            out[p] = tuple(range(nxt, nxt + m))
            nxt += m
        return out


@dataclass(frozen=True)
class FdScheme:
    kind: str
    h: float

    def __post_init__(self):
        if self.kind not in FD_KINDS:
            raise ValueError(f"unknown scheme {self.kind!r}; choose from {FD_KINDS}")
        if not self.h > 0:
            raise ValueError("the step must be positive")

    @property
    def derivative_order(self) -> int:
        return 2 if self.kind == "centered-second" else 1


def _as_value(x):
    if isinstance(x, Multicomplex):
        return x
    if isinstance(x, numbers.Real):
        return Multicomplex.from_real(float(x))
    raise TypeError(f"function returned {type(x).__name__}, expected a real or Multicomplex")


def csd_derivative(f, nominal, req: DerivativeRequest) -> float:
    """Multicomplex-step estimate ``Im_S f(xi + sum h_k J_k) / prod h_k**m_k``.

    ``f`` is called with one :class:`Multicomplex` per nominal coordinate.
    """
    nominal = [float(v) for v in nominal]
    order = req.order
    units = req.units()
    args = []
    for pos, x0 in enumerate(nominal):
        args.append(Multicomplex.from_real(x0, order))
    for (pos, m), h in zip(req.multi_index, req.steps):
        if not 0 <= pos < len(nominal):
            raise IndexError(f"parameter {pos} outside the nominal point")
        for u in units[pos]:
            args[pos] = args[pos] + Multicomplex.unit(u, order, h)
    value = _as_value(f(*args))
    every = tuple(u for us in units.values() for u in us)
    denom = math.prod(h**m for (_, m), h in zip(req.multi_index, req.steps))
    return value.im(*every) / denom


def _real_call(f, x):
    return _as_value(f(Multicomplex.from_real(x))).real


def fd_derivative(f, nominal: float, scheme: FdScheme) -> float:
    """Textbook difference stencils; ``f`` is evaluated on real points only."""
    x, h = float(nominal), scheme.h
    if scheme.kind == "forward":
        return (_real_call(f, x + h) - _real_call(f, x)) / h
    if scheme.kind == "backward":
        return (_real_call(f, x) - _real_call(f, x - h)) / h
    if scheme.kind == "centered":
        return (_real_call(f, x + h) - _real_call(f, x - h)) / (2 * h)
    return (_real_call(f, x + h) - 2 * _real_call(f, x) + _real_call(f, x - h)) / (h * h)


_CENTERED_1D = {
    1: ((1, 0.5), (-1, -0.5)),
    2: ((1, 1.0), (0, -2.0), (-1, 1.0)),
    3: ((2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)),
}


def centered_stencil(orders):
    """Offsets (in units of h, one per parameter) and weights of the tensor-product
    centered stencil for ``d^(m1 + m2 + ...) / d xi1^m1 d xi2^m2 ...``."""
    stencil = [((), 1.0)]
    for m in orders:
        if m not in _CENTERED_1D:
            raise ValueError(f"no centered stencil of order {m}")
        stencil = [(off + (o,), w * v) for off, w in stencil for o, v in _CENTERED_1D[m]]
    return stencil


def error_sweep(f, nominal: float, analytic: float, method: str, h_values, order: int | None = None):
    """Rows ``(h, abs_error, method)`` for a single-parameter function.

    ``order`` selects the derivative for ``mcsd`` (default 2); ``csd`` is
    always first order and the finite-difference kinds fix their own order.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    rows = []
    for h in h_values:
        h = float(h)
        if method == "csd":
            est = csd_derivative(f, [nominal], DerivativeRequest(((0, 1),), (h,)))
        elif method == "mcsd":
            k = 2 if order is None else order
            est = csd_derivative(f, [nominal], DerivativeRequest(((0, k),), (h,)))
        else:
            est = fd_derivative(f, nominal, FdScheme(method, h))
        rows.append((h, abs(est - analytic), method))
    return rows


def sweep_csv(rows, header_lines=()) -> str:
    """Exact-decimal CSV (``repr`` of every float); optional ``#`` header lines first."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for h, err, method in rows:
        w.writerow([repr(float(h)), repr(float(err)), method])
    return buf.getvalue()


def log_slope(rows) -> float:
    """Least-squares slope of log10(abs_error) against log10(h)."""
    xs = [math.log10(h) for h, e, _ in rows if e > 0]
    ys = [math.log10(e) for h, e, _ in rows if e > 0]
    if len(xs) < 2:
        raise ValueError("need at least two nonzero errors")
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


# ---------------------------------------------------------------------------
# shorted-stub susceptance b(l) = tan(2 pi l / wavelength)

def stub_susceptance(length, wavelength: float = 1.0):
    arg = (2.0 * math.pi / wavelength) * length
    if isinstance(arg, Multicomplex):
        return arg.tan()
    return math.tan(arg)


def stub_derivatives(length: float, wavelength: float = 1.0) -> dict:
    """Closed-form first and second derivatives of the stub susceptance."""
    k = 2.0 * math.pi / wavelength
    c = math.cos(k * length)
    s = math.sin(k * length)
    return {1: k / c**2, 2: 2.0 * k * k * s / c**3}


def zeta_second_derivative(length: float, h: float, wavelength: float = 1.0) -> float:
    """Bicomplex second-derivative estimate written with ordinary complex numbers.

    ``tan`` at ``alpha + (j1 + j2) beta`` splits into ``(z1 + j2 z2)/(z3 + j2 z4)``;
    the ``j1 j2`` part of the quotient is ``Im((z2 z3 - z1 z4)/(z3**2 + z4**2))``.
    """
    alpha = 2.0 * math.pi * length / wavelength
    beta = 2.0 * math.pi * h / wavelength
    sa, ca = math.sin(alpha), math.cos(alpha)
    ch2, sh2, s2b = math.cosh(beta) ** 2, math.sinh(beta) ** 2, math.sinh(2 * beta)
    z1 = complex(sa * ch2, 0.5 * ca * s2b)
    z2 = complex(0.5 * ca * s2b, -sa * sh2)
    z3 = complex(ca * ch2, -0.5 * sa * s2b)
    z4 = complex(-0.5 * sa * s2b, -ca * sh2)
    q = (z2 * z3 - z1 * z4) / (z3 * z3 + z4 * z4)
    return q.imag / (h * h)

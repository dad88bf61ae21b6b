"""Multicomplex (C^n) arithmetic.

A multicomplex number of order ``n`` carries ``2**n`` real coefficients.  The
coefficient at bitmask ``S`` multiplies the basis element ``prod(j_k for k in S)``
(bit ``k-1`` set means unit ``j_k`` is present, mask 0 is the real part).  The
units commute and each squares to -1, so basis products follow

    e_S * e_T = (-1)**|S & T| * e_(S ^ T)

Two layers live here:

* array kernels (``mul``, ``inv``, ``sin``, ...) that act on numpy arrays whose
  *last* axis holds the coefficients.  They accept real or complex dtypes; a
  complex dtype adds one more commuting unit (used for spectra).
* :class:`Multicomplex`, an immutable scalar wrapper used by the differentiation
  helpers and oracles.

The recursive definition ``z = z1 + j_n z2`` maps onto the flat layout as
``z1 = coeffs[:half]`` and ``z2 = coeffs[half:]``.
"""
from __future__ import annotations

import numbers
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "MAX_ORDER",
    "SINGULAR_TOL",
    "NotInvertible",
    "ImaginaryIndex",
    "Multicomplex",
    "OpCounter",
    "counting",
    "op_counter",
    "order_of",
    "promote",
    "mask_of",
    "add",
    "sub",
    "mul",
    "inv",
    "div",
    "exp",
    "sin",
    "cos",
    "tan",
    "sinh",
    "cosh",
    "sqrt",
    "log",
    "im_part",
    "from_real",
    "format_coeffs",
]

MAX_ORDER = 8
SINGULAR_TOL = 1e-30


class NotInvertible(ArithmeticError):
    """Raised when a multicomplex value has no inverse (zero divisor or zero)."""


# ---------------------------------------------------------------------------
# operation counting

class OpCounter:
    """Tally of real additions/subtractions and multiplications.

    ``adds`` counts the additions that appear in the algorithm being evaluated
    (stencil sums, componentwise adds).  Additions that only exist inside a
    multicomplex product (accumulating the ``2**n`` partial products of a slot)
    are tallied separately in ``product_adds``.
    """

    __slots__ = ("adds", "muls", "product_adds")

    def __init__(self):
        self.reset()

    def reset(self):
        self.adds = 0
        self.muls = 0
        self.product_adds = 0

    def snapshot(self) -> dict:
        return {"adds": self.adds, "muls": self.muls, "product_adds": self.product_adds}

    def __repr__(self):
        return f"OpCounter(adds={self.adds}, muls={self.muls}, product_adds={self.product_adds})"


_local = threading.local()


def op_counter() -> OpCounter | None:
    """Return the active counter of the calling thread, or None."""
    return getattr(_local, "counter", None)


@contextmanager
def counting():
    """Enable operation counting for the current thread.

    >>> with counting() as c:
    ...     _ = Multicomplex([1, 2]) * Multicomplex([3, 4])
    >>> c.muls
    4
    """
    prev = getattr(_local, "counter", None)
    counter = OpCounter()
    _local.counter = counter
    try:
        yield counter
    finally:
        _local.counter = prev


def _tally(adds=0, muls=0, product_adds=0):
    c = getattr(_local, "counter", None)
    if c is not None:
        c.adds += int(adds)
        c.muls += int(muls)
        c.product_adds += int(product_adds)


# ---------------------------------------------------------------------------
# basis helpers

def order_of(ncoef: int) -> int:
    n = int(ncoef).bit_length() - 1
    if ncoef < 1 or (1 << n) != ncoef:
        raise ValueError(f"coefficient count {ncoef} is not a power of two")
    if n > MAX_ORDER:
        raise ValueError(f"order {n} exceeds the maximum supported order {MAX_ORDER}")
    return n


def mask_of(*units: int) -> int:
    """Bitmask for a set of 1-based imaginary units, e.g. ``mask_of(1, 2) == 3``."""
    m = 0
    for u in units:
        if u < 1 or u > MAX_ORDER:
            raise ValueError(f"imaginary unit j{u} out of range 1..{MAX_ORDER}")
        m |= 1 << (u - 1)
    return m


def units_of(mask: int) -> tuple[int, ...]:
    return tuple(k + 1 for k in range(MAX_ORDER) if mask >> k & 1)


@lru_cache(maxsize=None)
def sign_table(ncoef: int) -> np.ndarray:
    """``sign_table(nc)[S, T] == (-1)**popcount(S & T)``."""
    s = np.arange(ncoef)
    both = s[:, None] & s[None, :]
    pop = np.zeros_like(both)
    for k in range(order_of(ncoef)):
        pop += (both >> k) & 1
    out = np.where(pop % 2 == 0, 1, -1).astype(np.int8)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _lmul_tables(ncoef: int):
    # L[U, T] = sign(S, T) * a[S] with S = U ^ T, so (L @ b)[U] = sum_T a[U^T] b[T] sign
    u = np.arange(ncoef)
    idx = u[:, None] ^ u[None, :]
    sgn = sign_table(ncoef)[idx, u[None, :]].astype(float)
    idx.setflags(write=False)
    sgn.setflags(write=False)
    return idx, sgn


@dataclass(frozen=True)
class ImaginaryIndex:
    """Which multi-imaginary part to read, as a bitmask over units."""

    mask: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >= 1 << MAX_ORDER:
            raise ValueError(f"mask {self.mask} out of range")

    @classmethod
    def of(cls, *units: int) -> "ImaginaryIndex":
        return cls(mask_of(*units))

    @property
    def units(self) -> tuple[int, ...]:
        return units_of(self.mask)

    def __str__(self):
        return "Re" if self.mask == 0 else "Im" + "".join(str(u) for u in self.units)


# ---------------------------------------------------------------------------
# array kernels (coefficients on the last axis)

def _ncoef(a) -> int:
    return np.shape(a)[-1]


def promote(a, order: int) -> np.ndarray:
    """Zero-pad the coefficient axis of ``a`` up to ``2**order`` entries."""
    a = np.asarray(a)
    nc = a.shape[-1]
    target = 1 << order
    if nc == target:
        return a
    if nc > target:
        raise ValueError(f"cannot demote order {order_of(nc)} to {order}")
    out = np.zeros(a.shape[:-1] + (target,), dtype=np.result_type(a.dtype, float))
    out[..., :nc] = a
    return out


def _common(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    na, nb = a.shape[-1], b.shape[-1]
    if na == nb:
        return a, b
    n = order_of(max(na, nb))
    return promote(a, n), promote(b, n)


def from_real(x, order: int) -> np.ndarray:
    """Embed real value(s) ``x`` as multicomplex arrays of the given order."""
    if order < 0:
        raise ValueError("order must be >= 0")
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds the maximum supported order {MAX_ORDER}")
    x = np.asarray(x)
    out = np.zeros(x.shape + (1 << order,), dtype=np.result_type(x.dtype, float))
    out[..., 0] = x
    return out


def add(a, b) -> np.ndarray:
    a, b = _common(a, b)
    out = a + b
    _tally(adds=out.size)
    return out


def sub(a, b) -> np.ndarray:
    a, b = _common(a, b)
    out = a - b
    _tally(adds=out.size)
    return out


def mul(a, b) -> np.ndarray:
    """Multicomplex product, broadcasting over the leading axes."""
    a = np.asarray(a)
    b = np.asarray(b)
    na, nb = a.shape[-1], b.shape[-1]
    if na == 1 or nb == 1:
        out = a * b
        _tally(muls=out.size)
        return out
    a, b = _common(a, b)
    nc = a.shape[-1]
    idx, sgn = _lmul_tables(nc)
    lmat = a[..., idx] * sgn
    out = np.matmul(lmat, b[..., None])[..., 0]
    ncell = out.size // nc
    _tally(muls=ncell * nc * nc, product_adds=ncell * nc * (nc - 1))
    return out


def _reciprocal_base(x):
    if np.any(np.abs(x) < SINGULAR_TOL):
        raise NotInvertible("multicomplex value is not invertible (zero divisor)")
    return 1.0 / x


def _inv_unit(a):
    nc = a.shape[-1]
    if nc == 1:
        out = _reciprocal_base(a)
        _tally(muls=out.size)
        return out
    h = nc // 2
    z1, z2 = a[..., :h], a[..., h:]
    den = add(mul(z1, z1), mul(z2, z2))
    r = _inv_unit(den)
    return np.concatenate([mul(z1, r), -mul(z2, r)], axis=-1)


def inv(a) -> np.ndarray:
    """Multicomplex inverse via ``1/(z1 + j z2) = (z1 - j z2) / (z1**2 + z2**2)``.

    Each value is first scaled by a power of two to unit magnitude, so the
    singularity tolerance applies to relative, not absolute, denominators.

    Raises
    ------
    NotInvertible
        If any recursive denominator vanishes.  Orders >= 2 contain zero
        divisors such as ``1 + j1 j2``.
    """
    a = np.asarray(a)
    if a.shape[-1] == 1:
        if np.any(a == 0):
            raise NotInvertible("division by zero")
        _tally(muls=a.size)
        return 1.0 / a
    real = ~np.any(a[..., 1:] != 0, axis=-1)
    if real.all():
        # exactly the real reciprocal, so unperturbed values match order 0 bit for bit
        if np.any(a[..., 0] == 0):
            raise NotInvertible("division by zero")
        out = np.zeros_like(a, dtype=np.result_type(a.dtype, float))
        out[..., 0] = 1.0 / a[..., 0]
        _tally(muls=real.size)
        return out
    top = np.abs(a).max(axis=-1, keepdims=True)
    scale = np.exp2(-np.frexp(top)[1].astype(float))
    out = _inv_unit(a * scale) * scale
    if real.any():
        out[real] = 0.0
        out[real, 0] = 1.0 / a[real, 0]
    return out


def div(a, b) -> np.ndarray:
    b = np.asarray(b)
    if b.shape[-1] == 1:
        return mul(a, _reciprocal_base(b))
    return mul(a, inv(b))


def _split(a):
    h = a.shape[-1] // 2
    return a[..., :h], a[..., h:]


def _join(z1, z2):
    return np.concatenate([z1, z2], axis=-1)


def _as_complex(a):
    return a[..., 0] + 1j * a[..., 1]


def _from_complex(z):
    return np.stack([z.real, z.imag], axis=-1)


def _leaf(a):
    """True when the array can be handed to numpy's own complex/real functions."""
    nc = a.shape[-1]
    return nc == 1 or (nc == 2 and not np.iscomplexobj(a))


def _leaf_apply(fn, a):
    if a.shape[-1] == 1:
        return fn(a)
    out = _from_complex(fn(_as_complex(a)))
    # real inputs go through the real routine so they match order 0 exactly
    real = a[..., 1] == 0
    if real.any():
        out[real, 0] = fn(a[real, 0])
        out[real, 1] = 0.0
    return out


def _sincos(a):
    if _leaf(a):
        return _leaf_apply(np.sin, a), _leaf_apply(np.cos, a)
    z1, z2 = _split(a)
    s1, c1 = _sincos(z1)
    sh2, ch2 = _sinhcosh(z2)
    s = _join(mul(s1, ch2), mul(c1, sh2))
    c = _join(mul(c1, ch2), -mul(s1, sh2))
    return s, c


def _sinhcosh(a):
    if _leaf(a):
        return _leaf_apply(np.sinh, a), _leaf_apply(np.cosh, a)
    z1, z2 = _split(a)
    sh1, ch1 = _sinhcosh(z1)
    s2, c2 = _sincos(z2)
    sh = _join(mul(sh1, c2), mul(ch1, s2))
    ch = _join(mul(ch1, c2), mul(sh1, s2))
    return sh, ch


def sin(a):
    return _sincos(np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float)))[0]


def cos(a):
    return _sincos(np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float)))[1]


def sinh(a):
    return _sinhcosh(np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float)))[0]


def cosh(a):
    return _sinhcosh(np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float)))[1]


def tan(a):
    a = np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float))
    if _leaf(a):
        return _leaf_apply(np.tan, a)
    s, c = _sincos(a)
    return div(s, c)


def exp(a):
    a = np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float))
    if _leaf(a):
        return _leaf_apply(np.exp, a)
    z1, z2 = _split(a)
    e1 = exp(z1)
    s2, c2 = _sincos(z2)
    return _join(mul(e1, c2), mul(e1, s2))


def sqrt(a):
    """Principal square root, continued from the real axis.

    Uses ``w1 = sqrt((z1 + r) / 2)``, ``w2 = z2 / (2 w1)`` with
    ``r = sqrt(z1**2 + z2**2)``; valid whenever those intermediate values are
    invertible, which holds near the positive real axis.
    """
    a = np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float))
    nc = a.shape[-1]
    if nc == 1:
        if not np.iscomplexobj(a) and np.any(a < 0):
            raise ValueError("square root of a negative real")
        return np.sqrt(a)
    if _leaf(a):
        return _leaf_apply(np.sqrt, a)
    z1, z2 = _split(a)
    r = sqrt(add(mul(z1, z1), mul(z2, z2)))
    w1 = sqrt(0.5 * add(z1, r))
    w2 = mul(z2, inv(2.0 * w1))
    return _join(w1, w2)


def log(a, max_terms: int = 400):
    """Natural logarithm for values with a positive real coefficient.

    ``log z = log x0 + 2 atanh(u)`` with ``u = (z - x0) / (z + x0)``; the
    series in ``u`` converges quickly because ``u`` only carries the small
    imaginary parts.
    """
    a = np.asarray(a, dtype=np.result_type(np.asarray(a).dtype, float))
    if a.shape[-1] == 1 or np.iscomplexobj(a):
        if a.shape[-1] == 1:
            return np.log(a)
        raise TypeError("log is defined for real-coefficient multicomplex arrays")
    x0 = a[..., :1]
    if np.any(x0 <= 0):
        raise ValueError("log needs a positive real part")
    rest = a.copy()
    rest[..., 0] = 0.0
    u = div(rest, a + x0 * (np.arange(a.shape[-1]) == 0))
    u2 = mul(u, u)
    term = u
    total = u.copy()
    scale = np.abs(u).max(initial=0.0)
    for k in range(3, 2 * max_terms, 2):
        term = mul(term, u2)
        inc = term / k
        total = total + inc
        if np.abs(inc).max(initial=0.0) <= 1e-18 * max(scale, 1e-300):
            break
    else:
        raise ArithmeticError("log series did not converge")
    out = 2.0 * total
    out[..., :1] += np.log(x0)
    return out


def im_part(a, idx) -> np.ndarray:
    """Coefficient(s) at the given mask; mask 0 is the real part."""
    mask = idx.mask if isinstance(idx, ImaginaryIndex) else int(idx)
    a = np.asarray(a)
    if mask < 0 or mask >= a.shape[-1]:
        raise IndexError(f"mask {mask} is out of range for order {order_of(a.shape[-1])}")
    return a[..., mask]


def format_coeffs(coeffs) -> str:
    parts = []
    for mask, v in enumerate(np.asarray(coeffs).tolist()):
        if mask == 0:
            parts.append(f"{v!r}")
        else:
            parts.append(f"{v!r}·j" + "".join(str(u) for u in units_of(mask)))
    return " + ".join(parts)


# ---------------------------------------------------------------------------
# scalar wrapper

class Multicomplex:
    """Immutable multicomplex scalar.

    Parameters
    ----------
    coeffs : sequence of float
        ``2**n`` real coefficients indexed by unit bitmask.

    Examples
    --------
    >>> j1, j2 = Multicomplex.unit(1, 2), Multicomplex.unit(2, 2)
    >>> (j1 * j1).real
    -1.0
    >>> (j1 * j2).im(1, 2)
    1.0
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float).reshape(-1)
        order_of(c.size)
        c.setflags(write=False)
        self._c = c

    @classmethod
    def _wrap(cls, arr):
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=float)
        arr.setflags(write=False)
        obj._c = arr
        return obj

    @classmethod
    def from_real(cls, x: float, order: int = 0) -> "Multicomplex":
        return cls._wrap(from_real(float(x), order))

    @classmethod
    def unit(cls, k: int, order: int, scale: float = 1.0) -> "Multicomplex":
        """``scale * j_k`` in C^order."""
        if not 1 <= k <= order:
            raise ValueError(f"unit j{k} does not exist in order {order}")
        c = np.zeros(1 << order)
        c[1 << (k - 1)] = scale
        return cls._wrap(c)

    @property
    def order(self) -> int:
        return order_of(self._c.size)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def real(self) -> float:
        return float(self._c[0])

    def im(self, *units: int) -> float:
        """``z.im(1, 2)`` is Im12(z); ``z.im()`` is the real part."""
        return float(im_part(self._c, mask_of(*units)))

    def im_part(self, idx) -> float:
        return float(im_part(self._c, idx))

    def promote(self, order: int) -> "Multicomplex":
        return self._wrap(promote(self._c, order))

    # arithmetic -------------------------------------------------------------
    @staticmethod
    def _coerce(other):
        if isinstance(other, Multicomplex):
            return other._c
        if isinstance(other, numbers.Real):
            return np.array([float(other)])
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(add(self._c, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(sub(self._c, o))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(sub(o, self._c))

    def __neg__(self):
        return self._wrap(-self._c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(mul(self._c, o))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(div(self._c, o))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._wrap(div(o, self._c))

    def __pow__(self, p):
        if not isinstance(p, numbers.Integral):
            return NotImplemented
        if p < 0:
            return self.inv() ** (-p)
        result = Multicomplex.from_real(1.0, self.order)
        base = self
        while p:
            if p & 1:
                result = result * base
            base = base * base
            p >>= 1
        return result

    def inv(self) -> "Multicomplex":
        return self._wrap(inv(self._c))

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        a, b = _common(self._c, o)
        return bool(np.array_equal(a, b))

    __hash__ = None

    def __float__(self):
        if np.any(self._c[1:] != 0):
            raise TypeError("multicomplex value has nonzero imaginary parts")
        return self.real

    def __str__(self):
        return format_coeffs(self._c)

    def __repr__(self):
        return f"Multicomplex({format_coeffs(self._c)})"

    # elementary functions -----------------------------------------------------
    def sin(self):
        return self._wrap(sin(self._c))

    def cos(self):
        return self._wrap(cos(self._c))

    def tan(self):
        return self._wrap(tan(self._c))

    def exp(self):
        return self._wrap(exp(self._c))

    def sinh(self):
        return self._wrap(sinh(self._c))

    def cosh(self):
        return self._wrap(cosh(self._c))

    def log(self):
        return self._wrap(log(self._c))

    def sqrt(self):
        return self._wrap(sqrt(self._c))

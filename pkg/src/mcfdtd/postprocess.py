"""Spectra, S-parameters, Taylor surrogates, the cavity oracle and error norms.

Spectral values are numpy complex arrays whose last axis holds multicomplex
coefficients: the ``1j`` of numpy is the Fourier unit and stays separate from
the perturbation units ``j1..jn``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import multicomplex as mc
from .fdtd.grid import C0

DB = 20.0 / math.log(10.0)


# ---------------------------------------------------------------------------
# spectra

@dataclass
class Spectrum:
    freqs: np.ndarray
    values: np.ndarray

    def im_part(self, idx) -> np.ndarray:
        return mc.im_part(self.values, idx)


def frequency_grid(f_max: float = 20e9, df: float = 10e6, f_min: float = 0.0) -> np.ndarray:
    n = int(round((f_max - f_min) / df))
    return f_min + df * np.arange(n + 1)


def dft(series, dt: float, freqs, chunk: int = 256) -> Spectrum:
    """``X(f) = dt * sum_n x_n exp(-i 2 pi f n dt)`` for each coefficient plane."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("a spectrum needs at least two samples")
    freqs = np.asarray(freqs, dtype=float)
    t = np.arange(x.shape[0]) * dt
    out = np.empty((freqs.size, x.shape[1]), dtype=complex)
    for s in range(0, freqs.size, chunk):
        f = freqs[s:s + chunk]
        kernel = np.exp(-2j * np.pi * np.outer(f, t))
        out[s:s + chunk] = dt * (kernel @ x)
    return Spectrum(freqs, out)


def magnitude(values) -> np.ndarray:
    """``|S|`` as a real multicomplex array (Fourier unit eliminated)."""
    values = np.asarray(values)
    sq = mc.add(mc.mul(values.real, values.real), mc.mul(values.imag, values.imag))
    return mc.sqrt(sq)


def to_db(mag) -> np.ndarray:
    return DB * mc.log(mag)


@dataclass
class SParameters:
    freqs: np.ndarray
    s11: np.ndarray
    s21: np.ndarray

    def get(self, which: str) -> np.ndarray:
        return {"S11": self.s11, "S21": self.s21}[which]


def extract_sparams(incident, reflected_port, transmitted_port, dt: float, freqs, floor: float = 1e-8) -> SParameters:
    """S11 and S21 from port-voltage series of a total run and a matched reference.

    ``incident`` is the port-1 voltage of the reference through-line; the
    reflected wave is the total port-1 voltage minus it.
    """
    vi = dft(incident, dt, freqs).values
    v1 = dft(reflected_port, dt, freqs).values
    v2 = dft(transmitted_port, dt, freqs).values
    mag = np.abs(vi[:, 0])
    low = mag < floor * mag.max()
    if low.any():
        f_bad = np.asarray(freqs)[low]
        raise ValueError(f"incident spectrum below the dynamic-range floor at {f_bad[0] / 1e9:.3f} GHz")
    inv_vi = mc.inv(vi)
    nc = max(v1.shape[-1], vi.shape[-1])
    order = mc.order_of(nc)
    s11 = mc.mul(mc.sub(mc.promote(v1, order), mc.promote(vi, order)), inv_vi)
    s21 = mc.mul(mc.promote(v2, order), inv_vi)
    return SParameters(np.asarray(freqs), s11, s21)


def relative_spread(curves) -> float:
    """``max_f (max_h - min_h) / max_{f,h} |value|`` over a stack of curves."""
    curves = np.asarray(curves, dtype=float)
    scale = np.abs(curves).max()
    if scale == 0.0:
        return 0.0
    return float((curves.max(axis=0) - curves.min(axis=0)).max() / scale)


# ---------------------------------------------------------------------------
# Taylor surrogate

@dataclass
class TaylorModel:
    """Polynomial in ``(xi - nominal)`` with coefficients ``d^k F / k!``."""

    nominal: float
    coefficients: list
    validity: tuple | None = None

    @classmethod
    def from_derivatives(cls, nominal: float, derivatives) -> "TaylorModel":
        derivatives = list(derivatives)
        if not derivatives:
            raise ValueError("at least the order-0 value is required")
        if any(d is None for d in derivatives):
            missing = [k for k, d in enumerate(derivatives) if d is None]
            raise ValueError(f"missing derivative orders {missing}")
        coefs = [np.asarray(d) / math.factorial(k) for k, d in enumerate(derivatives)]
        return cls(float(nominal), coefs)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def truncated(self, order: int) -> "TaylorModel":
        return TaylorModel(self.nominal, self.coefficients[: order + 1], self.validity)

    def evaluate(self, xi):
        dx = np.asarray(xi, dtype=float) - self.nominal
        acc = np.zeros(np.broadcast_shapes(dx.shape, np.shape(self.coefficients[-1])), dtype=np.result_type(*self.coefficients, float))
        acc = acc + self.coefficients[-1]
        for c in reversed(self.coefficients[:-1]):
            acc = acc * dx + c
        return acc

    def effective_range(self, xi, reference, band: float, metric=None) -> float:
        """Largest ``r`` such that every reference point with ``|xi - nominal| <= r`` fits the band.

        ``metric`` maps ``(model, reference)`` values to a non-negative
        mismatch; the default is the absolute difference.
        """
        xi = np.asarray(xi, dtype=float)
        model = self.evaluate(xi)
        ref = np.asarray(reference)
        miss = np.abs(model - ref) if metric is None else np.asarray(metric(model, ref))
        dist = np.abs(xi - self.nominal)
        order = np.argsort(dist, kind="stable")
        best = 0.0
        for i in order:
            if miss[i] > band:
                break
            best = float(dist[i])
        return best


# ---------------------------------------------------------------------------
# cavity oracle

@dataclass(frozen=True)
class CavityOracle:
    """TE(m, n) standing wave in an air-filled a-by-b PEC cavity."""

    a: float
    b: float
    m: int = 1
    n: int = 1
    e0: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("cavity dimensions must be positive")

    @property
    def frequency(self) -> float:
        return 0.5 * C0 * math.hypot(self.m / self.a, self.n / self.b)

    def frequency_derivatives(self) -> dict:
        f = self.frequency
        a, b, m, n = self.a, self.b, self.m, self.n
        fa = -(C0**2) * m**2 / (4 * a**3 * f)
        fb = -(C0**2) * n**2 / (4 * b**3 * f)
        faa = (C0**2 * m**2 / 4) * (3 / (a**4 * f) + fa / (a**3 * f**2))
        fbb = (C0**2 * n**2 / 4) * (3 / (b**4 * f) + fb / (b**3 * f**2))
        fab = C0**2 * m**2 * fb / (4 * a**3 * f**2)
        return {"f": f, "a": fa, "b": fb, "aa": faa, "bb": fbb, "ab": fab}


def _mode_profile(k: int, x, length: float):
    """sin(k pi x / L) and its first two derivatives with respect to L at fixed x."""
    u = k * np.pi * x / length
    s, c = np.sin(u), np.cos(u)
    du = -k * np.pi * x / length**2
    ddu = 2 * k * np.pi * x / length**3
    return s, du * c, ddu * c - du**2 * s


def cavity_fields(oracle: CavityOracle, x, y, t) -> dict:
    """Ez and its first/second derivatives with respect to a and b at fixed (x, y, t)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = 1e-12 * max(oracle.a, oracle.b)
    if np.any(x < -tol) or np.any(x > oracle.a + tol) or np.any(y < -tol) or np.any(y > oracle.b + tol):
        raise ValueError("sample point outside the cavity")
    fd = oracle.frequency_derivatives()
    w = 2 * np.pi * fd["f"]
    t = np.asarray(t, dtype=float)
    wt = w * t
    cos_t, sin_t = np.cos(wt), np.sin(wt)
    p = 2 * np.pi * t
    T = cos_t
    Ta = -sin_t * p * fd["a"]
    Tb = -sin_t * p * fd["b"]
    Taa = -cos_t * (p * fd["a"]) ** 2 - sin_t * p * fd["aa"]
    Tbb = -cos_t * (p * fd["b"]) ** 2 - sin_t * p * fd["bb"]
    Tab = -cos_t * p**2 * fd["a"] * fd["b"] - sin_t * p * fd["ab"]
    X, Xa, Xaa = _mode_profile(oracle.m, x, oracle.a)
    Y, Yb, Ybb = _mode_profile(oracle.n, y, oracle.b)
    e0 = oracle.e0
    return {
        "Ez": e0 * X * Y * T,
        "Ez_a": e0 * (Xa * Y * T + X * Y * Ta),
        "Ez_b": e0 * (X * Yb * T + X * Y * Tb),
        "Ez_aa": e0 * (Xaa * Y * T + 2 * Xa * Y * Ta + X * Y * Taa),
        "Ez_bb": e0 * (X * Ybb * T + 2 * X * Yb * Tb + X * Y * Tbb),
        "Ez_ab": e0 * (Xa * Yb * T + Xa * Y * Tb + X * Yb * Ta + X * Y * Tab),
    }


# ---------------------------------------------------------------------------
# error norms

POINTWISE = "pointwise"
PER_STEP = "per_step"


def linf_error(numeric, oracle, guard: float = 1e-6, normalize: str = POINTWISE) -> float:
    """Maximum relative deviation over steps (axis 0) and cells.

    ``pointwise`` divides every cell by its own oracle value, skipping cells
    with ``|oracle| < guard * max|oracle|``.  ``per_step`` divides the largest
    deviation of each step by the largest oracle magnitude of that step.
    """
    num = np.asarray(numeric, dtype=float)
    ref = np.asarray(oracle, dtype=float)
    if num.shape != ref.shape:
        raise ValueError(f"shape mismatch {num.shape} vs {ref.shape}")
    acc = LinfAccumulator(guard=guard, normalize=normalize, reference_max=float(np.abs(ref).max(initial=0.0)))
    if num.ndim == 0:
        acc.add(num, ref)
    else:
        for a, b in zip(num, ref):
            acc.add(a, b)
    return acc.value


class LinfAccumulator:
    """Streaming form of :func:`linf_error`, fed one step at a time.

    The pointwise guard needs the global oracle maximum up front
    (``reference_max``).
    """

    def __init__(self, guard: float = 1e-6, normalize: str = POINTWISE, reference_max: float | None = None):
        if normalize not in (POINTWISE, PER_STEP):
            raise ValueError(f"unknown normalisation {normalize!r}")
        if normalize == POINTWISE and reference_max is None:
            raise ValueError("pointwise normalisation needs the global oracle maximum")
        self.guard = guard
        self.normalize = normalize
        self.reference_max = reference_max
        self.value = 0.0

    def add(self, numeric, oracle) -> None:
        err = np.abs(np.asarray(numeric) - np.asarray(oracle))
        mag = np.abs(np.asarray(oracle))
        if self.normalize == POINTWISE:
            keep = (mag >= self.guard * self.reference_max) & (mag > 0.0)
            if np.any(keep):
                self.value = max(self.value, float((err[keep] / mag[keep]).max()))
        else:
            top = float(mag.max(initial=0.0))
            if top > 0.0:
                self.value = max(self.value, float(err.max()) / top)

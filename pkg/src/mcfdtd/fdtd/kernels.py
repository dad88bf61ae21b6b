"""Stencil kernel dispatch.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``MCFDTD_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from .. import multicomplex as mc
from . import _fallback

try:
    if os.environ.get("MCFDTD_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by MCFDTD_BACKEND")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = ("python",) + (("compiled",) if _compiled is not None else ())
DEFAULT_BACKEND = "compiled" if _compiled is not None else "python"


def tally_term(counter, coef, ncoef: int) -> None:
    """Real operations spent by one stencil term.

    Per cell: ``ncoef`` subtractions for the difference, ``ncoef`` additions
    into the target and ``ncoef`` coefficient products.  Perturbed cells add
    the imaginary coefficient parts: ``ncoef * (ncoef - 1)`` more products,
    whose accumulations are reported separately as ``product_adds``.
    """
    ncell = coef.re.size
    extra = coef.npert * ncoef * (ncoef - 1)
    counter.adds += 2 * ncell * ncoef
    counter.muls += ncell * ncoef + extra
    counter.product_adds += extra


def get_apply_term(backend: str | None = None):
    backend = backend or DEFAULT_BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        fn = _compiled.apply_term
    elif backend == "python":
        fn = _fallback.apply_term
    else:
        raise ValueError(f"unknown backend {backend!r}")

    def apply_term(tgt, t0, src, s0, axis, sign, coef):
        fn(tgt, t0, src, s0, axis, sign, coef)
        counter = mc.op_counter()
        if counter is not None:
            tally_term(counter, coef, tgt.shape[3])

    return apply_term


class Coefficient:
    """Per-cell multicomplex coefficient over an update box.

    Cells whose imaginary coefficients are all zero are handled through the
    real array ``re``; the remaining ("perturbed") cells carry their full
    coefficient vector in ``pval`` and are indexed by ``pid``.
    """

    __slots__ = ("re", "pid", "pval", "pidx", "npert", "dense", "ncoef")

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 4:
            raise ValueError("coefficient array must be (ni, nj, nk, ncoef)")
        self.ncoef = values.shape[3]
        self.re = np.ascontiguousarray(values[..., 0])
        if self.ncoef > 1:
            mask = np.any(values[..., 1:] != 0.0, axis=-1)
        else:
            mask = np.zeros(values.shape[:3], dtype=bool)
        self.npert = int(mask.sum())
        self.dense = self.npert > 0 and self.npert == mask.size
        self.pid = np.full(values.shape[:3], -1, dtype=np.int32)
        self.pidx = np.nonzero(mask)
        self.pid[self.pidx] = np.arange(self.npert, dtype=np.int32)
        # nonzero() walks the box in C order, so a dense pval lines up with reshape(-1)
        # the compiled kernel wants at least one row even when nothing is perturbed
        self.pval = np.ascontiguousarray(values[self.pidx]) if self.npert else np.zeros((1, self.ncoef))

    @property
    def shape(self):
        return self.re.shape

    @property
    def is_real(self) -> bool:
        return self.npert == 0

    def full(self) -> np.ndarray:
        out = np.zeros(self.re.shape + (self.ncoef,))
        out[..., 0] = self.re
        if self.npert:
            out[self.pidx] = self.pval
        return out

    def scaled(self, factor: float) -> "Coefficient":
        return Coefficient(self.full() * factor)

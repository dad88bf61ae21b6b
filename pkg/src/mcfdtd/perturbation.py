"""Binding of design parameters to imaginary units and perturbed cells.

Parameters receive imaginary units in declaration order: the first parameter
of order ``m1`` owns units ``1..m1``, the next owns ``m1+1..m1+m2`` and so on.

Two kinds of parameter are supported:

``material-eps``
    ``eps_r`` of every target cell becomes ``eps_r + (j_a + ... + j_b) h``.
``geometric-length``
    Target cells are stretched along ``axis`` to ``D (1 + (j_a + ...) h)``;
    the compensating cells shrink to ``D (1 - (j_a + ...) h s)`` where
    ``s`` keeps the total length along the axis unchanged.  A boundary wall
    may be moved without a compensating band.

Geometric derivatives come out per unit fractional stretch.  The physical
convention divides once more by the nominal stretched length per unit order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import multicomplex as mc

MATERIAL = "material-eps"
GEOMETRIC = "geometric-length"
KINDS = (MATERIAL, GEOMETRIC)

FRACTIONAL = "fractional"
PHYSICAL = "physical"


class PerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    """Half-open box of cell indices."""

    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def __post_init__(self):
        if len(self.lo) != 3 or len(self.hi) != 3:
            raise PerturbationError("regions are given as 3-D cell boxes")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise PerturbationError(f"empty region {self.lo}..{self.hi}")

    @property
    def slices(self):
        return tuple(slice(a, b) for a, b in zip(self.lo, self.hi))

    def mask(self, dims) -> np.ndarray:
        if any(l < 0 or h > n for l, h, n in zip(self.lo, self.hi, dims)):
            raise PerturbationError(f"region {self.lo}..{self.hi} outside grid {dims}")
        m = np.zeros(dims, dtype=bool)
        m[self.slices] = True
        return m


def _regions(items) -> tuple[Region, ...]:
    out = []
    for r in items:
        out.append(r if isinstance(r, Region) else Region(tuple(r[0]), tuple(r[1])))
    return tuple(out)


@dataclass(frozen=True)
class ParameterPerturbation:
    name: str
    kind: str
    h: float
    target: tuple
    order: int = 1
    axis: int | None = None
    compensate: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PerturbationError(f"{self.name}: unknown kind {self.kind!r}")
        if self.order < 1:
            raise PerturbationError(f"{self.name}: order must be at least 1")
        if self.h < 0:
            raise PerturbationError(f"{self.name}: step must be non-negative")
        object.__setattr__(self, "target", _regions(self.target))
        object.__setattr__(self, "compensate", _regions(self.compensate))
        if not self.target:
            raise PerturbationError(f"{self.name}: no target cells")
        if self.kind == GEOMETRIC:
            if self.axis not in (0, 1, 2):
                raise PerturbationError(f"{self.name}: geometric parameters need an axis")
        elif self.compensate:
            raise PerturbationError(f"{self.name}: material parameters take no compensating band")


@dataclass(frozen=True)
class PerturbationSpec:
    parameters: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise PerturbationError("parameter names must be unique")
        if self.total_order > mc.MAX_ORDER:
            raise PerturbationError(f"{self.total_order} imaginary units requested, at most {mc.MAX_ORDER} supported")

    @property
    def total_order(self) -> int:
        return sum(p.order for p in self.parameters)

    def index(self, name: str) -> int:
        for i, p in enumerate(self.parameters):
            if p.name == name:
                return i
        raise KeyError(name)

    def units(self, name: str) -> tuple[int, ...]:
        start = 1
        for p in self.parameters:
            if p.name == name:
                return tuple(range(start, start + p.order))
            start += p.order
        raise KeyError(name)

    def with_steps(self, **steps) -> "PerturbationSpec":
        params = []
        for p in self.parameters:
            if p.name in steps:
                p = ParameterPerturbation(p.name, p.kind, steps[p.name], p.target, p.order, p.axis, p.compensate)
            params.append(p)
        return PerturbationSpec(tuple(params))

    def only(self, *names, order=None) -> "PerturbationSpec":
        """Sub-spec holding the named parameters, optionally re-ordered in degree."""
        params = []
        for name in names:
            p = self.parameters[self.index(name)]
            if order is not None:
                k = order[name] if isinstance(order, dict) else order
                p = ParameterPerturbation(p.name, p.kind, p.h, p.target, k, p.axis, p.compensate)
            params.append(p)
        return PerturbationSpec(tuple(params))


@dataclass
class Applied:
    """Perturbed arrays plus what is needed to normalise derivatives."""

    eps_r: np.ndarray
    sizes: list
    spec: PerturbationSpec
    length_scales: dict = field(default_factory=dict)

    def derivative_index(self, which, convention: str = FRACTIONAL):
        return derivative_index(self.spec, which, convention, self.length_scales)


def _band_length(sizes_axis, regions, axis) -> float:
    """Nominal length spanned along ``axis`` by the distinct axis indices of the regions."""
    dims = sizes_axis.shape[:3]
    mask = np.zeros(dims, dtype=bool)
    for r in regions:
        mask |= r.mask(dims)
    total = 0.0
    for i in np.unique(np.nonzero(mask)[axis]):
        sel = np.take(mask, i, axis=axis)
        vals = np.take(sizes_axis[..., 0], i, axis=axis)[sel]
        total += float(vals.mean())
    return total


def _check_fresh(arr, mask, what, name):
    if arr.shape[-1] > 1 and np.any(arr[mask][:, 1:] != 0.0):
        raise PerturbationError(f"{name}: {what} cells already perturbed")


def apply(spec: PerturbationSpec, eps_r, sizes, shifts: dict | None = None) -> Applied:
    """Perturb permittivity and cell sizes.

    Without ``shifts`` the imaginary steps of ``spec`` are applied in
    multicomplex arithmetic.  With ``shifts`` (parameter name -> real
    displacement in the same units as ``h``) a real perturbed geometry is
    built instead, for finite-difference baselines.
    """
    order = 0 if shifts is not None else spec.total_order
    base_order = max(mc.order_of(np.shape(eps_r)[-1]), *(mc.order_of(s.shape[-1]) for s in sizes))
    if shifts is not None and base_order:
        raise PerturbationError("real shifts apply to real arrays only")
    if order + base_order > mc.MAX_ORDER:
        raise PerturbationError("imaginary unit budget exceeded")
    if base_order and order:
        raise PerturbationError("arrays already carry imaginary units; apply once")
    eps = mc.promote(np.array(eps_r, dtype=float), order)
    sz = [mc.promote(np.array(s, dtype=float), order) for s in sizes]
    dims = eps.shape[:3]
    nc = 1 << order

    claimed = {"eps": np.zeros(dims, bool), 0: np.zeros(dims, bool), 1: np.zeros(dims, bool), 2: np.zeros(dims, bool)}
    scales = {}
    for p in spec.parameters:
        if shifts is not None:
            if p.name not in shifts:
                continue
            step = np.zeros(nc)
            step[0] = float(shifts[p.name])
        else:
            step = np.zeros(nc)
            for u in spec.units(p.name):
                step[1 << (u - 1)] = p.h
        tmask = np.zeros(dims, bool)
        for r in p.target:
            tmask |= r.mask(dims)
        if p.kind == MATERIAL:
            if np.any(claimed["eps"] & tmask):
                raise PerturbationError(f"{p.name}: overlaps another permittivity parameter")
            _check_fresh(eps, tmask, "permittivity", p.name)
            claimed["eps"] |= tmask
            eps[tmask] = eps[tmask] + step
            scales[p.name] = 1.0
            continue
        ax = p.axis
        cmask = np.zeros(dims, bool)
        for r in p.compensate:
            cmask |= r.mask(dims)
        if np.any(tmask & cmask):
            raise PerturbationError(f"{p.name}: stretched and compensating bands overlap")
        both = tmask | cmask
        if np.any(claimed[ax] & both):
            raise PerturbationError(f"{p.name}: overlaps another {'xyz'[ax]}-size parameter")
        _check_fresh(sz[ax], both, "cell-size", p.name)
        claimed[ax] |= both
        length = _band_length(sz[ax], p.target, ax)
        scales[p.name] = length
        stretch = mc.from_real(1.0, order) + step
        sz[ax][tmask] = mc.mul(sz[ax][tmask], stretch)
        if p.compensate:
            ratio = length / _band_length(sz[ax], p.compensate, ax)
            shrink = mc.from_real(1.0, order) - ratio * step
            sz[ax][cmask] = mc.mul(sz[ax][cmask], shrink)
    return Applied(eps, sz, spec, scales)


def derivative_index(spec: PerturbationSpec, which, convention: str = FRACTIONAL, length_scales=None):
    """Imaginary mask and divisor for a requested partial derivative.

    ``which`` maps parameter names to derivative orders (or is a sequence of
    orders aligned with the parameters).  Sub-maximal orders use the lowest
    units of each parameter.
    """
    if not isinstance(which, dict):
        which = {p.name: int(k) for p, k in zip(spec.parameters, which)}
    mask = 0
    factors = []
    for name, k in which.items():
        if k == 0:
            continue
        try:
            p = spec.parameters[spec.index(name)]
        except KeyError:
            raise PerturbationError(f"unknown parameter {name!r}") from None
        if k < 0 or k > p.order:
            raise PerturbationError(f"{name}: order {k} exceeds the declared order {p.order}")
        units = spec.units(name)[:k]
        mask |= mc.mask_of(*units)
        h = p.h
        if p.kind == GEOMETRIC and convention == PHYSICAL:
            if length_scales is None or name not in length_scales:
                raise PerturbationError(f"{name}: physical convention needs the nominal length")
            h = h * length_scales[name]
        factors.extend([h] * k)
    return mc.ImaginaryIndex(mask), float(prod(factors)) if factors else 1.0


def convention_of(spec: PerturbationSpec, which, convention: str) -> str:
    kinds = {spec.parameters[spec.index(n)].kind for n, k in (which.items() if isinstance(which, dict) else []) if k}
    if GEOMETRIC not in kinds:
        return "absolute"
    return convention

"""Leapfrog Yee stepping with multicomplex fields and coefficients."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .. import multicomplex as mc
from .grid import (
    AXES,
    C0,
    E_COMPONENTS,
    EPS0,
    MU0,
    STAGGER,
    BoundarySpec,
    Diverged,
    MaterialMap,
    YeeGrid,
    component_axis,
    component_shape,
)
from .kernels import Coefficient, get_apply_term

DIVERGENCE_LIMIT = 1e12
DEFAULT_CFL_FRACTION = 0.95


def material_coefficient(eps_r, dt: float) -> np.ndarray:
    """``dt / (eps0 * eps_r)`` as a multicomplex array."""
    eps_r = np.asarray(eps_r, dtype=float)
    return (dt / EPS0) * mc.inv(eps_r)


def _gather(cells, flags, lo, hi, average=()):
    """Sample a per-cell array at component positions in the box ``[lo, hi)``.

    Cell-aligned axes index directly.  Node-aligned axes either average the two
    adjacent cells (axes listed in ``average``) or take the cell that starts at
    the node, clamped at the far boundary.
    """
    out = cells
    for ax in range(3):
        n = cells.shape[ax]
        idx = np.arange(lo[ax], hi[ax])
        if not flags[ax]:
            out = np.take(out, idx, axis=ax)
        elif ax in average:
            left = np.take(out, np.clip(idx - 1, 0, n - 1), axis=ax)
            right = np.take(out, np.clip(idx, 0, n - 1), axis=ax)
            out = 0.5 * (left + right)
        else:
            out = np.take(out, np.minimum(idx, n - 1), axis=ax)
    return out


def _imag_mask(a) -> np.ndarray:
    if a.shape[-1] == 1:
        return np.zeros(a.shape[:-1], dtype=bool)
    return np.any(a[..., 1:] != 0.0, axis=-1)


def _product(a, b):
    # real cells stay in plain float arithmetic so that a null perturbation
    # reproduces the real run bit for bit
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 0] * b[..., 0]
    pert = _imag_mask(a) | _imag_mask(b)
    if pert.any():
        out[pert] = mc.mul(a[pert], b[pert])
    return out


def _quotient(k: float, den):
    out = np.zeros_like(den)
    out[..., 0] = k / den[..., 0]
    pert = _imag_mask(den)
    if pert.any():
        out[pert] = k * mc.inv(den[pert])
    return out


@dataclass
class Term:
    """One stencil contribution ``tgt[box] += sign * coef * (src[+1] - src[0])``."""

    target: str
    t0: tuple[int, int, int]
    source: str
    s0: tuple[int, int, int]
    axis: int
    sign: float
    scale: float
    denominator: np.ndarray
    coef: Coefficient | None = None


def _update_box(comp: str, dims):
    shape = component_shape(comp, dims)
    if comp[0] == "H":
        return (0, 0, 0), shape
    flags = STAGGER[comp]
    lo = tuple(1 if node else 0 for node in flags)
    hi = tuple(n - 1 if node else n for n, node in zip(shape, flags))
    return lo, hi


def build_terms(grid: YeeGrid, materials: MaterialMap, dt: float) -> list[Term]:
    """Enumerate every stencil term with its multicomplex denominator."""
    comps = set(grid.components)
    eps = mc.promote(materials.eps_r, grid.order)
    terms = []
    for comp in grid.components:
        a = component_axis(comp)
        b, c = (a + 1) % 3, (a + 2) % 3
        flags = STAGGER[comp]
        lo, hi = _update_box(comp, grid.dims)
        if any(h <= l for l, h in zip(lo, hi)):
            continue
        if comp[0] == "E":
            pairs = [("H" + AXES[c], b, 1.0), ("H" + AXES[b], c, -1.0)]
            eps_loc = _gather(eps, flags, lo, hi, average=(0, 1, 2))
            scale = dt / EPS0
        else:
            pairs = [("E" + AXES[c], b, -1.0), ("E" + AXES[b], c, 1.0)]
            eps_loc = None
            scale = dt / MU0
        for src, axis, sign in pairs:
            if src not in comps or (grid.te2d and axis == 2):
                continue
            spacing = _gather(grid.sizes[axis], flags, lo, hi, average=(axis,))
            den = spacing if eps_loc is None else _product(eps_loc, spacing)
            s0 = tuple(lo)
            if comp[0] == "E":
                s0 = tuple(v - (1 if ax == axis else 0) for ax, v in enumerate(lo))
            terms.append(Term(comp, tuple(lo), src, s0, axis, sign, scale, den))
    return terms


def precompute_coefficients(grid: YeeGrid, materials: MaterialMap, dt: float) -> list[Term]:
    """Terms with their per-cell update coefficients ``scale / denominator``."""
    terms = build_terms(grid, materials, dt)
    for t in terms:
        t.coef = Coefficient(_quotient(t.scale, t.denominator))
    return terms


@dataclass
class Probe:
    """Weighted sum of field samples, recorded after every E half-step.

    ``indices`` is an ``(n, 3)`` integer array into the component array;
    ``weights`` is ``(n, ncoef)`` multicomplex or None for unit weights.
    """

    name: str
    component: str
    indices: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.indices = np.atleast_2d(np.asarray(self.indices, dtype=np.intp))

    def sample(self, fields) -> np.ndarray:
        arr = fields[self.component]
        vals = arr[tuple(self.indices.T)]
        if self.weights is not None:
            w = mc.promote(self.weights, mc.order_of(arr.shape[-1]))
            vals = mc.mul(w, vals)
        return vals.sum(axis=0)


@dataclass
class RunOutput:
    """Probe time series (``steps + 1`` samples each, including ``t = 0``)."""

    dt: float
    series: dict
    order: int
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(next(iter(self.series.values()))) - 1 if self.series else 0

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def to_csv(self, probe: str, header_lines=()) -> str:
        data = self.series[probe]
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t_seconds"] + [f"coeff_mask_{m}" for m in range(data.shape[1])])
        for n, row in enumerate(data):
            w.writerow([n, repr(n * self.dt)] + [repr(float(v)) for v in row])
        return buf.getvalue()


@dataclass
class _Mur:
    comp: str
    edge: tuple
    inner: tuple
    k: float


class Simulation:
    """Owns the fields and advances them one leapfrog step at a time."""

    def __init__(
        self,
        grid: YeeGrid,
        materials: MaterialMap,
        boundaries: BoundarySpec | None = None,
        sources=(),
        probes=(),
        dt: float | None = None,
        backend: str | None = None,
        check_every: int = 100,
    ):
        materials.validate()
        if materials.eps_r.shape[:3] != grid.dims:
            raise ValueError("material map does not match the grid")
        order = max(grid.order, mc.order_of(materials.eps_r.shape[-1]))
        if order > mc.MAX_ORDER:
            raise ValueError(f"order {order} exceeds the maximum of {mc.MAX_ORDER}")
        self.grid = grid.promote(order)
        self.materials = materials.promote(order)
        self.boundaries = boundaries or BoundarySpec.all_pec()
        limit = self.grid.cfl_limit()
        self.dt = DEFAULT_CFL_FRACTION * limit if dt is None else float(dt)
        if not 0 < self.dt <= limit:
            raise ValueError(f"time step {self.dt:.4g} s violates the CFL limit {limit:.4g} s")
        self.sources = list(sources)
        self.probes = list(probes)
        self.check_every = check_every
        self.n = 0
        nc = self.grid.ncoef
        self.fields = {c: np.zeros(component_shape(c, self.grid.dims) + (nc,)) for c in self.grid.components}
        self.terms = precompute_coefficients(self.grid, self.materials, self.dt)
        self._apply = get_apply_term(backend)
        self._mur = self._build_mur()
        self._pec = self._build_pec()
        self.series = {p.name: [p.sample(self.fields)] for p in self.probes}

    @property
    def order(self) -> int:
        return self.grid.order

    def set_fields(self, values: dict) -> None:
        """Install initial conditions; arrays are promoted to the run order."""
        for comp, arr in values.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 3:
                arr = arr[..., None]
            arr = mc.promote(arr, self.order)
            if arr.shape != self.fields[comp].shape:
                raise ValueError(f"{comp}: expected shape {self.fields[comp].shape}, got {arr.shape}")
            self.fields[comp][...] = arr
        self.series = {p.name: [p.sample(self.fields)] for p in self.probes}

    def _build_mur(self):
        out = []
        dims = self.grid.dims
        for face, kind in self.boundaries.faces.items():
            if kind != "mur":
                continue
            ax = AXES.index(face[0])
            if self.grid.te2d and ax == 2:
                continue
            far = face[1] == "+"
            cell = dims[ax] - 1 if far else 0
            spacing = float(np.take(self.grid.sizes[ax][..., 0], cell, axis=ax).mean())
            v = C0 / np.sqrt(self.boundaries.eps_eff.get(face, 1.0))
            k = (v * self.dt - spacing) / (v * self.dt + spacing)
            for comp in E_COMPONENTS:
                if comp not in self.fields or component_axis(comp) == ax:
                    continue
                shape = self.fields[comp].shape
                edge, inner = [], []
                for a2, node in enumerate(STAGGER[comp]):
                    if a2 == ax:
                        edge.append(shape[ax] - 1 if far else 0)
                        inner.append(shape[ax] - 2 if far else 1)
                    else:
                        # nodes shared with a neighbouring face stay untouched
                        s = slice(1, shape[a2] - 1) if node else slice(None)
                        edge.append(s)
                        inner.append(s)
                out.append(_Mur(comp, tuple(edge), tuple(inner), k))
        return out

    def _build_pec(self):
        out = []
        for plate in self.boundaries.plates:
            for comp in E_COMPONENTS:
                if comp not in self.fields or component_axis(comp) == plate.axis:
                    continue
                idx = []
                for a2, node in enumerate(STAGGER[comp]):
                    if a2 == plate.axis:
                        idx.append(plate.index)
                    else:
                        idx.append(slice(plate.lo[a2], plate.hi[a2] + (1 if node else 0)))
                out.append((comp, tuple(idx)))
        return out

    def update_h(self, fields, terms=None) -> None:
        for t in terms or self.terms:
            if t.target[0] == "H":
                self._apply(fields[t.target], t.t0, fields[t.source], t.s0, t.axis, t.sign, t.coef)

    def update_e(self, fields, terms=None) -> None:
        for t in terms or self.terms:
            if t.target[0] == "E":
                self._apply(fields[t.target], t.t0, fields[t.source], t.s0, t.axis, t.sign, t.coef)

    def save_boundary(self, fields) -> list:
        return [(fields[m.comp][m.edge].copy(), fields[m.comp][m.inner].copy()) for m in self._mur]

    def apply_boundary(self, fields, saved) -> None:
        for m, (old_edge, old_inner) in zip(self._mur, saved):
            fields[m.comp][m.edge] = old_inner + m.k * (fields[m.comp][m.inner] - old_edge)
        for comp, idx in self._pec:
            fields[comp][idx] = 0.0

    def add_sources(self, fields, t: float) -> None:
        for src in self.sources:
            box = tuple(slice(a, b) for a, b in zip(src.lo, src.hi)) + (0,)
            fields[src.component][box] += src.value(t)

    def step(self) -> None:
        f = self.fields
        self.update_h(f)
        saved = self.save_boundary(f)
        self.update_e(f)
        self.apply_boundary(f, saved)
        self.n += 1
        self.add_sources(f, self.n * self.dt)
        for p in self.probes:
            self.series[p.name].append(p.sample(f))
        if self.check_every and self.n % self.check_every == 0:
            self.check()

    def check(self, fields=None) -> None:
        for comp, arr in (fields or self.fields).items():
            if not np.all(np.isfinite(arr)) or np.abs(arr[..., 0]).max(initial=0.0) > DIVERGENCE_LIMIT:
                raise Diverged(f"{comp} diverged at step {self.n}")

    def run(self, steps: int, on_step=None) -> RunOutput:
        for _ in range(int(steps)):
            self.step()
            if on_step is not None:
                on_step(self)
        self.check()
        return self.output()

    def output(self, meta=None) -> RunOutput:
        series = {k: np.array(v) for k, v in self.series.items()}
        return RunOutput(self.dt, series, self.order, dict(meta or {}))

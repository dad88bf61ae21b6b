"""Microstrip low-pass filter: a wide patch between two offset feed lines.

Layout coordinates are cell indices.  The ground plane is the PEC ``z-``
face, the strips are zero-thickness plates on top of the substrate (node
``k = sub_cells``) and the remaining faces are first-order Mur boundaries.

Three design parameters are available:

``w1``  width of the port-1 feed line (its outer edge cells along x)
``w2``  length of the patch along y (its last cell row)
``d``   substrate thickness (the top substrate layer, compensated by the air layer above)

Port voltages are ``-sum Ez dz`` across the substrate beneath the strip
centerline.  The incident wave comes from a straight through-line of the
port-1 strip width, run once at nominal geometry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import multicomplex as mc
from .. import perturbation as pt
from ..csd import centered_stencil
from ..fdtd.grid import BoundarySpec, MaterialMap, PecPlate, SourceSpec, YeeGrid
from ..fdtd.solver import Probe, RunOutput, Simulation
from ..postprocess import SParameters, extract_sparams, frequency_grid, magnitude, to_db

PARAMETERS = ("w1", "w2", "d")


@dataclass(frozen=True)
class FilterLayout:
    dims: tuple = (40, 50, 8)
    spacing: tuple = (0.8128e-3, 0.8466e-3, 0.265e-3)
    eps_sub: float = 2.2
    sub_cells: int = 3
    # (x_lo, x_hi, y_lo, y_hi) half-open cell ranges
    strip1: tuple = (16, 19, 0, 23)
    patch: tuple = (8, 34, 23, 26)
    strip2: tuple = (23, 26, 26, 50)
    # the source sits a few cells inside the Mur face; on the face-adjacent
    # node the boundary traps the pulse's DC content as a static charge
    source_y: int = 5
    port1_y: int = 15
    port2_y: int = 40
    pulse_width: float = 15e-12
    dt: float = 0.5e-12
    steps: int = 2000
    f_max: float = 20e9
    df: float = 10e6

    @classmethod
    def desk(cls, **kw) -> "FilterLayout":
        return replace(cls(), **kw)

    @classmethod
    def full(cls, **kw) -> "FilterLayout":
        base = cls(
            dims=(80, 100, 16),
            spacing=(0.4064e-3, 0.4233e-3, 0.265e-3),
            strip1=(32, 38, 0, 46),
            patch=(16, 68, 46, 52),
            strip2=(46, 52, 52, 100),
            source_y=10,
            port1_y=30,
            port2_y=80,
            dt=0.441e-12,
            steps=4000,
        )
        return replace(base, **kw)

    def validate(self) -> None:
        I, M, K = self.dims
        if self.sub_cells < 1 or self.sub_cells + 2 > K:
            raise ValueError("substrate must leave at least two air cells above it")
        for name in ("strip1", "patch", "strip2"):
            x0, x1, y0, y1 = getattr(self, name)
            if not (0 <= x0 < x1 <= I and 0 <= y0 < y1 <= M):
                raise ValueError(f"{name} outside the grid")
        if self.strip1[1] - self.strip1[0] < 2 or self.strip2[1] - self.strip2[0] < 2:
            raise ValueError("feed lines need at least two cells of width")
        for name in ("source_y", "port1_y", "port2_y"):
            if not 0 < getattr(self, name) < M:
                raise ValueError(f"{name} must be an interior node")
        if self.source_y < 3:
            raise ValueError("keep the source at least three cells from the y- face")
        if not self.source_y < self.port1_y < self.strip1[3]:
            raise ValueError("port 1 must lie between the source and the end of strip 1")
        if not self.strip2[2] < self.port2_y:
            raise ValueError("port 2 must lie on strip 2")
        if self.dt <= 0 or self.steps < 2 or self.pulse_width <= 0:
            raise ValueError("time step, step count and pulse width must be positive")

    @property
    def thickness(self) -> float:
        return self.sub_cells * self.spacing[2]

    @property
    def freqs(self) -> np.ndarray:
        return frequency_grid(self.f_max, self.df)

    def eps_eff(self) -> float:
        """Quasi-static effective permittivity of the feed line."""
        w = (self.strip1[1] - self.strip1[0]) * self.spacing[0]
        h = self.thickness
        er = self.eps_sub
        return 0.5 * (er + 1) + 0.5 * (er - 1) / math.sqrt(1 + 12 * h / w)


def materials(layout: FilterLayout) -> np.ndarray:
    m = MaterialMap.vacuum(layout.dims)
    m.fill((0, 0, 0), (layout.dims[0], layout.dims[1], layout.sub_cells), layout.eps_sub)
    return m.eps_r


def _plate(box, k):
    x0, x1, y0, y1 = box
    return PecPlate(2, k, (x0, y0, 0), (x1, y1, 0))


def boundaries(layout: FilterLayout, through: bool = False) -> BoundarySpec:
    faces = {"x-": "mur", "x+": "mur", "y-": "mur", "y+": "mur", "z-": "pec", "z+": "mur"}
    ee = layout.eps_eff()
    k = layout.sub_cells
    if through:
        x0, x1, _, _ = layout.strip1
        plates = [_plate((x0, x1, 0, layout.dims[1]), k)]
    else:
        plates = [_plate(layout.strip1, k), _plate(layout.patch, k), _plate(layout.strip2, k)]
    return BoundarySpec(faces, {"y-": ee, "y+": ee}, plates)


def parameters(layout: FilterLayout, orders: dict, steps: dict | None = None) -> pt.PerturbationSpec:
    """Geometric parameters named in ``orders`` (declaration order kept)."""
    steps = steps or {}
    I, M, K = layout.dims
    k = layout.sub_cells
    params = []
    for name, order in orders.items():
        if not order:
            continue
        h = float(steps.get(name, 1e-5))
        if name == "w1":
            x1, y0, y1 = layout.strip1[1], layout.strip1[2], layout.strip1[3]
            target = [((x1 - 1, y0, k - 1), (x1, y1, k + 1))]
            comp = [((x1, y0, k - 1), (x1 + 1, y1, k + 1))]
            axis = 0
        elif name == "w2":
            x0, x1, y1 = layout.patch[0], layout.patch[1], layout.patch[3]
            target = [((x0, y1 - 1, k - 1), (x1, y1, k + 1))]
            comp = [((x0, y1, k - 1), (x1, y1 + 1, k + 1))]
            axis = 1
        elif name == "d":
            target = [((0, 0, k - 1), (I, M, k))]
            comp = [((0, 0, k), (I, M, k + 1))]
            axis = 2
        else:
            raise ValueError(f"unknown filter parameter {name!r}; choose from {PARAMETERS}")
        params.append(pt.ParameterPerturbation(name, pt.GEOMETRIC, h, target, int(order), axis, comp))
    return pt.PerturbationSpec(tuple(params))


def _port_probe(name, layout, sizes_z, x_range, y):
    x0, x1 = x_range
    w = x1 - x0
    # strip centerline: the middle node, or the two middle nodes averaged
    if w % 2 == 0:
        xs, share = [x0 + w // 2], 1.0
    else:
        xs, share = [x0 + w // 2, x0 + w // 2 + 1], 0.5
    idx, wts = [], []
    I, M, _ = layout.dims
    for i in xs:
        for k in range(layout.sub_cells):
            idx.append((i, y, k))
            wts.append(-share * sizes_z[min(i, I - 1), min(y, M - 1), k])
    return Probe(name, "Ez", np.array(idx), np.array(wts))


def ports(layout: FilterLayout, sizes_z, through: bool = False) -> list[Probe]:
    p1 = _port_probe("V1", layout, sizes_z, layout.strip1[:2], layout.port1_y)
    if through:
        return [p1]
    return [p1, _port_probe("V2", layout, sizes_z, layout.strip2[:2], layout.port2_y)]


def source(layout: FilterLayout) -> SourceSpec:
    x0, x1 = layout.strip1[:2]
    y = layout.source_y
    return SourceSpec("Ez", (x0, y, 0), (x1 + 1, y + 1, layout.sub_cells), layout.pulse_width)


def build(layout: FilterLayout, spec: pt.PerturbationSpec | None = None, shifts: dict | None = None,
          through: bool = False, backend=None):
    """Simulation of the filter (or the through-line) and the applied perturbation."""
    layout.validate()
    base = YeeGrid.uniform(layout.dims, layout.spacing)
    applied = pt.apply(spec or pt.PerturbationSpec(), materials(layout), base.sizes, shifts=shifts)
    grid = YeeGrid(layout.dims, applied.sizes)
    sim = Simulation(grid, MaterialMap(applied.eps_r), boundaries(layout, through), [source(layout)],
                     ports(layout, applied.sizes[2], through), dt=layout.dt, backend=backend)
    return sim, applied


def run(layout: FilterLayout, spec=None, shifts=None, through=False, backend=None):
    sim, applied = build(layout, spec, shifts, through, backend)
    return sim.run(layout.steps), applied


def incident(layout: FilterLayout, backend=None) -> np.ndarray:
    """Port-1 voltage of the nominal through-line."""
    out, _ = run(layout, through=True, backend=backend)
    return out.series["V1"]


def sparams(layout: FilterLayout, out: RunOutput, incident_series, freqs=None) -> SParameters:
    freqs = layout.freqs if freqs is None else freqs
    return extract_sparams(incident_series, out.series["V1"], out.series["V2"], out.dt, freqs)


@dataclass
class Sensitivity:
    """Derivatives of |S| (linear) per frequency, keyed by derivative label."""

    freqs: np.ndarray
    which: str
    h: float
    method: str
    curves: dict = field(default_factory=dict)


def _label(request: dict) -> str:
    return "".join(n * k for n, k in request.items() if k)


def mcsd_sensitivity(layout: FilterLayout, orders: dict, requests, h: float, incident_series,
                     which: str = "S21", freqs=None, backend=None) -> Sensitivity:
    """One multicomplex run; every request is extracted from it (fractional convention)."""
    spec = parameters(layout, orders, {n: h for n in orders})
    out, applied = run(layout, spec, backend=backend)
    sp = sparams(layout, out, incident_series, freqs)
    mag = magnitude(sp.get(which))
    res = Sensitivity(sp.freqs, which, h, "mcsd")
    for req in requests:
        idx, div = applied.derivative_index(req, pt.FRACTIONAL)
        res.curves[_label(req)] = mc.im_part(mag, idx) / div
    return res


def cfd_sensitivity(layout: FilterLayout, request: dict, h: float, incident_series,
                    which: str = "S21", freqs=None, backend=None) -> Sensitivity:
    """Centered differences of |S| over real shifted geometries."""
    names = [n for n, k in request.items() if k]
    spec = parameters(layout, {n: 1 for n in names}, {n: h for n in names})
    total = None
    for offsets, weight in centered_stencil([request[n] for n in names]):
        shifts = {n: o * h for n, o in zip(names, offsets)}
        out, _ = run(layout, spec, shifts=shifts, backend=backend)
        mag = np.abs(sparams(layout, out, incident_series, freqs).get(which)[:, 0])
        total = weight * mag if total is None else total + weight * mag
    order = sum(request[n] for n in names)
    res = Sensitivity(layout.freqs if freqs is None else np.asarray(freqs), which, h, "cfd")
    res.curves[_label(request)] = total / h**order
    return res


def band_edge(freqs, s21_db, level: float = -3.0) -> float:
    """First frequency at which |S21| drops below ``level`` dB."""
    below = np.nonzero(np.asarray(s21_db) < level)[0]
    if below.size == 0:
        raise ValueError(f"|S21| never drops below {level} dB")
    return float(np.asarray(freqs)[below[0]])


@dataclass
class TaylorStudy:
    frequency: float
    nominal_mm: float
    derivatives: list
    d_mm: np.ndarray
    reference: np.ndarray


def taylor_study(layout: FilterLayout, max_order: int = 3, h: float = 1e-5, span: float = 0.10,
                 points: int = 5, frequency: float | None = None, incident_series=None, backend=None) -> TaylorStudy:
    """Thickness derivatives of complex S21 at one frequency plus full-wave references.

    References are taken at ``d0 (1 + s)`` for ``points`` evenly spaced
    ``s`` on each side up to ``span``.  Without ``frequency`` the nominal
    -3 dB band edge is used.
    """
    if incident_series is None:
        incident_series = incident(layout, backend)
    spec = parameters(layout, {"d": max_order}, {"d": h})
    out, applied = run(layout, spec, backend=backend)
    sp = sparams(layout, out, incident_series)
    if frequency is None:
        frequency = band_edge(sp.freqs, to_db(magnitude(sp.s21[:, :1]))[:, 0])
    fi = int(np.argmin(np.abs(sp.freqs - frequency)))
    frequency = float(sp.freqs[fi])
    s21 = sp.s21[fi]
    dz = layout.spacing[2]
    derivs = [complex(s21[0])]
    for k in range(1, max_order + 1):
        idx, div = applied.derivative_index({"d": k}, pt.PHYSICAL)
        derivs.append(complex(mc.im_part(s21, idx)) / div * 1e-3**k)  # per mm
    d0_mm = layout.thickness * 1e3
    fractions = np.concatenate([-np.linspace(span, 0, points, endpoint=False), np.linspace(0, span, points + 1)[1:]])
    refs = []
    for s in fractions:
        stretch = s * layout.thickness / dz
        ref_out, _ = run(layout, parameters(layout, {"d": 1}), shifts={"d": stretch}, backend=backend)
        refs.append(complex(sparams(layout, ref_out, incident_series, sp.freqs[fi:fi + 1]).s21[0, 0]))
    return TaylorStudy(frequency, d0_mm, derivs, d0_mm * (1 + fractions), np.array(refs))


def db_mismatch(model, reference):
    return np.abs(20 * np.log10(np.abs(model)) - 20 * np.log10(np.abs(reference)))

"""Air-filled rectangular PEC cavity excited by a TE(m, n) initial condition.

The cavity dimensions ``a`` and ``b`` are perturbed by stretching the last
cell column (``x = a`` wall) and the last cell row (``y = b`` wall), so that
every interior node keeps its physical position and derivatives compare
directly with the closed-form oracle at fixed ``(x, y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import multicomplex as mc
from .. import perturbation as pt
from ..csd import centered_stencil
from ..fdtd.grid import C0, MU0, MaterialMap, YeeGrid
from ..fdtd.solver import Probe, Simulation
from ..postprocess import PER_STEP, POINTWISE, CavityOracle, LinfAccumulator, cavity_fields


@dataclass(frozen=True)
class CavitySetup:
    a: float = 0.15
    b: float = 0.10
    spacing: float = 1e-3
    mode: tuple = (1, 1)
    e0: float = 1.0
    steps: int = 5000
    cfl_fraction: float = 0.95

    @property
    def dims(self) -> tuple[int, int]:
        i, m = round(self.a / self.spacing), round(self.b / self.spacing)
        if not (math.isclose(i * self.spacing, self.a) and math.isclose(m * self.spacing, self.b)):
            raise ValueError("cavity dimensions must be whole multiples of the cell size")
        return i, m

    @property
    def dt(self) -> float:
        return self.cfl_fraction * YeeGrid.uniform(self.dims, (self.spacing, self.spacing)).cfl_limit()

    @property
    def oracle(self) -> CavityOracle:
        return CavityOracle(self.a, self.b, self.mode[0], self.mode[1], self.e0)

    @property
    def center(self) -> tuple[int, int, int]:
        i, m = self.dims
        return (i // 2, m // 2, 0)

    def with_spacing(self, spacing: float, keep_duration: bool = True) -> "CavitySetup":
        steps = self.steps
        new = CavitySetup(self.a, self.b, spacing, self.mode, self.e0, steps, self.cfl_fraction)
        if keep_duration:
            steps = round(self.steps * self.dt / new.dt)
            new = CavitySetup(self.a, self.b, spacing, self.mode, self.e0, steps, self.cfl_fraction)
        return new


def dimension_parameters(setup: CavitySetup, orders: dict, h: float = 1e-5) -> pt.PerturbationSpec:
    """Wall-moving parameters ``a`` and/or ``b`` with the given derivative orders."""
    i, m = setup.dims
    params = []
    for name in orders:
        if name == "a":
            target = [((i - 1, 0, 0), (i, m, 1))]
            axis = 0
        elif name == "b":
            target = [((0, m - 1, 0), (i, m, 1))]
            axis = 1
        else:
            raise ValueError(f"unknown cavity parameter {name!r}")
        if orders[name]:
            params.append(pt.ParameterPerturbation(name, pt.GEOMETRIC, h, target, orders[name], axis))
    return pt.PerturbationSpec(tuple(params))


def permittivity_parameter(setup: CavitySetup, order: int, h: float = 1e-5) -> pt.PerturbationSpec:
    i, m = setup.dims
    return pt.PerturbationSpec((pt.ParameterPerturbation("eps_r", pt.MATERIAL, h, [((0, 0, 0), (i, m, 1))], order),))


def _half_points(nodes):
    return 0.5 * (nodes[:-1] + nodes[1:])


def modal_fields(grid: YeeGrid, setup: CavitySetup, dt: float) -> dict:
    """``Ez`` at t = 0 and ``Hx``, ``Hy`` at t = -dt/2 on the (possibly perturbed) grid."""
    x = grid.node_positions(0)
    y = grid.node_positions(1)
    a, b = x[-1], y[-1]
    m, n = setup.mode
    kx = mc.mul(mc.from_real(m * np.pi, 0), mc.inv(a))
    ky = mc.mul(mc.from_real(n * np.pi, 0), mc.inv(b))
    w = C0 * mc.sqrt(mc.add(mc.mul(kx, kx), mc.mul(ky, ky)))
    th = -0.5 * dt
    sin_wt = mc.sin(th * w)

    def outer(u, v):
        return mc.mul(u[:, None, :], v[None, :, :])[:, :, None, :]

    sx, cxh = mc.sin(mc.mul(x, kx)), mc.cos(mc.mul(_half_points(x), kx))
    sy, cyh = mc.sin(mc.mul(y, ky)), mc.cos(mc.mul(_half_points(y), ky))
    ez = setup.e0 * outer(sx, sy)
    ez[[0, -1]] = 0.0
    ez[:, [0, -1]] = 0.0
    hx_amp = -setup.e0 / MU0 * mc.mul(mc.mul(ky, mc.inv(w)), sin_wt)
    hy_amp = setup.e0 / MU0 * mc.mul(mc.mul(kx, mc.inv(w)), sin_wt)
    hx = mc.mul(hx_amp, outer(sx, cyh))
    hy = mc.mul(hy_amp, outer(cxh, sy))
    return {"Ez": ez, "Hx": hx, "Hy": hy}


def build(setup: CavitySetup, spec: pt.PerturbationSpec | None = None, shifts: dict | None = None, backend=None):
    """Simulation with the modal initial condition; returns ``(sim, applied)``."""
    i, m = setup.dims
    base = YeeGrid.uniform((i, m), (setup.spacing, setup.spacing))
    eps = MaterialMap.vacuum(base.dims).eps_r
    spec = spec or pt.PerturbationSpec()
    applied = pt.apply(spec, eps, base.sizes, shifts=shifts)
    grid = YeeGrid(base.dims, applied.sizes, te2d=True)
    materials = MaterialMap(applied.eps_r)
    probe = Probe("center", "Ez", [setup.center])
    dt = setup.dt
    sim = Simulation(grid, materials, probes=[probe], dt=dt, backend=backend)
    # the initial condition follows the geometry only, never eps_r
    sim.set_fields(modal_fields(sim.grid, setup, dt))
    return sim, applied


def interior_nodes(setup: CavitySetup):
    i, m = setup.dims
    x = np.arange(1, i) * setup.spacing
    y = np.arange(1, m) * setup.spacing
    return np.meshgrid(x, y, indexing="ij")


def _oracle_max(setup, key, steps, sample_every):
    xx, yy = interior_nodes(setup)
    top = 0.0
    for n in range(0, steps + 1, sample_every):
        top = max(top, float(np.abs(cavity_fields(setup.oracle, xx, yy, n * setup.dt)[key]).max()))
    return top


def _tracker(setup, key, normalize, guard, sample_every):
    ref_max = _oracle_max(setup, key, setup.steps, sample_every) if normalize == POINTWISE else None
    return LinfAccumulator(guard=guard, normalize=normalize, reference_max=ref_max)


def _derivative_key(which: dict) -> str:
    letters = "".join(name * k for name, k in sorted(which.items()))
    return "Ez_" + letters if letters else "Ez"


def mcsd_error(setup: CavitySetup, which: dict, h: float = 1e-5, normalize: str = PER_STEP,
               guard: float = 1e-6, sample_every: int = 1, backend=None, return_run: bool = False):
    """l-infinity error of an MCSD cavity derivative against the closed form.

    With ``return_run`` the center-probe :class:`RunOutput` comes back too.
    """
    spec = dimension_parameters(setup, which, h)
    sim, applied = build(setup, spec, backend=backend)
    idx, div = applied.derivative_index(which, pt.PHYSICAL)
    key = _derivative_key(which)
    acc = _tracker(setup, key, normalize, guard, sample_every)
    xx, yy = interior_nodes(setup)

    def observe(s):
        if s.n % sample_every == 0:
            num = s.fields["Ez"][1:-1, 1:-1, 0, idx.mask] / div
            acc.add(num, cavity_fields(setup.oracle, xx, yy, s.n * s.dt)[key])

    observe(sim)
    out = sim.run(setup.steps, on_step=observe)
    if return_run:
        out.meta.update(h=h, request=dict(which), divisor=div, mask=int(idx.mask))
        return acc.value, out
    return acc.value


def cfd_error(setup: CavitySetup, which: dict, h: float = 1e-5, normalize: str = PER_STEP,
              guard: float = 1e-6, sample_every: int = 1, backend=None) -> float:
    """Same norm for the centered finite-difference estimate (runs in lock-step)."""
    names = [n for n, k in which.items() if k]
    stencil = centered_stencil([which[n] for n in names])
    spec = dimension_parameters(setup, {n: 1 for n in names}, h)
    sims = []
    for offsets, weight in stencil:
        shifts = {n: o * h for n, o in zip(names, offsets)}
        sim, applied = build(setup, spec, shifts=shifts, backend=backend)
        sims.append((sim, weight))
    scale = math.prod(h * applied.length_scales[n] for n in names for _ in range(which[n]))
    key = _derivative_key(which)
    acc = _tracker(setup, key, normalize, guard, sample_every)
    xx, yy = interior_nodes(setup)

    def observe(n):
        if n % sample_every == 0:
            num = sum(w * s.fields["Ez"][1:-1, 1:-1, 0, 0] for s, w in sims) / scale
            acc.add(num, cavity_fields(setup.oracle, xx, yy, n * setup.dt)[key])

    observe(0)
    for n in range(1, setup.steps + 1):
        for s, _ in sims:
            s.step()
        observe(n)
    for s, _ in sims:
        s.check()
    return acc.value

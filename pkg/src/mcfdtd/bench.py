"""Real-operation counts of perturbed versus unperturbed stepping.

A cubic PEC box is filled with a permittivity parameter carrying ``N``
imaginary units in every cell, so every E-update coefficient is fully
multicomplex while H coefficients stay real.  The counts come from the
kernel tallies (see :func:`mcfdtd.fdtd.kernels.tally_term`).
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from . import multicomplex as mc
from . import perturbation as pt
from .fdtd.grid import MaterialMap, YeeGrid
from .fdtd.solver import Simulation


@dataclass
class OpCountRow:
    order: int
    adds: int
    muls: int
    product_adds: int
    add_ratio: float
    mul_ratio: float
    seconds_per_step: float

    @property
    def claimed_add_ratio(self) -> int:
        return 2**self.order

    @property
    def claimed_mul_ratio(self) -> int:
        return 3**self.order

    @property
    def schoolbook_mul_ratio(self) -> float:
        """What a full 4**N product on E coefficients and a 2**N scaling on H predicts."""
        return (4**self.order + 2**self.order) / 2


def _simulation(order: int, size: int, backend):
    dims = (size, size, size)
    grid = YeeGrid.uniform(dims, (1e-3, 1e-3, 1e-3))
    eps = MaterialMap.vacuum(dims).eps_r
    if order:
        spec = pt.PerturbationSpec((pt.ParameterPerturbation("eps_r", pt.MATERIAL, 1e-5, [((0, 0, 0), dims)], order),))
        applied = pt.apply(spec, eps, grid.sizes)
        grid = YeeGrid(dims, applied.sizes)
        eps = applied.eps_r
    return Simulation(grid, MaterialMap(eps), backend=backend)


def count_step(order: int, size: int = 32, steps: int = 1, backend=None) -> tuple[dict, float]:
    """Average per-step tallies and wall time of an order-``order`` run."""
    sim = _simulation(order, size, backend)
    sim.step()  # warm-up outside the tally
    t0 = time.perf_counter()
    with mc.counting() as c:
        for _ in range(steps):
            sim.step()
    elapsed = (time.perf_counter() - t0) / steps
    return {k: v // steps for k, v in c.snapshot().items()}, elapsed


def operation_table(orders=(1, 2, 3), size: int = 32, steps: int = 1, backend=None) -> list[OpCountRow]:
    base, t_base = count_step(0, size, steps, backend)
    rows = [OpCountRow(0, base["adds"], base["muls"], base["product_adds"], 1.0, 1.0, t_base)]
    for n in orders:
        c, t = count_step(n, size, steps, backend)
        rows.append(OpCountRow(n, c["adds"], c["muls"], c["product_adds"],
                               c["adds"] / base["adds"], c["muls"] / base["muls"], t))
    return rows


def within(measured: float, claimed: float, tol: float = 0.05) -> bool:
    return abs(measured - claimed) <= tol * claimed

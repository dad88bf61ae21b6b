"""Named derivatives from multicomplex runs, Jacobian/Hessian assembly and
the marching-in-order (iterative) complex-step solver."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import multicomplex as mc
from . import perturbation as pt
from .fdtd.grid import MaterialMap, YeeGrid
from .fdtd.kernels import Coefficient
from .fdtd.solver import RunOutput, Simulation, build_terms


@dataclass
class DerivativeRecord:
    request: dict
    probe: str
    values: np.ndarray
    convention: str = "absolute"
    dt: float | None = None

    @property
    def order(self) -> int:
        return sum(self.request.values())

    @property
    def label(self) -> str:
        parts = [f"{n}^{k}" if k > 1 else n for n, k in self.request.items() if k]
        return "d/" + "d".join(parts) if parts else "value"


def extract(run: RunOutput, applied: pt.Applied, request: dict, probe: str,
            convention: str = pt.FRACTIONAL) -> DerivativeRecord:
    """``Im_mask / divisor`` of a probe series for the requested partial."""
    if probe not in run.series:
        raise KeyError(f"no probe named {probe!r}")
    idx, div = applied.derivative_index(request, convention)
    values = mc.im_part(run.series[probe], idx) / div
    tag = pt.convention_of(applied.spec, request, convention)
    return DerivativeRecord(dict(request), probe, values, tag, run.dt)


@dataclass
class JacobianReport:
    parameters: list
    matrices: dict
    runs_used: int
    cfd_runs: int

    def to_csv(self, probe: str) -> str:
        return _matrix_csv(self.matrices[probe], ["sample"] + list(self.parameters))


@dataclass
class HessianReport:
    parameters: list
    matrices: dict
    runs_used: int
    runs_full_grid: int
    cfd_runs: int

    def symmetry_residual(self, probe: str) -> float:
        h = self.matrices[probe]
        scale = np.abs(h).max()
        if scale == 0.0:
            return 0.0
        return float(np.abs(h - np.swapaxes(h, -1, -2)).max() / scale)

    def to_csv(self, probe: str, sample: int = -1) -> str:
        mat = self.matrices[probe][sample]
        return _matrix_csv(mat, ["row"] + list(self.parameters), row_names=self.parameters)


def _matrix_csv(mat, header, row_names=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i, row in enumerate(np.atleast_2d(mat)):
        w.writerow([row_names[i] if row_names else i] + [repr(float(v)) for v in row])
    return buf.getvalue()


def assemble_jacobian(runs: dict, probes, convention: str = pt.FRACTIONAL) -> JacobianReport:
    """One order-1 run per parameter -> per-probe ``(samples, N)`` matrices.

    ``runs`` maps a parameter name to ``(RunOutput, Applied)``.
    """
    names = list(runs)
    mats = {}
    for probe in probes:
        cols = []
        for name in names:
            run, applied = runs[name]
            if name not in [p.name for p in applied.spec.parameters]:
                raise KeyError(f"run for {name!r} does not perturb it")
            cols.append(extract(run, applied, {name: 1}, probe, convention).values)
        mats[probe] = np.stack(cols, axis=-1)
    return JacobianReport(names, mats, len(names), 2 * len(names))


def assemble_hessian(runs: dict, parameters, probes, convention: str = pt.FRACTIONAL) -> HessianReport:
    """Upper-triangle runs -> symmetric per-probe ``(samples, N, N)`` Hessians.

    ``runs`` maps ``(p, q)`` with ``p <= q`` (by position in ``parameters``)
    to ``(RunOutput, Applied)``; diagonal runs carry two units on one parameter.
    """
    names = list(parameters)
    n = len(names)
    missing = [(a, b) for i, a in enumerate(names) for b in names[i:] if (a, b) not in runs]
    if missing:
        raise KeyError(f"missing Hessian runs for {missing}")
    mats = {}
    for probe in probes:
        blocks = None
        for i, a in enumerate(names):
            for j in range(i, n):
                b = names[j]
                run, applied = runs[(a, b)]
                req = {a: 2} if a == b else {a: 1, b: 1}
                vals = extract(run, applied, req, probe, convention).values
                if blocks is None:
                    blocks = np.zeros(vals.shape + (n, n))
                blocks[..., i, j] = vals
                blocks[..., j, i] = vals
        mats[probe] = blocks
    return HessianReport(names, mats, n * (n + 1) // 2, n * n, 4 * n * n)


# ---------------------------------------------------------------------------
# marching-in-order complex step

def coefficient_derivative(k: int, scale: float, a, b, s):
    """k-th derivative in ``xi`` of ``scale / (a + b xi)`` evaluated at ``xi = s``.

    ``(-1)**k k! scale b**k / (a + b s)**(k + 1)``; ``s`` may be complex.
    """
    return (-1) ** k * math.factorial(k) * scale * b**k / (a + b * s) ** (k + 1)


class IterativeCSD:
    """Derivatives of one parameter up to ``max_order`` with linear memory.

    Level ``p`` holds the p-th parameter derivative of every field, evaluated
    at the complex-stepped parameter value (one imaginary unit).  Each level
    is advanced with the Leibniz-expanded update

        F(p) += sum_q C(p, q) c^(p-q) D F'(q)

    where ``c^(k)`` is the k-th derivative of the update coefficient.  The
    real part of level ``p`` approximates the p-th derivative and the
    imaginary part of the top level divided by ``h`` the next one.

    Permittivity parameters have been validated against full multicomplex
    runs; geometric parameters follow the same recipe but are experimental.
    """

    def __init__(self, grid: YeeGrid, materials: MaterialMap, parameter: pt.ParameterPerturbation,
                 max_order: int, boundaries=None, sources=(), probes=(), dt=None, backend=None):
        if parameter.order != 1:
            raise ValueError("the iterative scheme uses exactly one imaginary unit per parameter")
        if max_order < 1:
            raise ValueError("max_order must be at least 1")
        if grid.order or materials.eps_r.shape[-1] != 1:
            raise ValueError("start from real (unperturbed) arrays")
        self.parameter = parameter
        self.h = parameter.h
        self.geometric = parameter.kind == pt.GEOMETRIC
        self.levels = max_order
        spec = pt.PerturbationSpec((parameter,))
        applied = pt.apply(spec, materials.eps_r, grid.sizes)
        sim_grid = YeeGrid(grid.dims, applied.sizes, grid.te2d)
        self.base = Simulation(sim_grid, MaterialMap(applied.eps_r), boundaries, sources, probes, dt, backend)
        self.applied = applied
        self.dt = self.base.dt
        # unit-step linearisation: denominators are exactly a + b*xi
        unit = pt.apply(spec.with_steps(**{parameter.name: 1.0}), materials.eps_r, grid.sizes)
        lin_terms = build_terms(YeeGrid(grid.dims, unit.sizes, grid.te2d), MaterialMap(unit.eps_r), self.dt)
        self.plan = []
        for term, lin in zip(self.base.terms, lin_terms):
            a, b = lin.denominator[..., 0], lin.denominator[..., 1]
            coefs = []
            for k in range(max_order + 1):
                if k and not np.any(b):
                    coefs.append(None)
                    continue
                c = coefficient_derivative(k, term.scale, a, b, 1j * self.h)
                coefs.append(Coefficient(np.stack([c.real, c.imag], axis=-1)))
            self.plan.append((term, coefs))
        shapes = {c: f.shape for c, f in self.base.fields.items()}
        self.fields = [{c: np.zeros(s) for c, s in shapes.items()} for _ in range(max_order + 1)]
        self.fields[0] = self.base.fields
        self.n = 0
        self.series = {p.name: [[p.sample(f)] for f in self.fields] for p in self.base.probes}

    def set_fields(self, values: dict) -> None:
        """Initial condition of the undifferentiated fields (parameter independent)."""
        self.base.set_fields(values)
        self.series = {p.name: [[p.sample(f)] for f in self.fields] for p in self.base.probes}

    def _half_step(self, kind: str) -> None:
        apply = self.base._apply
        for p in range(self.levels + 1):
            tgt = self.fields[p]
            for q in range(p + 1):
                src = self.fields[q]
                weight = math.comb(p, q)
                for term, coefs in self.plan:
                    if term.target[0] != kind:
                        continue
                    coef = coefs[p - q]
                    if coef is None:
                        continue
                    apply(tgt[term.target], term.t0, src[term.source], term.s0, term.axis, term.sign * weight, coef)

    def step(self) -> None:
        base = self.base
        self._half_step("H")
        saved = [base.save_boundary(f) for f in self.fields]
        self._half_step("E")
        for f, s in zip(self.fields, saved):
            base.apply_boundary(f, s)
        self.n += 1
        base.n = self.n
        base.add_sources(self.fields[0], self.n * self.dt)
        for p in base.probes:
            for lvl, f in enumerate(self.fields):
                self.series[p.name][lvl].append(p.sample(f))
        if base.check_every and self.n % base.check_every == 0:
            for f in self.fields:
                base.check(f)

    def run(self, steps: int) -> "IterativeCSD":
        for _ in range(int(steps)):
            self.step()
        return self

    def derivative(self, probe: str, k: int, convention: str = pt.FRACTIONAL) -> np.ndarray:
        """k-th derivative series at a probe (k = 0 is the field itself)."""
        if not 0 <= k <= self.levels + 1:
            raise ValueError(f"order {k} not available (max {self.levels + 1})")
        scale = 1.0
        if self.geometric and convention == pt.PHYSICAL:
            scale = self.applied.length_scales[self.parameter.name] ** k
        if k <= self.levels:
            vals = np.array(self.series[probe][k])[:, 0]
        else:
            vals = np.array(self.series[probe][self.levels])[:, 1] / self.h
        return vals / scale

import math

import mpmath
import numpy as np
import pytest
import sympy as sp

from mcfdtd import multicomplex as mc
from mcfdtd import perturbation as pt
from mcfdtd.fdtd import kernels
from mcfdtd.fdtd.grid import EPS0, MU0, BoundarySpec, Diverged, MaterialMap, SourceSpec, YeeGrid
from mcfdtd.fdtd.solver import Probe, Simulation, material_coefficient
from mcfdtd.postprocess import CavityOracle
from mcfdtd.scenarios import cavity as cav


def _open_box(backend, order=2):
    dims = (10, 9, 8)
    grid = YeeGrid.uniform(dims, (1e-3, 1.2e-3, 0.9e-3))
    rng = np.random.default_rng(3)
    eps = MaterialMap.vacuum(dims).eps_r
    eps[2:6, 3:7, 1:5, 0] = 1.0 + 3.0 * rng.random((4, 4, 4))
    spec = pt.PerturbationSpec((
        pt.ParameterPerturbation("e", pt.MATERIAL, 1e-4, [((2, 3, 1), (6, 7, 5))], order - 1),
        pt.ParameterPerturbation("w", pt.GEOMETRIC, 1e-4, [((4, 0, 0), (5, 9, 8))], 1, axis=0,
                                 compensate=[((5, 0, 0), (6, 9, 8))]),
    ))
    applied = pt.apply(spec, eps, grid.sizes)
    faces = {f: "mur" for f in ("x-", "x+", "y-", "y+", "z+")}
    bounds = BoundarySpec(faces, plates=[])
    src = SourceSpec("Ez", (5, 2, 3), (6, 3, 4), width=5e-12)
    return Simulation(YeeGrid(dims, applied.sizes), MaterialMap(applied.eps_r), bounds, [src],
                      [Probe("p", "Ey", [(4, 4, 4)])], backend=backend)


@pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="compiled kernels not built")
def test_backends_are_bit_identical():
    a, b = _open_box("compiled"), _open_box("python")
    ra, rb = a.run(60), b.run(60)
    for comp in a.fields:
        assert np.array_equal(a.fields[comp], b.fields[comp]), comp
    assert np.array_equal(ra.series["p"], rb.series["p"])
    assert np.abs(ra.series["p"][:, 1:]).max() > 0


def test_permittivity_coefficient_decomposition_matches_symbolic():
    # 4x4 matrices of multiplication by j1 and j2 on the basis (1, j1, j2, j1 j2)
    J1 = sp.Matrix([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])
    J2 = sp.Matrix([[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]])
    er, h, dt = sp.symbols("er h dt", positive=True)
    M = er * sp.eye(4) + h * (J1 + J2)
    alpha = sp.simplify(dt / sp.Symbol("eps0") * M.inv()[:, 0])
    closed = dt / sp.Symbol("eps0") * sp.Matrix([er**2 + 2 * h**2, -er * h, -er * h, 2 * h**2]) / (er * (er**2 + 4 * h**2))
    assert sp.simplify(alpha - closed) == sp.zeros(4, 1)
    for e_val, h_val in [(2.2, 1e-5), (1.0, 1e-3), (10.2, 0.1)]:
        got = material_coefficient(np.array([e_val, h_val, h_val, 0.0]), 1e-12)
        ref = np.array([float(v) for v in closed.subs({er: e_val, h: h_val, dt: 1e-12, sp.Symbol("eps0"): EPS0})])
        assert np.allclose(got, ref, rtol=1e-14, atol=0)
        # imaginary parts are bounded by the first-order term
        assert np.abs(got[1:]).max() <= h_val / e_val * got[0]


def test_real_coefficient_is_exact_reciprocal():
    got = material_coefficient(np.array([[2.2], [1.0]]), 1e-12)
    assert np.array_equal(got[:, 0], 1e-12 / EPS0 * (1.0 / np.array([2.2, 1.0])))


def test_cfl_violation_rejected():
    grid = YeeGrid.uniform((4, 4, 4), (1e-3,) * 3)
    with pytest.raises(ValueError):
        Simulation(grid, MaterialMap.vacuum(grid.dims), dt=1.01 * grid.cfl_limit())


def test_divergence_detected():
    grid = YeeGrid.uniform((4, 4, 4), (1e-3,) * 3)
    sim = Simulation(grid, MaterialMap.vacuum(grid.dims))
    sim.fields["Ex"][1, 1, 1, 0] = np.nan
    with pytest.raises(Diverged):
        sim.check()


def _energy(sim):
    e = sum(float((f[..., 0] ** 2).sum()) for c, f in sim.fields.items() if c[0] == "E")
    h = sum(float((f[..., 0] ** 2).sum()) for c, f in sim.fields.items() if c[0] == "H")
    return EPS0 * e + MU0 * h


def test_closed_pec_box_energy_stays_bounded():
    grid = YeeGrid.uniform((12, 10, 8), (1e-3,) * 3)
    sim = Simulation(grid, MaterialMap.vacuum(grid.dims))
    rng = np.random.default_rng(0)
    sim.fields["Ez"][1:-1, 1:-1, :, 0] = rng.normal(size=sim.fields["Ez"][1:-1, 1:-1, :, 0].shape)
    levels = []
    for _ in range(400):
        sim.step()
        levels.append(_energy(sim))
    levels = np.array(levels)
    assert levels.max() / levels.min() < 3.0
    assert levels[-50:].mean() < 1.5 * levels[:50].mean()


def test_null_perturbation_reproduces_real_run():
    s = cav.CavitySetup(a=0.02, b=0.015, steps=120)
    sim, _ = cav.build(s, cav.dimension_parameters(s, {"a": 1, "b": 2}, 0.0))
    ref, _ = cav.build(s)
    sim.run(s.steps)
    ref.run(s.steps)
    for comp in ref.fields:
        assert np.array_equal(sim.fields[comp][..., 0], ref.fields[comp][..., 0])
        assert not np.any(sim.fields[comp][..., 1:])


def test_cavity_oracle_frequency_derivatives():
    o = CavityOracle(0.15, 0.10)
    assert math.isclose(o.frequency, 1.8015e9, rel_tol=1e-4)
    mpmath.mp.dps = 30
    f = lambda a, b: 0.5 * 299792458 * mpmath.sqrt(1 / a**2 + 1 / b**2)  # noqa: E731
    d = o.frequency_derivatives()
    checks = {"a": (1, 0), "b": (0, 1), "aa": (2, 0), "bb": (0, 2), "ab": (1, 1)}
    for key, (i, j) in checks.items():
        ref = float(mpmath.diff(f, (mpmath.mpf("0.15"), mpmath.mpf("0.10")), (i, j)))
        assert math.isclose(d[key], ref, rel_tol=1e-10), key


def test_cavity_mode_frequency_observed_in_run():
    s = cav.CavitySetup(a=0.03, b=0.02, spacing=1e-3, steps=4000)
    sim, _ = cav.build(s)
    out = sim.run(s.steps)
    x = out.series["center"][:, 0]
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size), n=1 << 18))
    f = np.fft.rfftfreq(1 << 18, sim.dt)[spec.argmax()]
    assert abs(f - s.oracle.frequency) / s.oracle.frequency < 5e-3


def test_geometric_perturbation_conserves_length_and_assigns_units():
    grid = YeeGrid.uniform((6, 4, 2), (1e-3, 1e-3, 1e-3))
    eps = MaterialMap.vacuum(grid.dims).eps_r
    spec = pt.PerturbationSpec((
        pt.ParameterPerturbation("e", pt.MATERIAL, 1e-3, [((0, 0, 0), (2, 4, 2))], 2),
        pt.ParameterPerturbation("w", pt.GEOMETRIC, 1e-3, [((2, 0, 0), (3, 4, 2))], 1, axis=0,
                                 compensate=[((3, 0, 0), (5, 4, 2))]),
    ))
    assert spec.units("e") == (1, 2) and spec.units("w") == (3,)
    app = pt.apply(spec, eps, grid.sizes)
    total = app.sizes[0][:, 0, 0].sum(axis=0)
    assert math.isclose(total[0], 6e-3) and np.abs(total[1:]).max() < 1e-18
    assert app.sizes[0][2, 0, 0, 4] == pytest.approx(1e-6)
    assert app.eps_r[0, 0, 0, 1] == app.eps_r[0, 0, 0, 2] == 1e-3
    idx, div = app.derivative_index({"e": 1, "w": 1})
    assert idx.mask == 0b101 and div == pytest.approx(1e-6)
    with pytest.raises(pt.PerturbationError):
        pt.apply(pt.PerturbationSpec((spec.parameters[0], pt.ParameterPerturbation(
            "f", pt.MATERIAL, 1e-3, [((1, 0, 0), (3, 1, 1))]))), eps, grid.sizes)
    with pytest.raises(pt.PerturbationError):
        pt.ParameterPerturbation("g", pt.GEOMETRIC, 1e-3, [((0, 0, 0), (1, 1, 1))])
